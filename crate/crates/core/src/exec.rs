//! Static contiguous partitioning of an output buffer across OS threads.

use std::ops::Range;
use std::thread;

/// Hardware threads available to this process, at least 1.
pub(crate) fn hardware_threads() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

/// Splits `out` into units of `chunk` consecutive elements (the last one
/// clamped) and calls `work(unit, range, slice)` once per unit, where `range`
/// is the unit's global index range and `slice` its disjoint output window.
///
/// Units are dealt to at most `threads` OS threads in contiguous blocks, so
/// each thread owns one contiguous region of `out`. All threads are joined
/// before returning.
pub(crate) fn for_each_unit<F>(out: &mut [u32], chunk: usize, threads: usize, work: F)
where
    F: Fn(usize, Range<usize>, &mut [u32]) + Sync,
{
    assert!(chunk > 0, "chunk must be positive");
    let len = out.len();
    if len == 0 {
        return;
    }
    let units = len.div_ceil(chunk);
    let threads = threads.clamp(1, units);
    if threads == 1 {
        run_block(out, 0, chunk, &work);
        return;
    }
    let units_per_thread = units.div_ceil(threads);
    let span = units_per_thread * chunk;
    thread::scope(|s| {
        for (t, block) in out.chunks_mut(span).enumerate() {
            let work = &work;
            s.spawn(move || run_block(block, t * units_per_thread, chunk, work));
        }
    });
}

fn run_block<F>(block: &mut [u32], first_unit: usize, chunk: usize, work: &F)
where
    F: Fn(usize, Range<usize>, &mut [u32]),
{
    for (k, slice) in block.chunks_mut(chunk).enumerate() {
        let unit = first_unit + k;
        let start = unit * chunk;
        work(unit, start..start + slice.len(), slice);
    }
}

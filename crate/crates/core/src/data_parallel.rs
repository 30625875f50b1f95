//! Data decomposition: worker `p` runs the branchless walk over records
//! `[m·p, min(m·(p+1), M))`.

use std::ops::Range;

use crate::data::{ClassAssignment, Dataset};
use crate::error::{Error, Result};
use crate::exec::{for_each_unit, hardware_threads};
use crate::serial::{check_arity, check_len, classify_range};
use crate::tree::EncodedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataParallelConfig {
    /// Logical worker count `P`.
    pub workers: usize,
    /// Records per worker `m`.
    pub chunk: usize,
    /// Require `P·m == M` exactly instead of clamping the last range.
    pub exact_fit: bool,
}

impl DataParallelConfig {
    pub fn new(workers: usize, chunk: usize) -> Self {
        DataParallelConfig {
            workers,
            chunk,
            exact_fit: false,
        }
    }

    /// One record per worker, `P = M`.
    pub fn one_record_per_worker(records: usize) -> Self {
        DataParallelConfig::new(records.max(1), 1)
    }

    /// `workers` workers with the smallest chunk that covers `records`.
    pub fn balanced(workers: usize, records: usize) -> Self {
        let chunk = records.div_ceil(workers.max(1)).max(1);
        DataParallelConfig::new(workers, chunk)
    }

    pub fn exact(mut self) -> Self {
        self.exact_fit = true;
        self
    }

    pub fn validate(&self, records: usize) -> Result<()> {
        if self.workers == 0 || self.chunk == 0 {
            return Err(Error::argument("workers and chunk must both be at least 1"));
        }
        let capacity = self.workers.saturating_mul(self.chunk);
        if capacity < records {
            return Err(Error::argument(format!(
                "{} workers x {} records cover only {capacity} of {records} records",
                self.workers, self.chunk
            )));
        }
        if self.exact_fit && capacity != records {
            return Err(Error::argument(format!(
                "exact fit requested but {} x {} != {records}",
                self.workers, self.chunk
            )));
        }
        Ok(())
    }

    /// Record range of every logical worker; trailing workers may be idle.
    pub fn ranges(&self, records: usize) -> Vec<Range<usize>> {
        (0..self.workers)
            .map(|p| {
                let start = (self.chunk * p).min(records);
                let end = (self.chunk * (p + 1)).min(records);
                start..end
            })
            .collect()
    }

    /// OS threads used to host the logical workers.
    pub fn os_threads(&self, records: usize) -> usize {
        let busy = records.div_ceil(self.chunk.max(1));
        self.workers.min(busy).min(hardware_threads()).max(1)
    }
}

pub fn eval_data_parallel(
    tree: &EncodedTree,
    d: &Dataset,
    cfg: &DataParallelConfig,
) -> Result<ClassAssignment> {
    let mut out = vec![0u32; d.len()];
    eval_data_parallel_into(tree, d, cfg, &mut out)?;
    Ok(ClassAssignment::from(out))
}

/// Evaluates into a caller buffer. Each worker writes only its own slice;
/// the call returns after every worker has finished.
pub fn eval_data_parallel_into(
    tree: &EncodedTree,
    d: &Dataset,
    cfg: &DataParallelConfig,
    out: &mut [u32],
) -> Result<()> {
    check_arity(tree, d)?;
    check_len(d, out)?;
    cfg.validate(d.len())?;
    let threads = cfg.os_threads(d.len());
    for_each_unit(out, cfg.chunk, threads, |_, range, slice| {
        classify_range(tree, d, range.start, slice);
    });
    Ok(())
}

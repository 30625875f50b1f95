//! Repeated timed runs with outer and inner timers.
//!
//! Outer time covers staging (copying the tree and dataset into the
//! evaluator's own layout and building its tables), output allocation,
//! evaluation, and copy-back into the caller's result buffer. Inner time
//! covers evaluation alone. Allocation is also reported on its own.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;
use spectree::{Dataset, EncodedTree};

use crate::geometry::{Geometry, Staged, Strategy};
use crate::CliResult;

pub const REPORT_VERSION: u32 = 1;

/// Summary of microsecond samples. `stddev` is the population deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub stddev: f64,
    pub iterations: usize,
}

impl TimingStats {
    pub fn from_samples(samples: &[f64]) -> Option<TimingStats> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(TimingStats {
            // Rounding can push the mean of identical samples a hair past
            // them; keep min <= mean <= max.
            mean: mean.clamp(min, max),
            min,
            max,
            stddev: var.sqrt(),
            iterations: samples.len(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Machine {
    pub os: &'static str,
    pub arch: &'static str,
    pub hardware_threads: usize,
}

impl Machine {
    pub fn current() -> Machine {
        Machine {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            hardware_threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    pub records: usize,
    pub arity: usize,
    pub tree_nodes: usize,
    pub iterations: usize,
    pub warmup: usize,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, Serialize)]
pub struct Samples {
    pub outer: Vec<f64>,
    pub inner: Vec<f64>,
    pub alloc: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyTiming {
    pub strategy: Strategy,
    pub outer: TimingStats,
    /// Absent for the serial baseline, which has no separate kernel phase.
    pub inner: Option<TimingStats>,
    pub alloc: TimingStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Samples>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub reference: Strategy,
    pub mismatches: BTreeMap<Strategy, usize>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub version: u32,
    pub machine: Machine,
    pub config: BenchConfig,
    /// Mean cost of one clock read, measured once; not subtracted.
    pub timer_overhead_us: f64,
    pub dataset_checksum_before: String,
    pub dataset_checksum_after: String,
    pub strategies: Vec<StrategyTiming>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
}

fn micros(d: Duration) -> f64 {
    d.as_secs_f64() * 1e6
}

pub fn timer_overhead_us() -> f64 {
    const READS: u32 = 10_000;
    let start = Instant::now();
    let mut last = start;
    for _ in 0..READS {
        last = std::hint::black_box(Instant::now());
    }
    micros(last - start) / f64::from(READS)
}

struct Run {
    outer: f64,
    inner: f64,
    alloc: f64,
}

/// One full outer-timed call. The result lands in `host`.
fn run_once(
    strategy: Strategy,
    tree: &EncodedTree,
    d: &Dataset,
    geometry: &Geometry,
    host: &mut [u32],
) -> CliResult<Run> {
    let t_outer = Instant::now();
    let tree_local = tree.clone();
    let data_local = d.clone();
    let staged = Staged::new(strategy, &tree_local, &data_local, geometry)?;

    let t_alloc = Instant::now();
    let mut out = vec![0u32; data_local.len()];
    let alloc = t_alloc.elapsed();

    let t_inner = Instant::now();
    staged.run_into(&data_local, &mut out)?;
    let inner = t_inner.elapsed();

    host.copy_from_slice(&out);
    drop(out);
    drop(staged);
    let outer = t_outer.elapsed();
    Ok(Run {
        outer: micros(outer),
        inner: micros(inner),
        alloc: micros(alloc),
    })
}

pub struct BenchOptions<'a> {
    pub strategies: &'a [Strategy],
    pub geometry: &'a Geometry,
    pub iterations: usize,
    pub warmup: usize,
    pub verbose: bool,
}

pub fn run_bench(
    tree: &EncodedTree,
    d: &Dataset,
    opts: &BenchOptions<'_>,
) -> CliResult<BenchReport> {
    if opts.iterations == 0 {
        return Err(crate::CliError::Usage(
            "iterations must be at least 1".into(),
        ));
    }
    let checksum_before = d.checksum();

    // Stage everything once up front so bad geometry fails before timing.
    let mut results = BTreeMap::new();
    for &s in opts.strategies {
        let staged = Staged::new(s, tree, d, opts.geometry)?;
        let mut out = vec![0u32; d.len()];
        staged.run_into(d, &mut out)?;
        results.insert(s, out);
    }

    let overhead = timer_overhead_us();
    let mut host = vec![0u32; d.len()];
    let mut timings = Vec::new();
    for &s in opts.strategies {
        for _ in 0..opts.warmup {
            run_once(s, tree, d, opts.geometry, &mut host)?;
        }
        let mut samples = Samples {
            outer: Vec::with_capacity(opts.iterations),
            inner: Vec::with_capacity(opts.iterations),
            alloc: Vec::with_capacity(opts.iterations),
        };
        for _ in 0..opts.iterations {
            let r = run_once(s, tree, d, opts.geometry, &mut host)?;
            samples.outer.push(r.outer);
            samples.inner.push(r.inner);
            samples.alloc.push(r.alloc);
        }
        let serial = s == Strategy::Serial;
        if serial {
            samples.inner.clear();
        }
        let stats = |v: &[f64]| TimingStats::from_samples(v).expect("at least one iteration");
        timings.push(StrategyTiming {
            strategy: s,
            outer: stats(&samples.outer),
            inner: TimingStats::from_samples(&samples.inner),
            alloc: stats(&samples.alloc),
            samples: opts.verbose.then_some(samples),
        });
    }

    let checked = opts.strategies.iter().any(|&s| s != Strategy::Serial);
    let verification = if checked {
        let expected = spectree::eval_serial(tree, d)?;
        let mismatches: BTreeMap<Strategy, usize> = results
            .iter()
            .filter(|(s, _)| **s != Strategy::Serial)
            .map(|(s, got)| {
                let n = got
                    .iter()
                    .zip(expected.as_slice())
                    .filter(|(a, b)| a != b)
                    .count();
                (*s, n)
            })
            .collect();
        let passed = mismatches.values().all(|&n| n == 0);
        Some(Verification {
            reference: Strategy::Serial,
            mismatches,
            passed,
        })
    } else {
        None
    };

    Ok(BenchReport {
        version: REPORT_VERSION,
        machine: Machine::current(),
        config: BenchConfig {
            records: d.len(),
            arity: d.arity(),
            tree_nodes: tree.len(),
            iterations: opts.iterations,
            warmup: opts.warmup,
            geometry: opts.geometry.clone(),
        },
        timer_overhead_us: overhead,
        dataset_checksum_before: format!("{checksum_before:016x}"),
        dataset_checksum_after: format!("{:016x}", d.checksum()),
        strategies: timings,
        verification,
    })
}

/// Table layout: outer and inner mean/min/max/stddev per strategy.
pub fn render_table(r: &BenchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} records x {} attributes, {}-node tree; {} iterations after {} warm-up runs",
        r.config.records, r.config.arity, r.config.tree_nodes, r.config.iterations, r.config.warmup
    );
    let _ = writeln!(
        s,
        "{:<11}|{:>12}{:>12}{:>12}{:>12} |{:>12}{:>12}{:>12}{:>12}",
        "",
        "outer mean",
        "outer min",
        "outer max",
        "outer sd",
        "inner mean",
        "inner min",
        "inner max",
        "inner sd"
    );
    for t in &r.strategies {
        let cells = |st: Option<&TimingStats>| match st {
            Some(st) => format!(
                "{:>12.1}{:>12.1}{:>12.1}{:>12.1}",
                st.mean, st.min, st.max, st.stddev
            ),
            None => format!("{:>12}{:>12}{:>12}{:>12}", "N/A", "N/A", "N/A", "N/A"),
        };
        let _ = writeln!(
            s,
            "{:<11}|{} |{}",
            t.strategy.name(),
            cells(Some(&t.outer)),
            cells(t.inner.as_ref())
        );
    }
    let _ = writeln!(s, "times in microseconds");
    for t in &r.strategies {
        let _ = writeln!(
            s,
            "allocation {:<11} mean {:.2} us (included in outer)",
            t.strategy.name(),
            t.alloc.mean
        );
    }
    let _ = writeln!(
        s,
        "timer overhead {:.3} us per read (not subtracted)",
        r.timer_overhead_us
    );
    let _ = writeln!(
        s,
        "dataset checksum {} before, {} after",
        r.dataset_checksum_before, r.dataset_checksum_after
    );
    if let Some(v) = &r.verification {
        let total: usize = v.mismatches.values().sum();
        let _ = writeln!(
            s,
            "verification against {}: {total} mismatches",
            v.reference.name()
        );
    }
    s
}

pub fn render_csv(r: &BenchReport) -> String {
    let mut s = String::from("strategy,phase,mean_us,min_us,max_us,stddev_us,iterations\n");
    for t in &r.strategies {
        let phases = [
            ("outer", Some(&t.outer)),
            ("inner", t.inner.as_ref()),
            ("alloc", Some(&t.alloc)),
        ];
        for (phase, st) in phases {
            match st {
                Some(st) => {
                    let _ = writeln!(
                        s,
                        "{},{phase},{},{},{},{},{}",
                        t.strategy.name(),
                        st.mean,
                        st.min,
                        st.max,
                        st.stddev,
                        st.iterations
                    );
                }
                None => {
                    let _ = writeln!(s, "{},{phase},,,,,", t.strategy.name());
                }
            }
        }
    }
    s
}

//! Lockstep SIMD replay of the parallel kernels.
//!
//! Lanes of a warp share one instruction stream. When lanes disagree at a
//! loop guard, the warp keeps executing the loop body with the finished lanes
//! masked off, so each loop costs the warp the maximum trip count over its
//! resident lanes. The model counts only loop-guard divergence: the kernels
//! are otherwise straight-line arithmetic.
//!
//! The simulators run the real evaluators record by record and return their
//! class assignments alongside the counters.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::data::{ClassAssignment, Dataset};
use crate::data_parallel::DataParallelConfig;
use crate::error::{Error, Result};
use crate::serial::{check_arity, classify_counted};
use crate::speculative::{Probe, SpeculativeConfig, SpeculativeEvaluator};
use crate::tree::EncodedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WarpConfig {
    pub warp_width: usize,
    /// Pack record groups at half-warp granularity: a group occupies a
    /// multiple of `warp_width / 2` lanes.
    pub half_warp: bool,
}

impl Default for WarpConfig {
    fn default() -> Self {
        WarpConfig {
            warp_width: 32,
            half_warp: true,
        }
    }
}

impl WarpConfig {
    fn validate(&self) -> Result<()> {
        if !self.warp_width.is_power_of_two() {
            return Err(Error::argument(format!(
                "warp width {} is not a power of two",
                self.warp_width
            )));
        }
        Ok(())
    }

    /// Lanes a group of `p` occupies, and how many such groups share a warp.
    fn group_packing(&self, p: usize) -> Result<(usize, usize)> {
        self.validate()?;
        if p == 0 || p > self.warp_width {
            return Err(Error::argument(format!(
                "group of {p} lanes does not fit a {}-lane warp",
                self.warp_width
            )));
        }
        let slot = if self.half_warp {
            let g = (self.warp_width / 2).max(1);
            p.div_ceil(g) * g
        } else {
            p
        };
        if !self.warp_width.is_multiple_of(slot) {
            return Err(Error::argument(format!(
                "group of {p} lanes does not divide a {}-lane warp",
                self.warp_width
            )));
        }
        Ok((slot, self.warp_width / slot))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExecMetrics {
    /// Loop-guard checks at which the resident lanes disagreed.
    pub divergent_branches: u64,
    /// Loop-body executions by warps: per loop, the maximum trip count over
    /// the warp's lanes, summed over loops and warps.
    pub serialized_passes: u64,
    /// Group barriers executed.
    pub barriers: u64,
    /// Node evaluations performed by active lanes.
    pub node_evals: u64,
    /// Reduction-loop trips summed over every record.
    pub reduction_iterations: u64,
    /// Lane-passes spent masked off or idle.
    pub lane_idle_slots: u64,
}

impl ExecMetrics {
    pub const COUNTERS: [&'static str; 6] = [
        "divergent_branches",
        "serialized_passes",
        "barriers",
        "node_evals",
        "reduction_iterations",
        "lane_idle_slots",
    ];

    pub fn values(&self) -> [u64; 6] {
        [
            self.divergent_branches,
            self.serialized_passes,
            self.barriers,
            self.node_evals,
            self.reduction_iterations,
            self.lane_idle_slots,
        ]
    }

    pub fn csv_header() -> String {
        format!("kernel,{}", Self::COUNTERS.join(","))
    }

    pub fn csv_row(&self, kernel: &str) -> String {
        let values: Vec<String> = self.values().iter().map(u64::to_string).collect();
        format!("{kernel},{}", values.join(","))
    }
}

/// Counters plus the classification the replay produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub metrics: ExecMetrics,
    pub assignment: ClassAssignment,
    /// Every lane of every record group saw the same reduction-loop guard at
    /// every check. Always true for the data-parallel kernel.
    pub uniform_guards: bool,
}

/// Number of guard checks in one lockstep loop at which lanes disagree,
/// given each resident lane's trip count. A check at trip `t` diverges when
/// some lane stops there and another keeps going, so every distinct trip
/// count below the maximum contributes one divergent check.
fn divergent_checks(trips: &[u32]) -> u64 {
    let Some(&max) = trips.iter().max() else {
        return 0;
    };
    trips
        .iter()
        .filter(|&&t| t < max)
        .collect::<BTreeSet<_>>()
        .len() as u64
}

/// Lanes are logical workers in rank order; warp `w` holds workers
/// `[w·W, (w+1)·W)`. Each lane walks its record range one record at a time.
pub fn simulate_data_parallel(
    tree: &EncodedTree,
    d: &Dataset,
    warp: &WarpConfig,
    dp: &DataParallelConfig,
) -> Result<Simulation> {
    warp.validate()?;
    check_arity(tree, d)?;
    dp.validate(d.len())?;

    let nodes = tree.nodes();
    let mut classes = vec![0u32; d.len()];
    let mut depths = vec![0u32; d.len()];
    for (i, r) in d.records().enumerate() {
        let (c, trips) = classify_counted(nodes, r);
        classes[i] = c;
        depths[i] = trips;
    }

    let ranges = dp.ranges(d.len());
    let busy = d.len().div_ceil(dp.chunk).min(dp.workers);
    let w = warp.warp_width;
    let mut m = ExecMetrics::default();
    for first in (0..busy).step_by(w) {
        let lanes = &ranges[first..(first + w).min(dp.workers)];
        let lens: Vec<u32> = lanes.iter().map(|r| r.len() as u32).collect();
        m.divergent_branches += divergent_checks(&lens);
        let slots = lens.iter().copied().max().unwrap_or(0) as usize;
        let mut trips = Vec::with_capacity(lanes.len());
        for j in 0..slots {
            trips.clear();
            trips.extend(
                lanes
                    .iter()
                    .filter(|r| j < r.len())
                    .map(|r| depths[r.start + j]),
            );
            let passes = trips.iter().copied().max().unwrap_or(0);
            let idle_lanes = (lanes.len() - trips.len()) as u64;
            m.serialized_passes += u64::from(passes);
            m.divergent_branches += divergent_checks(&trips);
            m.node_evals += trips.iter().map(|&t| u64::from(t)).sum::<u64>();
            m.lane_idle_slots += trips.iter().map(|&t| u64::from(passes - t)).sum::<u64>()
                + idle_lanes * u64::from(passes);
        }
    }
    Ok(Simulation {
        metrics: m,
        assignment: classes.into(),
        uniform_guards: true,
    })
}

/// Per-record counters gathered through the evaluator's probe hooks.
struct CountingProbe {
    lanes: usize,
    barriers: u64,
    iterations: u32,
    uniform: bool,
    first_guard: Option<bool>,
    seen: usize,
}

impl CountingProbe {
    fn new(lanes: usize) -> Self {
        CountingProbe {
            lanes,
            barriers: 0,
            iterations: 0,
            uniform: true,
            first_guard: None,
            seen: 0,
        }
    }
}

impl Probe for CountingProbe {
    const OBSERVES_LANES: bool = true;

    fn barrier(&mut self) {
        self.barriers += 1;
    }

    fn lane_guard(&mut self, _lane: usize, keep_reducing: bool) {
        match self.first_guard {
            None => self.first_guard = Some(keep_reducing),
            Some(g) if g != keep_reducing => self.uniform = false,
            Some(_) => {}
        }
        self.seen += 1;
        if self.seen == self.lanes {
            self.seen = 0;
            self.first_guard = None;
        }
    }

    fn iteration(&mut self) {
        self.iterations += 1;
    }
}

/// Record groups are packed into warps in group order; warp divergence can
/// only come from co-resident groups whose records need different numbers of
/// reduction-loop trips, since the guard reads the group-shared `path[0]`.
///
/// Idle lane-passes count the phantom lanes of a group during node
/// evaluation and each of its own reduction passes, plus all of a group's
/// lanes for warp passes it sits out.
pub fn simulate_speculative(
    tree: &EncodedTree,
    d: &Dataset,
    warp: &WarpConfig,
    cfg: &SpeculativeConfig,
) -> Result<Simulation> {
    simulate_groups(SpeculativeEvaluator::new(tree, *cfg)?, d, warp)
}

/// [`simulate_speculative`] for the one-lane-per-node variant.
pub fn simulate_speculative_basic(
    tree: &EncodedTree,
    d: &Dataset,
    warp: &WarpConfig,
    cfg: &SpeculativeConfig,
) -> Result<Simulation> {
    simulate_groups(SpeculativeEvaluator::basic(tree, *cfg)?, d, warp)
}

fn simulate_groups(
    ev: SpeculativeEvaluator<'_>,
    d: &Dataset,
    warp: &WarpConfig,
) -> Result<Simulation> {
    ev.check_dataset(d)?;
    let cfg = *ev.config();
    let p = cfg.group_lanes;
    let (_, per_warp) = warp.group_packing(p)?;
    let mapped = ev.mapped_lanes() as u64;
    let phantom = p as u64 - mapped.min(p as u64);

    let ranges = cfg.ranges(d.len());
    let busy = d.len().div_ceil(cfg.records_per_group).min(cfg.groups);
    let mut classes = vec![0u32; d.len()];
    let mut m = ExecMetrics::default();
    let mut uniform = true;

    for first in (0..busy).step_by(per_warp) {
        let members = &ranges[first..(first + per_warp).min(cfg.groups)];
        let mut groups: Vec<_> = members
            .iter()
            .map(|_| {
                let mut probe = CountingProbe::new(p);
                let group = ev.group(&mut probe);
                m.barriers += probe.barriers;
                group
            })
            .collect();
        let lens: Vec<u32> = members.iter().map(|r| r.len() as u32).collect();
        m.divergent_branches += divergent_checks(&lens);
        let slots = lens.iter().copied().max().unwrap_or(0) as usize;

        let mut iters = Vec::with_capacity(members.len());
        for j in 0..slots {
            iters.clear();
            for (range, group) in members.iter().zip(groups.iter_mut()) {
                if j >= range.len() {
                    continue;
                }
                let idx = range.start + j;
                let mut probe = CountingProbe::new(p);
                classes[idx] = group.classify(d.record(idx), &mut probe);
                m.barriers += probe.barriers;
                if !probe.uniform {
                    uniform = false;
                    m.divergent_branches += 1;
                }
                iters.push(probe.iterations);
            }
            let passes = iters.iter().copied().max().unwrap_or(0);
            let sitting_out = (members.len() - iters.len()) as u64;
            m.serialized_passes += u64::from(passes);
            m.divergent_branches += divergent_checks(&iters);
            m.reduction_iterations += iters.iter().map(|&t| u64::from(t)).sum::<u64>();
            m.node_evals += mapped * iters.len() as u64;
            for &own in &iters {
                m.lane_idle_slots +=
                    phantom * (1 + u64::from(own)) + p as u64 * u64::from(passes - own);
            }
            m.lane_idle_slots += sitting_out * p as u64 * (1 + u64::from(passes));
        }
    }
    Ok(Simulation {
        metrics: m,
        assignment: classes.into(),
        uniform_guards: uniform,
    })
}

/// Side-by-side counters of two kernel runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub left: String,
    pub right: String,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub counter: &'static str,
    pub left: u64,
    pub right: u64,
    /// `left / right`, absent when `right` is zero.
    pub ratio: Option<f64>,
}

pub fn compare(
    left_name: &str,
    left: &ExecMetrics,
    right_name: &str,
    right: &ExecMetrics,
) -> Comparison {
    let rows = ExecMetrics::COUNTERS
        .iter()
        .zip(left.values().into_iter().zip(right.values()))
        .map(|(&counter, (l, r))| ComparisonRow {
            counter,
            left: l,
            right: r,
            ratio: (r != 0).then(|| l as f64 / r as f64),
        })
        .collect();
    Comparison {
        left: left_name.to_string(),
        right: right_name.to_string(),
        rows,
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<22} {:>16} {:>16} {:>10}",
            "counter", self.left, self.right, "ratio"
        )?;
        for row in &self.rows {
            let ratio = row
                .ratio
                .map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"));
            writeln!(
                f,
                "{:<22} {:>16} {:>16} {:>10}",
                row.counter, row.left, row.right, ratio
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::serial::eval_serial;
    use crate::tree::encode_breadth_first;
    use crate::tree::fixtures::*;
    use crate::tree::LinkedNode;

    /// Left spine of `depth` decision nodes on attribute 0 with thresholds
    /// 1, 2, ..., so a value in (k, k+1] stops at depth k+1 (capped).
    fn spine(depth: u32) -> LinkedNode {
        let mut node = LinkedNode::leaf(depth);
        for level in (0..depth).rev() {
            node = LinkedNode::split(0, (level + 1) as f32, LinkedNode::leaf(level), node);
        }
        node
    }

    #[test]
    fn divergent_check_counting() {
        assert_eq!(divergent_checks(&[]), 0);
        assert_eq!(divergent_checks(&[3, 3, 3]), 0);
        assert_eq!(divergent_checks(&[1, 11]), 1);
        assert_eq!(divergent_checks(&[0, 1, 2, 2, 5]), 3);
    }

    #[test]
    fn uniform_records_never_diverge() {
        let tree = encode_breadth_first(&complete_depth2()).unwrap();
        let d = Dataset::new(1, vec![0.3; 128]).unwrap();
        let dp = DataParallelConfig::one_record_per_worker(128);
        let s = simulate_data_parallel(&tree, &d, &WarpConfig::default(), &dp).unwrap();
        assert_eq!(s.metrics.divergent_branches, 0);
        assert_eq!(s.metrics.lane_idle_slots, 0);
        assert_eq!(s.metrics.serialized_passes, 4 * 2);
    }

    #[test]
    fn one_deep_lane_serializes_the_warp() {
        let tree = encode_breadth_first(&spine(11)).unwrap();
        // First record reaches depth 11, the other 31 stop at depth 1.
        let mut values = vec![100.0];
        values.extend(std::iter::repeat_n(0.5, 31));
        let d = Dataset::new(1, values).unwrap();
        let dp = DataParallelConfig::one_record_per_worker(32);
        let s = simulate_data_parallel(&tree, &d, &WarpConfig::default(), &dp).unwrap();
        assert_eq!(s.metrics.serialized_passes, 11);
        assert_eq!(s.metrics.lane_idle_slots, 31 * 10);
        assert_eq!(s.metrics.divergent_branches, 1);
        assert_eq!(s.assignment, eval_serial(&tree, &d).unwrap());
    }

    #[test]
    fn one_group_per_warp_has_no_divergence() {
        let tree = encode_breadth_first(&spine(11)).unwrap();
        let d = Dataset::new(1, vec![0.5, 100.0, 3.5, 7.5]).unwrap();
        let warp = WarpConfig {
            warp_width: 16,
            half_warp: false,
        };
        let cfg = SpeculativeConfig::covering(16, 1, d.len());
        let s = simulate_speculative(&tree, &d, &warp, &cfg).unwrap();
        assert_eq!(s.metrics.divergent_branches, 0);
        assert!(s.uniform_guards);
        assert_eq!(s.assignment, eval_serial(&tree, &d).unwrap());
    }

    #[test]
    fn two_resident_groups_depths_1_and_11() {
        let tree = encode_breadth_first(&spine(11)).unwrap();
        let d = Dataset::new(1, vec![0.5, 100.0]).unwrap();
        let cfg = SpeculativeConfig::covering(16, 1, 2);
        let s = simulate_speculative(&tree, &d, &WarpConfig::default(), &cfg).unwrap();
        // ceil(ceil(log2 11) / 2) = 2 trips for the deep record, 0 for the other.
        assert_eq!(s.metrics.reduction_iterations, 2);
        assert_eq!(s.metrics.serialized_passes, 2);
        assert_eq!(s.metrics.divergent_branches, 1);
        assert_eq!(s.metrics.node_evals, 2 * 11);
        // Two init barriers, then per record 1 + k·trips.
        assert_eq!(s.metrics.barriers, 2 + 1 + (1 + 2 * 2));
    }

    #[test]
    fn packing_rules() {
        let w = WarpConfig::default();
        assert_eq!(w.group_packing(16).unwrap(), (16, 2));
        assert_eq!(w.group_packing(15).unwrap(), (16, 2));
        assert_eq!(w.group_packing(17).unwrap(), (32, 1));
        assert!(w.group_packing(33).is_err());
        let plain = WarpConfig {
            warp_width: 32,
            half_warp: false,
        };
        assert_eq!(plain.group_packing(8).unwrap(), (8, 4));
        assert!(plain.group_packing(15).is_err());
        let odd = WarpConfig {
            warp_width: 24,
            half_warp: true,
        };
        assert!(odd.group_packing(8).is_err());
    }

    #[test]
    fn compare_reports() {
        let a = ExecMetrics {
            divergent_branches: 4,
            serialized_passes: 10,
            barriers: 0,
            node_evals: 8,
            reduction_iterations: 0,
            lane_idle_slots: 2,
        };
        let same = compare("a", &a, "b", &a);
        for row in &same.rows {
            if row.right != 0 {
                assert_eq!(row.ratio, Some(1.0));
            } else {
                assert_eq!(row.ratio, None);
            }
        }
        let zero = compare("a", &ExecMetrics::default(), "b", &ExecMetrics::default());
        assert!(zero.rows.iter().all(|r| r.ratio.is_none()));
        assert!(zero.to_string().contains("n/a"));
    }

    #[test]
    fn csv_row_layout() {
        assert_eq!(
            ExecMetrics::csv_header(),
            "kernel,divergent_branches,serialized_passes,barriers,node_evals,reduction_iterations,lane_idle_slots"
        );
        assert_eq!(ExecMetrics::default().csv_row("data"), "data,0,0,0,0,0,0");
    }
}

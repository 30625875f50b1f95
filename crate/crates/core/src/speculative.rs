//! Speculative node-parallel evaluation.
//!
//! A record group of `p` lanes evaluates every decision node of the tree for
//! the same record at once, storing each node's chosen child in a shared
//! `path` array. The root's terminal leaf is then found by successor
//! doubling, `path[n] <- path[path[n]]`, which halves the remaining distance
//! on every synchronous step. Leaves are self-loops, so resolved entries stay
//! put.
//!
//! On the CPU one worker emulates a whole group: each phase is a loop over
//! the lanes, and a lockstep step reads all operands before writing any
//! result, which is exactly what a barrier-separated SIMD step observes.
//! Groups run concurrently on disjoint record ranges.

use std::ops::Range;

use crate::data::{ClassAssignment, Dataset};
use crate::error::{Error, Result};
use crate::exec::{for_each_unit, hardware_threads};
use crate::serial::{check_arity, check_len};
use crate::tree::{EncodedNode, EncodedTree, LeafPaths};

/// What one pass of the reduction loop does.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReductionMode {
    /// `k` synchronous doubling steps, each followed by a barrier. One loop
    /// iteration multiplies every successor distance by `2^k`.
    #[default]
    Doubling,
    /// The literal in-place `path[i] = path[path[path[i]]]`, lanes applied in
    /// rank order with a single barrier per iteration. Convergence is
    /// guaranteed, but the per-iteration progress depends on lane order, so
    /// only the final class is specified. `k` is ignored.
    Compound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpeculativeConfig {
    /// Lanes per record group, `p`.
    pub group_lanes: usize,
    /// Number of record groups, `G`.
    pub groups: usize,
    /// Records handled by each group, `m`.
    pub records_per_group: usize,
    /// Doubling steps per reduction-loop iteration, `k`.
    pub reductions_per_iteration: usize,
    pub mode: ReductionMode,
    /// Require `G·m == M` exactly instead of clamping the last group.
    pub exact_fit: bool,
}

impl SpeculativeConfig {
    pub fn new(group_lanes: usize, groups: usize, records_per_group: usize) -> Self {
        SpeculativeConfig {
            group_lanes,
            groups,
            records_per_group,
            reductions_per_iteration: 2,
            mode: ReductionMode::Doubling,
            exact_fit: false,
        }
    }

    /// Enough groups of `records_per_group` records to cover `records`.
    pub fn covering(group_lanes: usize, records_per_group: usize, records: usize) -> Self {
        let m = records_per_group.max(1);
        SpeculativeConfig::new(group_lanes, records.div_ceil(m).max(1), m)
    }

    /// The reference GPU geometry: half-warp groups of 16 lanes, 32 records
    /// per group, two doubling steps per loop iteration.
    pub fn half_warp(records: usize) -> Self {
        SpeculativeConfig::covering(16, 32, records)
    }

    /// One lane per tree node, as required by the basic variant.
    pub fn one_lane_per_node(tree: &EncodedTree, records_per_group: usize, records: usize) -> Self {
        SpeculativeConfig::covering(tree.len(), records_per_group, records)
    }

    pub fn with_reductions(mut self, k: usize) -> Self {
        self.reductions_per_iteration = k;
        self
    }

    pub fn with_mode(mut self, mode: ReductionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn exact(mut self) -> Self {
        self.exact_fit = true;
        self
    }

    /// Record range of every group; trailing groups may be idle.
    pub fn ranges(&self, records: usize) -> Vec<Range<usize>> {
        let m = self.records_per_group;
        (0..self.groups)
            .map(|g| (m * g).min(records)..(m * (g + 1)).min(records))
            .collect()
    }

    fn validate_geometry(&self, tree: &EncodedTree, variant: Variant) -> Result<()> {
        if self.group_lanes == 0 || self.groups == 0 || self.records_per_group == 0 {
            return Err(Error::argument(
                "group lanes, groups and records per group must all be at least 1",
            ));
        }
        if self.reductions_per_iteration == 0 {
            return Err(Error::argument(
                "reductions per iteration must be at least 1",
            ));
        }
        let n = tree.len();
        match variant {
            Variant::OneLanePerNode if self.group_lanes != n => Err(Error::argument(format!(
                "basic speculative evaluation needs one lane per node: p = {n}, got {}",
                self.group_lanes
            ))),
            Variant::DecisionLanes if self.group_lanes < (n - 1) / 2 => {
                Err(Error::argument(format!(
                    "tree has {} decision nodes but groups have only {} lanes",
                    (n - 1) / 2,
                    self.group_lanes
                )))
            }
            _ => Ok(()),
        }
    }

    fn validate_records(&self, records: usize) -> Result<()> {
        let capacity = self.groups.saturating_mul(self.records_per_group);
        if capacity < records {
            return Err(Error::argument(format!(
                "{} groups x {} records cover only {capacity} of {records} records",
                self.groups, self.records_per_group
            )));
        }
        if self.exact_fit && capacity != records {
            return Err(Error::argument(format!(
                "exact fit requested but {} x {} != {records}",
                self.groups, self.records_per_group
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    /// Every node, leaves included, owns a lane and is re-evaluated per record.
    OneLanePerNode,
    /// Only decision nodes own lanes; leaf entries come from the static table.
    DecisionLanes,
}

/// A configured speculative evaluator over one tree. Immutable and shareable
/// between threads; each run creates its own per-group path arrays.
#[derive(Debug, Clone)]
pub struct SpeculativeEvaluator<'t> {
    tree: &'t EncodedTree,
    cfg: SpeculativeConfig,
    variant: Variant,
    leaf_paths: LeafPaths,
    /// Node owned by each mapped lane, by lane rank.
    lane_nodes: Vec<u32>,
}

impl<'t> SpeculativeEvaluator<'t> {
    /// Decision-node lanes with statically initialized leaves and `k`
    /// reductions per loop iteration. Needs `p >= (N-1)/2`.
    pub fn new(tree: &'t EncodedTree, cfg: SpeculativeConfig) -> Result<Self> {
        cfg.validate_geometry(tree, Variant::DecisionLanes)?;
        Ok(SpeculativeEvaluator {
            tree,
            cfg,
            variant: Variant::DecisionLanes,
            leaf_paths: tree.leaf_paths(),
            lane_nodes: tree.processor_node_map().as_slice().to_vec(),
        })
    }

    /// One lane per node (`p = N`), leaves re-evaluated every record.
    pub fn basic(tree: &'t EncodedTree, cfg: SpeculativeConfig) -> Result<Self> {
        cfg.validate_geometry(tree, Variant::OneLanePerNode)?;
        Ok(SpeculativeEvaluator {
            tree,
            cfg,
            variant: Variant::OneLanePerNode,
            leaf_paths: tree.leaf_paths(),
            lane_nodes: (0..tree.len() as u32).collect(),
        })
    }

    pub fn config(&self) -> &SpeculativeConfig {
        &self.cfg
    }

    /// Lanes that own a node; the remaining `p - mapped_lanes()` are idle.
    pub fn mapped_lanes(&self) -> usize {
        self.lane_nodes.len()
    }

    pub fn run(&self, d: &Dataset) -> Result<ClassAssignment> {
        let mut out = vec![0u32; d.len()];
        self.run_into(d, &mut out)?;
        Ok(ClassAssignment::from(out))
    }

    pub fn run_into(&self, d: &Dataset, out: &mut [u32]) -> Result<()> {
        self.check_dataset(d)?;
        check_len(d, out)?;
        let m = self.cfg.records_per_group;
        let busy = d.len().div_ceil(m);
        let threads = self.cfg.groups.min(busy).min(hardware_threads());
        for_each_unit(out, m, threads, |_, range, slice| {
            let mut group = self.group(&mut NoProbe);
            for (k, slot) in slice.iter_mut().enumerate() {
                *slot = group.classify(d.record(range.start + k), &mut NoProbe);
            }
        });
        Ok(())
    }

    pub(crate) fn check_dataset(&self, d: &Dataset) -> Result<()> {
        check_arity(self.tree, d)?;
        if self.variant == Variant::OneLanePerNode && !d.is_empty() && d.arity() == 0 {
            return Err(Error::argument(
                "leaf lanes read attribute 0, which zero-arity records lack",
            ));
        }
        self.cfg.validate_records(d.len())
    }

    /// Runs one record through a fresh group and reports what happened.
    pub fn trace(&self, record: &[f32]) -> RecordTrace {
        let mut probe = TraceProbe::new(self.cfg.group_lanes);
        let mut group = self.group(&mut probe);
        let init_barriers = probe.barriers;
        probe.writes.clear();
        probe.barriers = 0;
        let class = group.classify(record, &mut probe);
        RecordTrace {
            class,
            doubling_steps: probe.steps_to_resolve.unwrap_or(probe.steps),
            iterations: probe.iterations,
            barriers: probe.barriers,
            init_barriers,
            uniform_guards: probe.uniform,
            node_writes: probe.writes,
            path: group.path.clone(),
            scratch: group.scratch,
        }
    }

    /// A record group with its path array initialized.
    pub(crate) fn group<P: Probe>(&self, probe: &mut P) -> RecordGroup<'_> {
        RecordGroup::new(self, probe)
    }
}

/// What a single record did inside a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordTrace {
    pub class: u32,
    /// Single doubling steps applied until `path[0]` first named a leaf.
    pub doubling_steps: u32,
    /// Passes through the reduction loop.
    pub iterations: u32,
    /// Barriers executed for this record.
    pub barriers: u32,
    /// Barriers spent on the one-time leaf initialization of the group.
    pub init_barriers: u32,
    /// Whether every lane saw the same loop-guard value at every check.
    pub uniform_guards: bool,
    /// `(lane, node)` for each node-evaluation write; `None` is the idle
    /// lanes' scratch slot.
    pub node_writes: Vec<(usize, Option<u32>)>,
    /// Path array after the record resolved.
    pub path: Vec<u32>,
    /// Last value an idle lane stored in the group's scratch slot.
    pub scratch: u32,
}

/// Observation hooks for instrumentation. All default to no-ops.
pub(crate) trait Probe {
    /// Whether [`Probe::lane_guard`] wants one call per lane per check.
    const OBSERVES_LANES: bool = false;

    fn node_write(&mut self, _lane: usize, _node: Option<u32>) {}
    fn barrier(&mut self) {}
    fn lane_guard(&mut self, _lane: usize, _keep_reducing: bool) {}
    fn doubling_step(&mut self, _root_resolved: bool) {}
    fn iteration(&mut self) {}
}

pub(crate) struct NoProbe;

impl Probe for NoProbe {}

struct TraceProbe {
    lanes: usize,
    barriers: u32,
    iterations: u32,
    steps: u32,
    steps_to_resolve: Option<u32>,
    uniform: bool,
    check: Vec<bool>,
    writes: Vec<(usize, Option<u32>)>,
}

impl TraceProbe {
    fn new(lanes: usize) -> Self {
        TraceProbe {
            lanes,
            barriers: 0,
            iterations: 0,
            steps: 0,
            steps_to_resolve: None,
            uniform: true,
            check: Vec::with_capacity(lanes),
            writes: Vec::new(),
        }
    }
}

impl Probe for TraceProbe {
    const OBSERVES_LANES: bool = true;

    fn node_write(&mut self, lane: usize, node: Option<u32>) {
        self.writes.push((lane, node));
    }

    fn barrier(&mut self) {
        self.barriers += 1;
    }

    fn lane_guard(&mut self, _lane: usize, keep_reducing: bool) {
        self.check.push(keep_reducing);
        if self.check.len() == self.lanes {
            if self.check.iter().any(|&g| g != self.check[0]) {
                self.uniform = false;
            }
            self.check.clear();
        }
    }

    fn doubling_step(&mut self, root_resolved: bool) {
        self.steps += 1;
        if root_resolved && self.steps_to_resolve.is_none() {
            self.steps_to_resolve = Some(self.steps);
        }
    }

    fn iteration(&mut self) {
        self.iterations += 1;
    }
}

/// Per-group shared state: the path array plus the idle lanes' scratch slot.
pub(crate) struct RecordGroup<'e> {
    nodes: &'e [EncodedNode],
    lane_nodes: &'e [u32],
    lanes: usize,
    k: usize,
    mode: ReductionMode,
    path: Vec<u32>,
    staged: Vec<u32>,
    scratch: u32,
}

impl<'e> RecordGroup<'e> {
    fn new<P: Probe>(ev: &'e SpeculativeEvaluator<'_>, probe: &mut P) -> Self {
        let n = ev.tree.len();
        let lanes = ev.cfg.group_lanes;
        let mut path = vec![0u32; n];
        if ev.variant == Variant::DecisionLanes {
            // Lane r copies entries r, r+p, r+2p, ... of the static table.
            let leaf_paths = ev.leaf_paths.as_slice();
            for lane in 0..lanes {
                for j in (lane..n).step_by(lanes) {
                    path[j] = leaf_paths[j];
                }
            }
            probe.barrier();
        }
        RecordGroup {
            nodes: ev.tree.nodes(),
            lane_nodes: &ev.lane_nodes,
            lanes,
            k: ev.cfg.reductions_per_iteration,
            mode: ev.cfg.mode,
            path,
            staged: vec![0; ev.lane_nodes.len()],
            scratch: 0,
        }
    }

    #[inline]
    fn root_resolved(&self) -> bool {
        self.nodes[self.path[0] as usize].is_leaf()
    }

    /// Loop guard read by every lane after a barrier.
    #[inline]
    fn guard<P: Probe>(&self, probe: &mut P) -> bool {
        if P::OBSERVES_LANES {
            for lane in 0..self.lanes {
                let keep = self.nodes[self.path[0] as usize].class.is_none();
                probe.lane_guard(lane, keep);
            }
        }
        !self.root_resolved()
    }

    pub(crate) fn classify<P: Probe>(&mut self, record: &[f32], probe: &mut P) -> u32 {
        for (lane, &node) in self.lane_nodes.iter().enumerate() {
            self.path[node as usize] = self.nodes[node as usize].successor(record);
            probe.node_write(lane, Some(node));
        }
        for lane in self.lane_nodes.len()..self.lanes {
            self.scratch = lane as u32;
            probe.node_write(lane, None);
        }
        probe.barrier();

        while self.guard(probe) {
            match self.mode {
                ReductionMode::Doubling => {
                    for _ in 0..self.k {
                        self.double_step();
                        probe.barrier();
                        probe.doubling_step(self.root_resolved());
                    }
                }
                ReductionMode::Compound => {
                    self.compound_step();
                    probe.barrier();
                }
            }
            probe.iteration();
        }
        self.nodes[self.path[0] as usize]
            .class
            .expect("guard exits only on a leaf")
    }

    /// Lockstep `path[i] <- path[path[i]]` over every mapped lane: all reads
    /// land before any write.
    fn double_step(&mut self) {
        for (slot, &node) in self.staged.iter_mut().zip(self.lane_nodes) {
            *slot = self.path[self.path[node as usize] as usize];
        }
        for (&value, &node) in self.staged.iter().zip(self.lane_nodes) {
            self.path[node as usize] = value;
        }
    }

    fn compound_step(&mut self) {
        for &node in self.lane_nodes {
            let i = node as usize;
            self.path[i] = self.path[self.path[self.path[i] as usize] as usize];
        }
    }
}

/// Improved speculative evaluation: decision-node lanes only, leaf entries
/// initialized once per group, `k` reductions per loop iteration.
pub fn eval_speculative(
    tree: &EncodedTree,
    d: &Dataset,
    cfg: &SpeculativeConfig,
) -> Result<ClassAssignment> {
    SpeculativeEvaluator::new(tree, *cfg)?.run(d)
}

/// Basic speculative evaluation: one lane per node, `p = N`.
pub fn eval_speculative_basic(
    tree: &EncodedTree,
    d: &Dataset,
    cfg: &SpeculativeConfig,
) -> Result<ClassAssignment> {
    SpeculativeEvaluator::basic(tree, *cfg)?.run(d)
}

/// One synchronous doubling step over the entries in `mapped`: every listed
/// entry adopts its successor's successor, reading the pre-step array.
pub fn path_double_step(path: &[u32], mapped: &[u32]) -> Vec<u32> {
    let mut next = path.to_vec();
    for &i in mapped {
        next[i as usize] = path[path[i as usize] as usize];
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::serial::eval_serial;
    use crate::tree::encode_breadth_first;
    use crate::tree::fixtures::*;
    use crate::tree::LinkedNode;

    #[test]
    fn single_leaf_needs_no_reduction() {
        let tree = encode_breadth_first(&LinkedNode::leaf(5)).unwrap();
        let basic = SpeculativeEvaluator::basic(&tree, SpeculativeConfig::new(1, 1, 1)).unwrap();
        let t = basic.trace(&[0.0]);
        assert_eq!((t.class, t.iterations), (5, 0));
        let improved = SpeculativeEvaluator::new(&tree, SpeculativeConfig::new(1, 1, 1)).unwrap();
        let t = improved.trace(&[]);
        assert_eq!((t.class, t.iterations), (5, 0));
    }

    #[test]
    fn three_node_basic_trace() {
        let tree = encode_breadth_first(&three_node()).unwrap();
        let ev = SpeculativeEvaluator::basic(&tree, SpeculativeConfig::new(3, 1, 1)).unwrap();
        let t = ev.trace(&[0.6]);
        assert_eq!(t.path, vec![2, 1, 2]);
        assert_eq!(t.iterations, 0);
        assert_eq!(t.class, 9);
    }

    #[test]
    fn complete_tree_one_doubling() {
        let tree = encode_breadth_first(&complete_depth2()).unwrap();
        let ev =
            SpeculativeEvaluator::basic(&tree, SpeculativeConfig::new(7, 1, 1).with_reductions(1))
                .unwrap();
        // 0.9 goes right twice: 0 -> 2 -> 6.
        let t = ev.trace(&[0.9]);
        assert_eq!(t.doubling_steps, 1);
        assert_eq!(t.iterations, 1);
        assert_eq!(t.path[0], 6);
        assert_eq!(t.class, 3);
    }

    #[test]
    fn double_step_on_chain() {
        let path = vec![1, 2, 3, 3];
        let mapped = [0, 1, 2];
        let one = path_double_step(&path, &mapped);
        assert_eq!(one, vec![2, 3, 3, 3]);
        let two = path_double_step(&one, &mapped);
        assert_eq!(two, vec![3, 3, 3, 3]);
        assert_eq!(path_double_step(&two, &mapped), two);
    }

    #[test]
    fn phantom_lanes_write_scratch_only() {
        let tree = encode_breadth_first(&complete_depth2()).unwrap();
        let ev = SpeculativeEvaluator::new(&tree, SpeculativeConfig::new(4, 1, 1)).unwrap();
        let t = ev.trace(&[0.3]);
        assert_eq!(
            t.node_writes,
            vec![(0, Some(0)), (1, Some(1)), (2, Some(2)), (3, None)]
        );
        assert!(t.uniform_guards);
        assert_eq!(t.class, 1);
    }

    #[test]
    fn geometry_errors() {
        let tree = encode_breadth_first(&complete_depth2()).unwrap();
        assert!(SpeculativeEvaluator::basic(&tree, SpeculativeConfig::new(6, 1, 1)).is_err());
        assert!(SpeculativeEvaluator::new(&tree, SpeculativeConfig::new(2, 1, 1)).is_err());
        assert!(SpeculativeEvaluator::new(
            &tree,
            SpeculativeConfig::new(3, 1, 1).with_reductions(0)
        )
        .is_err());
        let ev = SpeculativeEvaluator::new(&tree, SpeculativeConfig::new(3, 2, 2)).unwrap();
        let d = Dataset::new(1, vec![0.5; 5]).unwrap();
        assert!(ev.run(&d).is_err());
        let exact =
            SpeculativeEvaluator::new(&tree, SpeculativeConfig::new(3, 3, 2).exact()).unwrap();
        assert!(exact.run(&d).is_err());
    }

    #[test]
    fn both_variants_and_modes_match_serial() {
        let tree = encode_breadth_first(&complete_depth2()).unwrap();
        let d = Dataset::new(1, (0..97).map(|i| i as f32 / 97.0).collect()).unwrap();
        let want = eval_serial(&tree, &d).unwrap();
        for mode in [ReductionMode::Doubling, ReductionMode::Compound] {
            for k in 1..4 {
                let cfg = SpeculativeConfig::covering(3, 8, d.len())
                    .with_reductions(k)
                    .with_mode(mode);
                assert_eq!(eval_speculative(&tree, &d, &cfg).unwrap(), want);
                let cfg = SpeculativeConfig::one_lane_per_node(&tree, 5, d.len())
                    .with_reductions(k)
                    .with_mode(mode);
                assert_eq!(eval_speculative_basic(&tree, &d, &cfg).unwrap(), want);
            }
        }
    }

    #[test]
    fn half_warp_geometry() {
        let cfg = SpeculativeConfig::half_warp(65_536).exact();
        assert_eq!(
            (
                cfg.group_lanes,
                cfg.groups,
                cfg.records_per_group,
                cfg.reductions_per_iteration
            ),
            (16, 2048, 32, 2)
        );
        assert!(cfg.validate_records(65_536).is_ok());
    }
}

//! Strategy selection and launch geometry shared by verify, bench and
//! simulate.

use clap::{Args, ValueEnum};
use serde::Serialize;
use spectree::speculative::SpeculativeEvaluator;
use spectree::{
    eval_data_parallel_into, eval_serial_into, DataParallelConfig, Dataset, EncodedTree,
    ReductionMode, SpeculativeConfig,
};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Serial,
    Data,
    Spec,
    SpecBasic,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Serial,
        Strategy::Data,
        Strategy::Spec,
        Strategy::SpecBasic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Serial => "serial",
            Strategy::Data => "data",
            Strategy::Spec => "spec",
            Strategy::SpecBasic => "spec-basic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Doubling,
    Compound,
}

/// Launch geometry. Unset values fall back to the reference configuration:
/// one record per data-parallel worker, and speculative groups of 16 lanes
/// (or as many as the tree's decision nodes need) handling 32 records each.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Geometry {
    /// Data-parallel logical workers `P`.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Data-parallel records per worker `m`.
    #[arg(long)]
    pub chunk: Option<usize>,
    /// Speculative lanes per record group `p`.
    #[arg(long)]
    pub group_lanes: Option<usize>,
    /// Speculative records per group `m`.
    #[arg(long)]
    pub records_per_group: Option<usize>,
    /// Doubling steps per reduction-loop iteration `k`.
    #[arg(long, default_value_t = 2)]
    pub reductions_per_iter: usize,
    #[arg(long, value_enum, default_value = "doubling")]
    pub reduction_mode: Mode,
    /// Require the geometry to cover the records exactly.
    #[arg(long)]
    pub exact_fit: bool,
}

impl Geometry {
    pub fn data(&self, records: usize) -> DataParallelConfig {
        let cfg = match (self.workers, self.chunk) {
            (None, None) => DataParallelConfig::one_record_per_worker(records),
            (Some(w), None) => DataParallelConfig::balanced(w, records),
            (None, Some(c)) => DataParallelConfig::new(records.div_ceil(c.max(1)).max(1), c),
            (Some(w), Some(c)) => DataParallelConfig::new(w, c),
        };
        if self.exact_fit {
            cfg.exact()
        } else {
            cfg
        }
    }

    pub fn speculative(
        &self,
        tree: &EncodedTree,
        records: usize,
        basic: bool,
    ) -> SpeculativeConfig {
        let lanes = match self.group_lanes {
            Some(p) => p,
            None if basic => tree.len(),
            None => 16.max((tree.len() - 1) / 2),
        };
        let mode = match self.reduction_mode {
            Mode::Doubling => ReductionMode::Doubling,
            Mode::Compound => ReductionMode::Compound,
        };
        let cfg = SpeculativeConfig::covering(lanes, self.records_per_group.unwrap_or(32), records)
            .with_reductions(self.reductions_per_iter)
            .with_mode(mode);
        if self.exact_fit {
            cfg.exact()
        } else {
            cfg
        }
    }
}

/// A strategy bound to its tree with every auxiliary table built, ready to
/// evaluate into a caller buffer.
pub enum Staged<'t> {
    Serial(&'t EncodedTree),
    Data(&'t EncodedTree, DataParallelConfig),
    Spec(SpeculativeEvaluator<'t>),
}

impl<'t> Staged<'t> {
    /// Builds the evaluator and checks the geometry against `d`.
    pub fn new(
        strategy: Strategy,
        tree: &'t EncodedTree,
        d: &Dataset,
        geometry: &Geometry,
    ) -> CliResult<Self> {
        let staged = match strategy {
            Strategy::Serial => Staged::Serial(tree),
            Strategy::Data => {
                let cfg = geometry.data(d.len());
                cfg.validate(d.len())?;
                Staged::Data(tree, cfg)
            }
            Strategy::Spec => Staged::Spec(SpeculativeEvaluator::new(
                tree,
                geometry.speculative(tree, d.len(), false),
            )?),
            Strategy::SpecBasic => Staged::Spec(SpeculativeEvaluator::basic(
                tree,
                geometry.speculative(tree, d.len(), true),
            )?),
        };
        Ok(staged)
    }

    pub fn run_into(&self, d: &Dataset, out: &mut [u32]) -> CliResult<()> {
        match self {
            Staged::Serial(tree) => eval_serial_into(tree, d, out)?,
            Staged::Data(tree, cfg) => eval_data_parallel_into(tree, d, cfg, out)?,
            Staged::Spec(ev) => ev.run_into(d, out)?,
        }
        Ok(())
    }
}

/// Requested strategies in canonical order without repeats, or `default`.
pub fn select(requested: &[Strategy], default: &[Strategy]) -> Vec<Strategy> {
    let mut s = if requested.is_empty() {
        default.to_vec()
    } else {
        requested.to_vec()
    };
    s.sort();
    s.dedup();
    s
}

pub fn require_records(d: &Dataset) -> CliResult<()> {
    if d.is_empty() {
        return Err(CliError::Usage("dataset has no records".into()));
    }
    Ok(())
}

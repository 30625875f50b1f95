//! Closed-form run time, speedup and efficiency of the three evaluators.
//!
//! With `t_n = t_e + t_c` the time to evaluate one node and
//! `t_s(M) = sigma·M + gamma` the time to ship `M` records:
//!
//! ```text
//! serial        T2    = M·d_mu·(t_e + t_c)
//! data-parallel T3(P) = (M/P)·d_mu·(t_e + t_c) + t_i + t_s(M)
//! speculative   T5(P) = (M·p/P)·(t_e + log2(d_mu)·t_c) + t_i + t_s(M)
//! ```
//!
//! Speedups are `T2/T3`, `T2/T5`; efficiencies divide those by `P`. With
//! `t_e = t_c` and no overheads, speculative beats data-parallel exactly when
//! `p < 2·d_mu / (1 + log2 d_mu)`.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Record count `M`.
    pub records: f64,
    /// Total processors `P`.
    pub processors: f64,
    /// Lanes per record group `p`.
    pub group_lanes: f64,
    /// Average traversal depth `d_mu`.
    pub d_mu: f64,
    /// Attribute-vs-threshold evaluation time `t_e`.
    pub t_eval: f64,
    /// Class-vs-sentinel comparison time `t_c`.
    pub t_class: f64,
    /// Per-processor index computation time `t_i`.
    pub t_index: f64,
    /// Per-record transmission slope.
    pub sigma: f64,
    /// Transmission constant.
    pub gamma: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            records: 65_536.0,
            processors: 1.0,
            group_lanes: 1.0,
            d_mu: 1.0,
            t_eval: 1.0,
            t_class: 1.0,
            t_index: 0.0,
            sigma: 0.0,
            gamma: 0.0,
        }
    }
}

impl CostParams {
    /// Record groups `G = P / p`.
    pub fn groups(&self) -> f64 {
        self.processors / self.group_lanes
    }

    /// Node evaluation time `t_n = t_e + t_c`.
    pub fn t_node(&self) -> f64 {
        self.t_eval + self.t_class
    }

    /// Transmission time `t_s(M) = sigma·M + gamma`.
    pub fn t_transfer(&self) -> f64 {
        self.sigma * self.records + self.gamma
    }

    /// The simplified regime: index computation and the transmission
    /// constant treated as negligible (`t_i = gamma = 0`).
    pub fn asymptotic(self) -> Self {
        CostParams {
            t_index: 0.0,
            gamma: 0.0,
            ..self
        }
    }

    fn check(&self) -> Result<()> {
        let fields = [
            ("records", self.records),
            ("processors", self.processors),
            ("group_lanes", self.group_lanes),
            ("d_mu", self.d_mu),
            ("t_eval", self.t_eval),
            ("t_class", self.t_class),
            ("t_index", self.t_index),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
        ];
        for (name, v) in fields {
            if v.is_nan() || v < 0.0 {
                return Err(Error::argument(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn check_processors(&self) -> Result<()> {
        self.check()?;
        if self.processors.is_nan() || self.processors < 1.0 {
            return Err(Error::argument(format!(
                "processor count must be at least 1, got {}",
                self.processors
            )));
        }
        Ok(())
    }
}

pub fn t_serial(cp: &CostParams) -> Result<f64> {
    cp.check()?;
    Ok(cp.records * cp.d_mu * cp.t_node())
}

pub fn t_data(cp: &CostParams) -> Result<f64> {
    cp.check_processors()?;
    Ok(cp.records / cp.processors * cp.d_mu * cp.t_node() + cp.t_index + cp.t_transfer())
}

/// Needs `d_mu >= 1`. Between 1 and 2 the `log2 d_mu` term is below one
/// and the formula is still evaluated as written.
pub fn t_spec(cp: &CostParams) -> Result<f64> {
    cp.check_processors()?;
    if cp.d_mu.is_nan() || cp.d_mu < 1.0 {
        return Err(Error::argument(format!(
            "speculative cost needs d_mu >= 1, got {}",
            cp.d_mu
        )));
    }
    Ok(
        cp.records * cp.group_lanes / cp.processors * (cp.t_eval + cp.d_mu.log2() * cp.t_class)
            + cp.t_index
            + cp.t_transfer(),
    )
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den <= 0.0 {
        return Err(Error::argument(format!("{what}: zero denominator")));
    }
    Ok(num / den)
}

pub fn speedup_data(cp: &CostParams) -> Result<f64> {
    ratio(t_serial(cp)?, t_data(cp)?, "data-parallel speedup")
}

pub fn speedup_spec(cp: &CostParams) -> Result<f64> {
    ratio(t_serial(cp)?, t_spec(cp)?, "speculative speedup")
}

pub fn efficiency_data(cp: &CostParams) -> Result<f64> {
    Ok(speedup_data(cp)? / cp.processors)
}

pub fn efficiency_spec(cp: &CostParams) -> Result<f64> {
    Ok(speedup_spec(cp)? / cp.processors)
}

/// Largest group size for which speculative evaluation still outruns data
/// decomposition when node evaluation and class comparison cost the same:
/// `2·d_mu / (1 + log2 d_mu)`.
pub fn crossover_p_bound(d_mu: f64) -> Result<f64> {
    if d_mu.is_nan() || d_mu < 1.0 {
        return Err(Error::argument(format!(
            "crossover bound needs d_mu >= 1, got {d_mu}"
        )));
    }
    Ok(2.0 * d_mu / (1.0 + d_mu.log2()))
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::argument(
            "slope fit needs at least two paired points",
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    ratio(sxy, sxx, "slope fit")
}

/// Candidate values per parameter; the sweep visits their Cartesian product.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRanges {
    pub records: Vec<f64>,
    pub processors: Vec<f64>,
    pub group_lanes: Vec<f64>,
    pub d_mu: Vec<f64>,
    pub t_eval: Vec<f64>,
    pub t_class: Vec<f64>,
    pub t_index: Vec<f64>,
    pub sigma: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Apply [`CostParams::asymptotic`] to every point.
    pub asymptotic: bool,
}

impl SweepRanges {
    /// A single point.
    pub fn point(cp: &CostParams) -> Self {
        SweepRanges {
            records: vec![cp.records],
            processors: vec![cp.processors],
            group_lanes: vec![cp.group_lanes],
            d_mu: vec![cp.d_mu],
            t_eval: vec![cp.t_eval],
            t_class: vec![cp.t_class],
            t_index: vec![cp.t_index],
            sigma: vec![cp.sigma],
            gamma: vec![cp.gamma],
            asymptotic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub params: CostParams,
    pub t_serial: f64,
    pub t_data: f64,
    pub t_spec: Option<f64>,
    pub speedup_data: f64,
    pub speedup_spec: Option<f64>,
    pub efficiency_data: f64,
    pub efficiency_spec: Option<f64>,
    pub p_bound: Option<f64>,
}

pub const SWEEP_COLUMNS: [&str; 19] = [
    "M",
    "P",
    "p",
    "G",
    "d_mu",
    "t_e",
    "t_c",
    "t_i",
    "sigma",
    "gamma",
    "t_serial",
    "t_data",
    "t_spec",
    "speedup_data",
    "speedup_spec",
    "efficiency_data",
    "efficiency_spec",
    "p_bound",
    "spec_faster",
];

pub fn sweep(ranges: &SweepRanges) -> Result<Vec<SweepRow>> {
    let axes: [(&str, &Vec<f64>); 9] = [
        ("records", &ranges.records),
        ("processors", &ranges.processors),
        ("group_lanes", &ranges.group_lanes),
        ("d_mu", &ranges.d_mu),
        ("t_eval", &ranges.t_eval),
        ("t_class", &ranges.t_class),
        ("t_index", &ranges.t_index),
        ("sigma", &ranges.sigma),
        ("gamma", &ranges.gamma),
    ];
    for (name, values) in axes {
        if values.is_empty() {
            return Err(Error::argument(format!("empty sweep range for {name}")));
        }
    }

    let mut rows = Vec::new();
    for &records in &ranges.records {
        for &processors in &ranges.processors {
            for &group_lanes in &ranges.group_lanes {
                for &d_mu in &ranges.d_mu {
                    for &t_eval in &ranges.t_eval {
                        for &t_class in &ranges.t_class {
                            for &t_index in &ranges.t_index {
                                for &sigma in &ranges.sigma {
                                    for &gamma in &ranges.gamma {
                                        let mut cp = CostParams {
                                            records,
                                            processors,
                                            group_lanes,
                                            d_mu,
                                            t_eval,
                                            t_class,
                                            t_index,
                                            sigma,
                                            gamma,
                                        };
                                        if ranges.asymptotic {
                                            cp = cp.asymptotic();
                                        }
                                        rows.push(evaluate(&cp)?);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn evaluate(cp: &CostParams) -> Result<SweepRow> {
    let t_spec = t_spec(cp).ok();
    Ok(SweepRow {
        params: *cp,
        t_serial: t_serial(cp)?,
        t_data: t_data(cp)?,
        t_spec,
        speedup_data: speedup_data(cp)?,
        speedup_spec: speedup_spec(cp).ok(),
        efficiency_data: efficiency_data(cp)?,
        efficiency_spec: efficiency_spec(cp).ok(),
        p_bound: crossover_p_bound(cp.d_mu).ok(),
    })
}

/// Writes the header and one row per point. Numbers use Rust's shortest
/// round-trip formatting; undefined values are left empty.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut sink: W) -> Result<()> {
    writeln!(sink, "{}", SWEEP_COLUMNS.join(","))?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let p = &r.params;
        let faster = match (r.speedup_spec, r.speedup_data) {
            (Some(s), d) => (s > d).to_string(),
            (None, _) => String::new(),
        };
        let cells = [
            p.records.to_string(),
            p.processors.to_string(),
            p.group_lanes.to_string(),
            p.groups().to_string(),
            p.d_mu.to_string(),
            p.t_eval.to_string(),
            p.t_class.to_string(),
            p.t_index.to_string(),
            p.sigma.to_string(),
            p.gamma.to_string(),
            r.t_serial.to_string(),
            r.t_data.to_string(),
            opt(r.t_spec),
            r.speedup_data.to_string(),
            opt(r.speedup_spec),
            r.efficiency_data.to_string(),
            opt(r.efficiency_spec),
            opt(r.p_bound),
            faster,
        ];
        writeln!(sink, "{}", cells.join(","))?;
    }
    sink.flush()?;
    Ok(())
}

use std::io::{BufReader, Write};

use serde_json::json;
use spectree::cost::{sweep, write_sweep_csv, SweepRanges};
use spectree::data::{
    generate_synthetic_dataset, generate_synthetic_tree, load_linked_json, reference_fixture,
    save_assignments, save_dataset_csv, save_linked_json, save_tree_json, shuffle_records,
    Distribution, LeafThresholdStyle, TreeShape, REFERENCE_BASE_RECORDS, REFERENCE_TILE_FACTOR,
};
use spectree::warp::{
    compare, simulate_data_parallel, simulate_speculative, simulate_speculative_basic, ExecMetrics,
    WarpConfig,
};
use spectree::{
    encode_breadth_first, eval_serial, ClassAssignment, Dataset, EncodedTree, LinkedNode,
};

use crate::bench::{render_csv, render_table, run_bench, BenchOptions};
use crate::geometry::{require_records, select, Staged, Strategy};
use crate::{
    create, open, read_dataset, read_tree, BenchArgs, CliError, CliResult, Command, CostArgs,
    EncodeArgs, Format, GenArgs, LeafStyle, SimulateArgs, VerifyArgs,
};

pub(crate) fn dispatch(command: Command, out: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Encode(a) => encode(a, out),
        Command::Gen(a) => gen(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Bench(a) => bench(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Cost(a) => cost(a, out),
    }
}

fn write_tree(
    tree: &EncodedTree,
    path: &std::path::Path,
    style: LeafThresholdStyle,
) -> CliResult<()> {
    save_tree_json(tree, create(path)?, style)?;
    Ok(())
}

fn encode(a: EncodeArgs, out: &mut dyn Write) -> CliResult<()> {
    let root =
        load_linked_json(BufReader::new(open(&a.input)?)).map_err(|source| CliError::Input {
            path: a.input.clone(),
            source,
        })?;
    let tree = encode_breadth_first(&root)?;
    let style = match a.leaf_threshold {
        LeafStyle::NegInf => LeafThresholdStyle::NegativeInfinity,
        LeafStyle::PosInf => LeafThresholdStyle::PositiveInfinity,
    };
    write_tree(&tree, &a.output, style)?;
    let st = tree.stats();
    writeln!(
        out,
        "nodes {} leaves {} depth {}",
        st.nodes, st.leaves, st.depth
    )?;
    Ok(())
}

fn gen(a: GenArgs, out: &mut dyn Write) -> CliResult<()> {
    let (linked, tree, mut data): (LinkedNode, EncodedTree, Dataset) = if a.like_paper {
        let f = reference_fixture(a.seed)?;
        (f.linked, f.tree, f.dataset)
    } else {
        let shape = TreeShape {
            depth: a.depth,
            leaves: a.leaves,
            attributes: a.attributes,
            classes: a.classes,
        };
        let linked = generate_synthetic_tree(&shape, a.seed)?;
        let tree = encode_breadth_first(&linked)?;
        let arity = a.attributes.max(tree.required_arity());
        let dist = if a.uniform {
            Distribution::default()
        } else {
            Distribution::LeafTargeted(&tree)
        };
        let data = generate_synthetic_dataset(a.records, arity, a.seed.wrapping_add(1), dist)?;
        (linked, tree, data)
    };
    if let Some(seed) = a.shuffle {
        data = shuffle_records(&data, seed);
    }
    write_tree(&tree, &a.tree_out, LeafThresholdStyle::default())?;
    save_dataset_csv(&data, create(&a.data_out)?)?;
    if let Some(path) = &a.linked_out {
        save_linked_json(&linked, create(path)?)?;
    }
    let st = tree.stats();
    writeln!(
        out,
        "tree: nodes {} leaves {} depth {}",
        st.nodes, st.leaves, st.depth
    )?;
    writeln!(
        out,
        "dataset: {} records x {} attributes",
        data.len(),
        data.arity()
    )?;
    if a.like_paper {
        writeln!(
            out,
            "({REFERENCE_BASE_RECORDS} base records tiled {REFERENCE_TILE_FACTOR} times)"
        )?;
    }
    Ok(())
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let tree = read_tree(&a.input.tree)?;
    let data = read_dataset(&a.input.data)?;
    let strategies = select(&a.strategy, &Strategy::ALL);
    if let Some(i) = a.inject_mismatch {
        if i >= data.len() {
            return Err(CliError::Usage(format!(
                "cannot corrupt record {i} of {}",
                data.len()
            )));
        }
    }

    let expected = eval_serial(&tree, &data)?;
    let mut results = Vec::new();
    for &s in &strategies {
        let staged = Staged::new(s, &tree, &data, &a.geometry)?;
        let mut buf = vec![0u32; data.len()];
        staged.run_into(&data, &mut buf)?;
        results.push((s, buf));
    }
    if let Some(i) = a.inject_mismatch {
        let pos = results
            .iter()
            .position(|(s, _)| *s != Strategy::Serial)
            .unwrap_or(0);
        if let Some((_, buf)) = results.get_mut(pos) {
            buf[i] = buf[i].wrapping_add(1);
        }
    }

    let mut total = 0;
    for (s, buf) in &results {
        let got = ClassAssignment::from(buf.clone());
        let n = got.mismatch_count(&expected);
        total += n;
        match got.first_mismatch(&expected) {
            None => writeln!(out, "{}: 0 mismatches", s.name())?,
            Some(i) => writeln!(
                out,
                "{}: {n} mismatches, first at record {i} (expected {}, got {})",
                s.name(),
                expected.as_slice()[i],
                got.as_slice()[i]
            )?,
        }
        if let Some(dir) = &a.assignments_dir {
            std::fs::create_dir_all(dir)?;
            save_assignments(&got, create(&dir.join(format!("{}.txt", s.name())))?)?;
        }
    }
    writeln!(out, "{} records, {total} mismatches", data.len())?;
    if total > 0 {
        return Err(CliError::Mismatch(total));
    }
    Ok(())
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    let tree = read_tree(&a.input.tree)?;
    let data = read_dataset(&a.input.data)?;
    require_records(&data)?;
    let strategies = select(&a.strategy, &Strategy::ALL);
    let report = run_bench(
        &tree,
        &data,
        &BenchOptions {
            strategies: &strategies,
            geometry: &a.geometry,
            iterations: a.iterations,
            warmup: a.warmup,
            verbose: a.verbose,
        },
    )?;
    match a.format {
        Format::Table => write!(out, "{}", render_table(&report))?,
        Format::Csv => write!(out, "{}", render_csv(&report))?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &report).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
    }
    if report.verification.as_ref().is_some_and(|v| !v.passed) {
        let n = report
            .verification
            .as_ref()
            .map_or(0, |v| v.mismatches.values().sum());
        return Err(CliError::Mismatch(n));
    }
    Ok(())
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> CliResult<()> {
    let tree = read_tree(&a.input.tree)?;
    let data = read_dataset(&a.input.data)?;
    let strategies = select(&a.strategy, &[Strategy::Data, Strategy::Spec]);
    if strategies.contains(&Strategy::Serial) {
        return Err(CliError::Usage(
            "the serial baseline has no lockstep kernel to simulate".into(),
        ));
    }
    let warp = WarpConfig {
        warp_width: a.warp_width,
        half_warp: !a.no_half_warp,
    };
    let expected = eval_serial(&tree, &data)?;
    let mut runs: Vec<(Strategy, ExecMetrics)> = Vec::new();
    for &s in &strategies {
        let sim = match s {
            Strategy::Data => {
                simulate_data_parallel(&tree, &data, &warp, &a.geometry.data(data.len()))?
            }
            Strategy::Spec => simulate_speculative(
                &tree,
                &data,
                &warp,
                &a.geometry.speculative(&tree, data.len(), false),
            )?,
            Strategy::SpecBasic => simulate_speculative_basic(
                &tree,
                &data,
                &warp,
                &a.geometry.speculative(&tree, data.len(), true),
            )?,
            Strategy::Serial => unreachable!(),
        };
        if sim.assignment != expected {
            return Err(CliError::Mismatch(sim.assignment.mismatch_count(&expected)));
        }
        runs.push((s, sim.metrics));
    }

    match a.format {
        Format::Csv => {
            writeln!(out, "{}", ExecMetrics::csv_header())?;
            for (s, m) in &runs {
                writeln!(out, "{}", m.csv_row(s.name()))?;
            }
        }
        Format::Json => {
            let kernels: Vec<_> = runs
                .iter()
                .map(|(s, m)| json!({ "kernel": s.name(), "metrics": m }))
                .collect();
            let doc = json!({
                "version": 1,
                "warp_width": warp.warp_width,
                "half_warp": warp.half_warp,
                "records": data.len(),
                "kernels": kernels,
            });
            serde_json::to_writer_pretty(&mut *out, &doc).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
        Format::Table => {
            if let [(ls, lm), (rs, rm), ..] = runs.as_slice() {
                write!(out, "{}", compare(ls.name(), lm, rs.name(), rm))?;
            } else if let [(s, m)] = runs.as_slice() {
                writeln!(out, "{:<22} {:>16}", "counter", s.name())?;
                for (name, v) in ExecMetrics::COUNTERS.iter().zip(m.values()) {
                    writeln!(out, "{name:<22} {v:>16}")?;
                }
            }
        }
    }
    Ok(())
}

fn cost(a: CostArgs, out: &mut dyn Write) -> CliResult<()> {
    let ranges = SweepRanges {
        records: a.records.0,
        processors: a.processors.0,
        group_lanes: a.group_lanes.0,
        d_mu: a.d_mu.0,
        t_eval: a.t_eval.0,
        t_class: a.t_class.0,
        t_index: a.t_index.0,
        sigma: a.sigma.0,
        gamma: a.gamma.0,
        asymptotic: a.asymptotic,
    };
    let rows = sweep(&ranges)?;
    match a.format {
        Format::Csv => write_sweep_csv(&rows, &mut *out)?,
        Format::Json => {
            let docs: Vec<_> = rows
                .iter()
                .map(|r| {
                    let p = &r.params;
                    json!({
                        "M": p.records, "P": p.processors, "p": p.group_lanes, "G": p.groups(),
                        "d_mu": p.d_mu, "t_e": p.t_eval, "t_c": p.t_class, "t_i": p.t_index,
                        "sigma": p.sigma, "gamma": p.gamma,
                        "t_serial": r.t_serial, "t_data": r.t_data, "t_spec": r.t_spec,
                        "speedup_data": r.speedup_data, "speedup_spec": r.speedup_spec,
                        "efficiency_data": r.efficiency_data, "efficiency_spec": r.efficiency_spec,
                        "p_bound": r.p_bound,
                    })
                })
                .collect();
            serde_json::to_writer_pretty(&mut *out, &json!({ "version": 1, "rows": docs }))
                .map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
        Format::Table => {
            let mut csv = Vec::new();
            write_sweep_csv(&rows, &mut csv)?;
            let text = String::from_utf8_lossy(&csv);
            for line in text.lines() {
                let cells: Vec<String> = line.split(',').map(|c| format!("{c:>14}")).collect();
                writeln!(out, "{}", cells.join(""))?;
            }
        }
    }
    Ok(())
}

use spectree::cost::{
    crossover_p_bound, efficiency_data, least_squares_slope, speedup_data, speedup_spec, sweep,
    t_data, t_serial, t_spec, CostParams, SweepRanges,
};

fn ideal(d_mu: f64, p: f64, processors: f64) -> CostParams {
    CostParams {
        records: 65_536.0,
        processors,
        group_lanes: p,
        d_mu,
        ..CostParams::default()
    }
}

#[test]
fn speculative_wins_exactly_below_the_bound() {
    for d in 2..=64 {
        for p in 1..=64 {
            let cp = ideal(d as f64, p as f64, 1024.0);
            let s5 = speedup_spec(&cp).unwrap();
            let s3 = speedup_data(&cp).unwrap();
            let faster = s5 - s3 > 1e-9 * s3;
            let below = crossover_p_bound(d as f64).unwrap() - p as f64 > 1e-9;
            assert_eq!(faster, below, "d_mu {d}, p {p}");
        }
    }
}

#[test]
fn ideal_data_speedup_is_linear() {
    for processors in [1.0, 2.0, 7.0, 64.0, 1000.0] {
        for d in [1.0, 3.5, 11.0] {
            let cp = ideal(d, 1.0, processors);
            assert!((speedup_data(&cp).unwrap() - processors).abs() <= 1e-12 * processors);
            assert!((efficiency_data(&cp).unwrap() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn formulas_move_the_right_way() {
    let grid = [0.0, 0.5, 1.0, 2.0, 10.0, 1e3];
    let base = CostParams {
        processors: 64.0,
        group_lanes: 16.0,
        d_mu: 8.0,
        ..CostParams::default()
    };
    let nonincreasing = |xs: &[f64]| xs.windows(2).all(|w| w[1] <= w[0]);
    let nondecreasing = |xs: &[f64]| xs.windows(2).all(|w| w[1] >= w[0]);

    let s3: Vec<f64> = grid
        .iter()
        .map(|&sigma| speedup_data(&CostParams { sigma, ..base }).unwrap())
        .collect();
    assert!(nonincreasing(&s3));
    let s5: Vec<f64> = grid
        .iter()
        .map(|&gamma| speedup_spec(&CostParams { gamma, ..base }).unwrap())
        .collect();
    assert!(nonincreasing(&s5));
    let t3: Vec<f64> = grid
        .iter()
        .map(|&t_index| t_data(&CostParams { t_index, ..base }).unwrap())
        .collect();
    assert!(nondecreasing(&t3));

    let procs = [1.0, 2.0, 4.0, 64.0, 4096.0];
    let t3p: Vec<f64> = procs
        .iter()
        .map(|&processors| t_data(&CostParams { processors, ..base }).unwrap())
        .collect();
    assert!(nonincreasing(&t3p));
    let t5p: Vec<f64> = procs
        .iter()
        .map(|&processors| t_spec(&CostParams { processors, ..base }).unwrap())
        .collect();
    assert!(nonincreasing(&t5p));

    let depths = [1.0, 2.0, 8.0, 11.0, 64.0];
    let t2: Vec<f64> = depths
        .iter()
        .map(|&d_mu| t_serial(&CostParams { d_mu, ..base }).unwrap())
        .collect();
    assert!(nondecreasing(&t2));
    let t5: Vec<f64> = depths
        .iter()
        .map(|&d_mu| t_spec(&CostParams { d_mu, ..base }).unwrap())
        .collect();
    assert!(nondecreasing(&t5));
}

#[test]
fn bound_slope_over_moderate_depths() {
    let xs: Vec<f64> = (8..=64).map(f64::from).collect();
    let ys: Vec<f64> = xs.iter().map(|&d| crossover_p_bound(d).unwrap()).collect();
    let slope = least_squares_slope(&xs, &ys).unwrap();
    assert!((slope - 1.0 / 3.0).abs() <= 0.15, "slope {slope}");
}

#[test]
fn sweep_is_the_cartesian_product() {
    let mut ranges = SweepRanges::point(&CostParams::default());
    ranges.processors = vec![1.0, 2.0, 4.0];
    ranges.d_mu = vec![2.0, 8.0];
    ranges.group_lanes = vec![1.0, 2.0];
    let rows = sweep(&ranges).unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows
        .iter()
        .all(|r| r.t_spec.is_some() && r.p_bound.is_some()));
}

use impute_core::data::{apply_mask, ColumnKind, ImputedDataset, IncompleteDataset, Mask, Schema};
use impute_core::engine::{
    run_ablation, run_hyperimpute, run_hyperimpute_from, AblationSetting, EngineConfig, RunOptions, StopReason,
};
use impute_core::harness::synth::{make_synth, SynthKind};
use impute_core::learners::{LearnerClass, CATALOGUE};
use impute_core::metrics::rmse_missing;
use impute_core::search::SearchStrategy;
use impute_core::seed;
use impute_core::simulate::{simulate_mcar, Mechanism, MissingnessSpec};
use ndarray::{Array2, Axis};
use proptest::prelude::*;

fn quick_config() -> EngineConfig {
    EngineConfig {
        strategy: SearchStrategy::Hyperband { eta: 3, max_resource: 9 },
        ..EngineConfig::default()
    }
}

fn naive_config() -> EngineConfig {
    EngineConfig {
        strategy: SearchStrategy::Naive,
        ..EngineConfig::default()
    }
}

/// Masks only column `col` of `x` with MCAR at `rate`.
fn mask_column(x: &Array2<f64>, col: usize, rate: f64, s: u64) -> Mask {
    let full = simulate_mcar(x.view(), rate, s).unwrap();
    let mut bits = Array2::from_elem(x.dim(), true);
    for i in 0..x.nrows() {
        bits[[i, col]] = full.is_observed(i, col);
    }
    Mask::new(bits)
}

#[test]
fn nothing_missing_returns_the_input() {
    let (x, schema) = make_synth(SynthKind::Linear, 30, 0, 1);
    let ds = apply_mask(&x, &Mask::all_observed(30, 2), Some(schema)).unwrap();
    let out = run_hyperimpute(&ds, &quick_config(), 1).unwrap();
    assert_eq!(out.imputed.values(), x.view());
    assert_eq!(out.trace.records.len(), 1);
    assert_eq!(out.trace.records[0].iteration, 0);
    assert_eq!(out.trace.stop, Some(StopReason::NothingMissing));
    assert!(out.log.entries.is_empty());
}

#[test]
fn single_hole_on_a_line_is_recovered() {
    let x = Array2::from_shape_fn((40, 2), |(i, j)| {
        let v = (i as f64 * 0.37).cos() * 3.0 + i as f64 * 0.05;
        if j == 0 { v } else { 2.0 * v }
    });
    let mut bits = Array2::from_elem((40, 2), true);
    bits[[17, 1]] = false;
    let ds = apply_mask(&x, &Mask::new(bits), None).unwrap();
    let out = run_hyperimpute(&ds, &quick_config(), 3).unwrap();
    assert!(out.trace.iterations() >= 1);
    // After two iterations at most, the value must already be right.
    let cfg2 = EngineConfig {
        max_outer_iters: 2,
        ..quick_config()
    };
    let two = run_hyperimpute(&ds, &cfg2, 3).unwrap();
    let want = 2.0 * x[[17, 0]];
    assert!((two.imputed.values()[[17, 1]] - want).abs() < 1e-3, "{} vs {want}", two.imputed.values()[[17, 1]]);
    assert!((out.imputed.values()[[17, 1]] - want).abs() < 1e-3);
}

#[test]
fn runs_are_deterministic() {
    let (x, schema) = make_synth(SynthKind::MixedSignal, 200, 0, 4);
    let mask = impute_core::simulate::simulate(x.view(), &MissingnessSpec::new(Mechanism::Mar, 0.3, 4)).unwrap();
    let ds = apply_mask(&x, &mask, Some(schema)).unwrap();
    let a = run_hyperimpute(&ds, &quick_config(), 9).unwrap();
    let b = run_hyperimpute(&ds, &quick_config(), 9).unwrap();
    assert_eq!(a.imputed, b.imputed);
    assert_eq!(a.log, b.log);
    assert_eq!(a.stats, b.stats);
    let strip = |t: &impute_core::engine::ConvergenceTrace| {
        t.records.iter().map(|r| (r.objective, r.max_norm_change)).collect::<Vec<_>>()
    };
    assert_eq!(strip(&a.trace), strip(&b.trace));
}

#[test]
fn improves_on_mean_fill_for_a_noisy_line() {
    let mut wins = 0;
    for s in 0..10u64 {
        let (x, schema) = make_synth(SynthKind::Linear, 300, 0, seed::derive(5, &[s]));
        let mask = mask_column(&x, 1, 0.3, s);
        let ds = apply_mask(&x, &mask, Some(schema)).unwrap();
        let out = run_hyperimpute(&ds, &quick_config(), s).unwrap();
        let mean = impute_core::engine::baseline_impute(&ds).unwrap();
        let ours = rmse_missing(out.imputed.values(), x.view(), &mask).unwrap();
        let base = rmse_missing(mean.values(), x.view(), &mask).unwrap();
        wins += usize::from(ours < 0.5 * base);
    }
    assert!(wins >= 9, "{wins}/10");
}

#[test]
fn warm_start_from_a_converged_output_is_a_fixed_point() {
    let (x, schema) = make_synth(SynthKind::Linear, 200, 0, 6);
    let mask = mask_column(&x, 1, 0.3, 6);
    let ds = apply_mask(&x, &mask, Some(schema)).unwrap();
    let cfg = quick_config();
    let first = run_hyperimpute(&ds, &cfg, 2).unwrap();
    assert_eq!(first.trace.stop, Some(StopReason::Converged), "{:?}", first.trace);
    let again = run_hyperimpute_from(&ds, &first.imputed, &EngineConfig { max_outer_iters: 1, ..cfg.clone() }, 2).unwrap();
    let change = again.trace.records[1].max_norm_change.unwrap();
    assert!(change <= cfg.tol_imp, "{change}");
}

#[test]
fn ice_fixed_uses_only_its_class_everywhere() {
    let (x, schema) = make_synth(SynthKind::Gaussian { rho: 0.5 }, 150, 4, 7);
    let mask = simulate_mcar(x.view(), 0.2, 7).unwrap();
    let ds = apply_mask(&x, &mask, Some(schema)).unwrap();
    let out = run_ablation(
        &ds,
        AblationSetting::IceFixed(LearnerClass::LinearRidge),
        &EngineConfig::default(),
        1,
        RunOptions::default(),
    )
    .unwrap();
    assert!(out.log.entries.iter().all(|e| e.class == LearnerClass::LinearRidge && !e.searched));
    let missing = mask.columns_with_missing();
    for it in 1..=out.trace.iterations() {
        let cols: Vec<usize> = out.log.entries.iter().filter(|e| e.iteration == it).map(|e| e.column).collect();
        assert_eq!(cols, missing);
    }
    assert_eq!(out.stats.searches, 0);
}

#[test]
fn wo_adaptivity_searches_only_in_the_first_iteration() {
    let (x, schema) = make_synth(SynthKind::Gaussian { rho: 0.6 }, 150, 4, 8);
    let mask = simulate_mcar(x.view(), 0.2, 8).unwrap();
    let ds = apply_mask(&x, &mask, Some(schema)).unwrap();
    let cfg = EngineConfig {
        tol_imp: 1e-9,
        max_outer_iters: 3,
        ..naive_config()
    };
    let out = run_ablation(&ds, AblationSetting::WoAdaptivity, &cfg, 1, RunOptions::default()).unwrap();
    assert!(out.trace.iterations() >= 2);
    for e in &out.log.entries {
        assert_eq!(e.searched, e.iteration == 1, "{e:?}");
    }
}

#[test]
fn naive_fit_count_is_iterations_times_columns_times_catalogue_plus_one() {
    let (x, schema) = make_synth(SynthKind::Gaussian { rho: 0.5 }, 120, 5, 9);
    let mask = simulate_mcar(x.view(), 0.2, 9).unwrap();
    let ds = apply_mask(&x, &mask, Some(schema)).unwrap();
    let out = run_hyperimpute(&ds, &naive_config(), 1).unwrap();
    let k = out.trace.iterations();
    let d_miss = mask.columns_with_missing().len();
    assert!(out.log.entries.iter().all(|e| !e.fallback));
    assert_eq!(out.stats.fits(), k * d_miss * (CATALOGUE.len() + 1));
    assert_eq!(out.stats.searches, k * d_miss);
    assert!(out.stats.searches <= k * ds.n_cols());
}

#[test]
fn degenerate_column_falls_back_to_a_constant() {
    // Column 1 is constant on its observed rows.
    let x = Array2::from_shape_fn((30, 3), |(i, j)| match j {
        0 => i as f64,
        1 => 4.0,
        _ => (i as f64).sqrt(),
    });
    let mask = mask_column(&x, 1, 0.4, 2);
    let ds = apply_mask(&x, &mask, None).unwrap();
    let out = run_hyperimpute(&ds, &naive_config(), 1).unwrap();
    assert!(out.log.entries.iter().all(|e| e.fallback));
    for (i, row) in out.imputed.values().axis_iter(Axis(0)).enumerate() {
        assert_eq!(row[1], 4.0, "row {i}");
    }
}

fn arb_dataset() -> impl Strategy<Value = (IncompleteDataset, Array2<f64>)> {
    (8usize..30, 2usize..5, any::<u64>(), 0.05f64..0.6).prop_map(|(n, d, s, rate)| {
        let mut rng = seed::rng(s);
        use rand::Rng;
        let mut x = Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0));
        let mut kinds = vec![ColumnKind::Continuous; d];
        if d > 2 {
            kinds[d - 1] = ColumnKind::Categorical { cardinality: 3 };
            for i in 0..n {
                x[[i, d - 1]] = f64::from(rng.random_range(1u8..=3));
            }
        }
        let mut bits = Array2::from_shape_fn((n, d), |_| rng.random::<f64>() >= rate);
        for j in 0..d {
            bits[[j % n, j]] = true;
        }
        let ds = IncompleteDataset::new(x.clone(), Mask::new(bits), Schema::with_kinds(kinds)).unwrap();
        (ds, x)
    })
}

fn preserves(ds: &IncompleteDataset, out: &ImputedDataset) -> bool {
    (0..ds.n_rows()).all(|i| {
        (0..ds.n_cols()).all(|j| match ds.get(i, j) {
            Some(v) => out.values()[[i, j]].to_bits() == v.to_bits(),
            None => out.values()[[i, j]].is_finite(),
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn observed_cells_are_never_touched((ds, _x) in arb_dataset(), s in any::<u64>()) {
        let cfg = EngineConfig { max_outer_iters: 2, ..naive_config() };
        for setting in [AblationSetting::Full, AblationSetting::GlobalSearch, AblationSetting::IceFixed(LearnerClass::Knn)] {
            let out = run_ablation(&ds, setting, &cfg, s, RunOptions::default()).unwrap();
            prop_assert!(preserves(&ds, &out.imputed));
            let k = out.trace.iterations();
            prop_assert_eq!(out.trace.records.len(), k + 1);
        }
    }
}

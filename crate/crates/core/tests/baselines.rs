use impute_core::baselines::{impute_ice_linear, impute_iterative_forest, impute_knn, impute_mean, impute_softimpute};
use impute_core::data::{apply_mask, Mask};
use impute_core::harness::synth::{make_synth, SynthKind};
use impute_core::simulate::simulate_mcar;
use ndarray::Array2;

mod common;
use common::rank_one;

#[test]
fn ice_linear_recovers_a_collinear_hole() {
    let x = Array2::from_shape_fn((25, 2), |(i, j)| {
        let v = i as f64 * 4.0 - 50.0;
        if j == 0 { v } else { -1.5 * v + 2.0 }
    });
    let mut bits = Array2::from_elem((25, 2), true);
    bits[[9, 1]] = false;
    let ds = apply_mask(&x, &Mask::new(bits), None).unwrap();
    let out = impute_ice_linear(&ds, 10, 1e-3, 1).unwrap();
    // Oracle: one-regressor ridge with unit penalty on the 24 observed rows,
    // slope Sxy / (Sxx + 1) about the means.
    let rows: Vec<usize> = (0..25).filter(|&i| i != 9).collect();
    let mx = rows.iter().map(|&i| x[[i, 0]]).sum::<f64>() / 24.0;
    let my = rows.iter().map(|&i| x[[i, 1]]).sum::<f64>() / 24.0;
    let sxx: f64 = rows.iter().map(|&i| (x[[i, 0]] - mx).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|&i| (x[[i, 0]] - mx) * (x[[i, 1]] - my)).sum();
    let want = my + sxy / (sxx + 1.0) * (x[[9, 0]] - mx);
    let got = out.values()[[9, 1]];
    assert!((got - want).abs() < 1e-9, "{got} vs ridge {want}");
    assert!((got - x[[9, 1]]).abs() < 1e-3, "{got} vs {}", x[[9, 1]]);
}

#[test]
fn complete_data_passes_through_every_baseline() {
    let (x, schema) = make_synth(SynthKind::Gaussian { rho: 0.3 }, 40, 3, 2);
    let ds = apply_mask(&x, &Mask::all_observed(40, 3), Some(schema)).unwrap();
    assert_eq!(impute_mean(&ds).unwrap().values(), x.view());
    assert_eq!(impute_ice_linear(&ds, 5, 1e-3, 1).unwrap().values(), x.view());
    assert_eq!(impute_iterative_forest(&ds, 5, 1e-3, 1).unwrap().values(), x.view());
    assert_eq!(impute_knn(&ds, 3).unwrap().values(), x.view());
    let soft = impute_softimpute(&ds, 0.1, 50, 1e-6).unwrap();
    assert_eq!(soft.imputed.values(), x.view());
}

#[test]
fn forest_learns_a_step_function() {
    let (x, schema) = make_synth(SynthKind::Nonlinear, 2000, 0, 3);
    let full = simulate_mcar(x.view(), 0.2, 3).unwrap();
    let mut bits = Array2::from_elem(x.dim(), true);
    for i in 0..x.nrows() {
        bits[[i, 1]] = full.is_observed(i, 1);
    }
    let mask = Mask::new(bits);
    let ds = apply_mask(&x, &mask, Some(schema)).unwrap();
    let a = impute_iterative_forest(&ds, 10, 1e-3, 5).unwrap();
    let b = impute_iterative_forest(&ds, 10, 1e-3, 5).unwrap();
    assert_eq!(a, b);
    let rows: Vec<usize> = (0..x.nrows()).filter(|&i| !mask.is_observed(i, 1)).collect();
    let correct = rows.iter().filter(|&&i| a.values()[[i, 1]].signum() == x[[i, 1]]).count();
    let acc = correct as f64 / rows.len() as f64;
    assert!(acc >= 0.95, "{acc}");
    for i in 0..x.nrows() {
        if mask.is_observed(i, 1) {
            assert_eq!(a.values()[[i, 1]].to_bits(), x[[i, 1]].to_bits());
        }
    }
}

#[test]
fn softimpute_completes_a_rank_one_matrix() {
    let x = rank_one(50, 10, 4);
    let mask = simulate_mcar(x.view(), 0.3, 4).unwrap();
    let ds = apply_mask(&x, &mask, None).unwrap();
    let out = impute_softimpute(&ds, 1e-3, 2000, 1e-9).unwrap();
    for w in out.objective.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
    }
    for j in 0..10 {
        let col = x.column(j);
        let mean = col.sum() / 50.0;
        let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 49.0).sqrt();
        let rows: Vec<usize> = (0..50).filter(|&i| !mask.is_observed(i, j)).collect();
        if rows.is_empty() {
            continue;
        }
        let rmse = (rows.iter().map(|&i| (out.imputed.values()[[i, j]] - x[[i, j]]).powi(2)).sum::<f64>() / rows.len() as f64).sqrt();
        assert!(rmse <= 1e-2 * std, "column {j}: rmse {rmse}, std {std}");
    }
}

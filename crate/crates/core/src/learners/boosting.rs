use ndarray::{ArrayView1, ArrayView2};

use super::tree::{grow, Presorted, Tree, TreeParams};
use super::Target;

#[derive(Clone, Debug)]
enum Mode {
    Regression,
    /// Log-odds of the second class.
    Binary,
    Multiclass(usize),
}

/// Gradient boosting with shrinkage over depth-limited CART trees.
///
/// Regression fits each tree to squared-loss residuals. Binary
/// classification boosts the log-odds under binomial deviance; K > 2
/// classes boost one score per class under multinomial deviance. In both
/// classification modes leaves take a single Newton step.
#[derive(Clone, Debug)]
pub(crate) struct Booster {
    init: Vec<f64>,
    /// One tree per output per round.
    rounds: Vec<Vec<Tree>>,
    learning_rate: f64,
    mode: Mode,
}

impl Booster {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        target: &Target<'_>,
        row_keys: &[u64],
        max_depth: usize,
        n_rounds: usize,
        learning_rate: f64,
    ) -> (Self, u64) {
        let n = x.nrows();
        let sorted = Presorted::keyed(x, row_keys);
        let mut work = sorted.work();
        let params = TreeParams {
            max_depth: Some(max_depth),
            ..TreeParams::default()
        };
        let weights = vec![1.0; n];
        let (mode, init, targets): (Mode, Vec<f64>, Vec<Vec<f64>>) = match target {
            Target::Values(y) => {
                let mean = y.iter().sum::<f64>() / n as f64;
                (Mode::Regression, vec![mean], vec![y.to_vec()])
            }
            Target::Classes { labels, n_classes } => {
                let k = *n_classes;
                let mut counts = vec![0.0; k];
                for &l in labels.iter() {
                    counts[l as usize] += 1.0;
                }
                let prior: Vec<f64> = counts.iter().map(|c| (c / n as f64).clamp(1e-9, 1.0 - 1e-9)).collect();
                let onehot: Vec<Vec<f64>> = (0..k)
                    .map(|c| labels.iter().map(|&l| f64::from(l as usize == c)).collect())
                    .collect();
                if k == 2 {
                    (Mode::Binary, vec![(prior[1] / prior[0]).ln()], vec![onehot[1].clone()])
                } else {
                    (Mode::Multiclass(k), prior.iter().map(|p| p.ln()).collect(), onehot)
                }
            }
        };
        let outputs = init.len();
        let mut scores: Vec<Vec<f64>> = init.iter().map(|&v| vec![v; n]).collect();
        let mut rounds = Vec::with_capacity(n_rounds);
        let mut prob = vec![vec![0.0; n]; outputs];
        for _ in 0..n_rounds {
            match mode {
                Mode::Regression => {}
                Mode::Binary => {
                    for i in 0..n {
                        prob[0][i] = sigmoid(scores[0][i]);
                    }
                }
                Mode::Multiclass(k) => {
                    for i in 0..n {
                        let m = (0..k).map(|c| scores[c][i]).fold(f64::NEG_INFINITY, f64::max);
                        let z: f64 = (0..k).map(|c| (scores[c][i] - m).exp()).sum();
                        for c in 0..k {
                            prob[c][i] = (scores[c][i] - m).exp() / z;
                        }
                    }
                }
            }
            let mut trees = Vec::with_capacity(outputs);
            for out in 0..outputs {
                let grad: Vec<f64> = match mode {
                    Mode::Regression => (0..n).map(|i| targets[0][i] - scores[0][i]).collect(),
                    _ => (0..n).map(|i| targets[out][i] - prob[out][i]).collect(),
                };
                let mut g = grow(x, &sorted, &Target::Values(&grad), &weights, &params, 0);
                work += g.work;
                if !matches!(mode, Mode::Regression) {
                    let factor = match mode {
                        Mode::Multiclass(k) => (k as f64 - 1.0) / k as f64,
                        _ => 1.0,
                    };
                    let values: Vec<f64> = g
                        .leaf_rows
                        .iter()
                        .map(|rows| {
                            let num: f64 = rows.iter().map(|&r| grad[r as usize]).sum();
                            let den: f64 = rows
                                .iter()
                                .map(|&r| {
                                    let a = grad[r as usize].abs();
                                    a * (1.0 - a)
                                })
                                .sum();
                            if den.abs() < 1e-150 {
                                0.0
                            } else {
                                factor * num / den
                            }
                        })
                        .collect();
                    g.tree.set_leaf_values(values, 1);
                }
                for (leaf, rows) in g.leaf_rows.iter().enumerate() {
                    let v = learning_rate * g.tree.leaf_values_of(leaf);
                    for &r in rows {
                        scores[out][r as usize] += v;
                    }
                }
                trees.push(g.tree);
            }
            rounds.push(trees);
        }
        (
            Booster {
                init,
                rounds,
                learning_rate,
                mode,
            },
            work,
        )
    }

    pub fn predict_row(&self, row: ArrayView1<'_, f64>, out: &mut [f64]) {
        let mut f = self.init.clone();
        for trees in &self.rounds {
            for (fk, tree) in f.iter_mut().zip(trees) {
                *fk += self.learning_rate * tree.leaf_value(row)[0];
            }
        }
        match self.mode {
            Mode::Regression => out[0] = f[0],
            Mode::Binary => {
                let p = sigmoid(f[0]);
                out[0] = 1.0 - p;
                out[1] = p;
            }
            Mode::Multiclass(k) => {
                let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = f.iter().map(|v| (v - m).exp()).sum();
                for c in 0..k {
                    out[c] = (f[c] - m).exp() / z;
                }
            }
        }
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn training_rmse_never_increases_with_rounds() {
        let x = Array2::from_shape_fn((150, 2), |(i, j)| ((i * 29 + j * 13) % 97) as f64 / 9.7);
        let y: Vec<f64> = x.rows().into_iter().map(|r| (r[0]).sin() * 3.0 + r[1] * r[1] * 0.1).collect();
        let keys: Vec<u64> = (0..150).collect();
        let mut last = f64::INFINITY;
        for rounds in [1, 2, 5, 10, 20, 50, 100] {
            let (b, _) = Booster::fit(x.view(), &Target::Values(&y), &keys, 3, rounds, 0.1);
            let mut out = [0.0];
            let mse: f64 = x
                .rows()
                .into_iter()
                .zip(&y)
                .map(|(r, t)| {
                    b.predict_row(r, &mut out);
                    (out[0] - t).powi(2)
                })
                .sum::<f64>()
                / 150.0;
            let rmse = mse.sqrt();
            assert!(rmse <= last + 1e-12, "{rounds}: {rmse} > {last}");
            last = rmse;
        }
        assert!(last < 0.5);
    }

    #[test]
    fn more_rounds_extend_fewer() {
        let x = Array2::from_shape_fn((80, 2), |(i, j)| ((i * 7 + j * 3) % 31) as f64);
        let labels: Vec<u32> = (0..80).map(|i| ((x[[i, 0]] + x[[i, 1]]) as u32) % 3).collect();
        let t = Target::Classes { labels: &labels, n_classes: 3 };
        let keys: Vec<u64> = (0..80).collect();
        let (a, _) = Booster::fit(x.view(), &t, &keys, 2, 10, 0.1);
        let (b, _) = Booster::fit(x.view(), &t, &keys, 2, 50, 0.1);
        assert_eq!(a.rounds, b.rounds[..10].to_vec());
    }
}

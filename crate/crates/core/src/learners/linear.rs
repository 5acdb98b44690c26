use ndarray::{Array2, ArrayView2};

use super::scale::{target_scale, Standardizer};
use super::{normalize, Predictions, Target};
use crate::seed;

const BASE_STEP: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Loss {
    Squared,
    Logistic,
}

#[derive(Clone, Debug)]
enum Output {
    Regression { mean: f64, scale: f64 },
    Binary,
    OneVsRest(usize),
}

/// Linear model on standardized regressors trained by stochastic gradient
/// descent, one pass over the rows per epoch with step `0.1 / sqrt(t)`.
/// The L2 term `‖w‖² / (2Cn)` is applied as a proximal shrink after each
/// step. An epoch that would raise the full training loss is rolled back
/// and the step multiplier halved, so recorded losses never increase.
///
/// Classification uses the logistic loss (one-vs-rest for K > 2);
/// regression uses the squared loss on the standardized target.
#[derive(Clone, Debug)]
pub(crate) struct SgdLinear {
    scaler: Standardizer,
    models: Vec<(Vec<f64>, f64)>,
    output: Output,
    history: Vec<f64>,
    work: u64,
}

impl SgdLinear {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        target: &Target<'_>,
        c: f64,
        epochs: usize,
        row_keys: &[u64],
        seed: u64,
    ) -> Self {
        let n = x.nrows();
        let scaler = Standardizer::fit(x);
        let z = scaler.transform(x);
        let orders: Vec<Vec<usize>> = (0..epochs as u64)
            .map(|e| {
                let mut idx: Vec<(u64, usize)> = row_keys
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| (seed::derive(seed, &[e, k]), i))
                    .collect();
                idx.sort_unstable();
                idx.into_iter().map(|(_, i)| i).collect()
            })
            .collect();
        let (tasks, output, loss): (Vec<Vec<f64>>, Output, Loss) = match target {
            Target::Values(y) => {
                let (mean, scale) = target_scale(y);
                let t = y.iter().map(|v| (v - mean) / scale).collect();
                (vec![t], Output::Regression { mean, scale }, Loss::Squared)
            }
            Target::Classes { labels, n_classes } => {
                let indicator = |k: usize| labels.iter().map(|&l| f64::from(l as usize == k)).collect();
                if *n_classes == 2 {
                    (vec![indicator(1)], Output::Binary, Loss::Logistic)
                } else {
                    ((0..*n_classes).map(indicator).collect(), Output::OneVsRest(*n_classes), Loss::Logistic)
                }
            }
        };
        let shrink_rate = 1.0 / (c * n as f64);
        let mut history = vec![0.0; epochs];
        let mut models = Vec::with_capacity(tasks.len());
        for t in &tasks {
            let (model, h) = train_one(&z, t, loss, shrink_rate, &orders);
            for (acc, v) in history.iter_mut().zip(h) {
                *acc += v;
            }
            models.push(model);
        }
        let p = x.ncols().max(1) as u64;
        let work = (epochs as u64) * (n as u64) * p * 2 * tasks.len() as u64;
        SgdLinear {
            scaler,
            models,
            output,
            history,
            work,
        }
    }

    pub fn work(&self) -> u64 {
        self.work
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.history
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Predictions {
        let n = x.nrows();
        let mut row = vec![0.0; x.ncols()];
        let mut scores = Array2::zeros((n, self.models.len()));
        for i in 0..n {
            self.scaler.transform_row(x.row(i), &mut row);
            for (k, (w, b)) in self.models.iter().enumerate() {
                scores[[i, k]] = b + dot(w, &row);
            }
        }
        match &self.output {
            Output::Regression { mean, scale } => {
                Predictions::Values(scores.column(0).iter().map(|s| mean + scale * s).collect())
            }
            Output::Binary => Predictions::Probabilities(Array2::from_shape_fn((n, 2), |(i, k)| {
                let p = sigmoid(scores[[i, 0]]);
                if k == 1 {
                    p
                } else {
                    1.0 - p
                }
            })),
            Output::OneVsRest(k) => {
                let mut probs = Array2::zeros((n, *k));
                for i in 0..n {
                    let mut p: Vec<f64> = (0..*k).map(|j| sigmoid(scores[[i, j]])).collect();
                    normalize(&mut p);
                    for j in 0..*k {
                        probs[[i, j]] = p[j];
                    }
                }
                Predictions::Probabilities(probs)
            }
        }
    }
}

fn train_one(
    z: &Array2<f64>,
    t: &[f64],
    loss: Loss,
    shrink_rate: f64,
    orders: &[Vec<usize>],
) -> ((Vec<f64>, f64), Vec<f64>) {
    let p = z.ncols();
    let mut w = vec![0.0; p];
    let mut b = match loss {
        Loss::Squared => 0.0,
        Loss::Logistic => {
            let prior = (t.iter().sum::<f64>() / t.len() as f64).clamp(1e-6, 1.0 - 1e-6);
            (prior / (1.0 - prior)).ln()
        }
    };
    let mut current = full_loss(z, t, &w, b, loss, shrink_rate);
    let mut multiplier = 1.0;
    let mut history = Vec::with_capacity(orders.len());
    for (e, order) in orders.iter().enumerate() {
        let step = BASE_STEP * multiplier / ((e + 1) as f64).sqrt();
        let shrink = 1.0 / (1.0 + step * shrink_rate);
        let mut w2 = w.clone();
        let mut b2 = b;
        for &i in order {
            let row = z.row(i);
            let s = b2 + row.iter().zip(&w2).map(|(a, c)| a * c).sum::<f64>();
            let g = match loss {
                Loss::Squared => s - t[i],
                Loss::Logistic => sigmoid(s) - t[i],
            };
            for (wj, xj) in w2.iter_mut().zip(row.iter()) {
                *wj = (*wj - step * g * xj) * shrink;
            }
            b2 -= step * g;
        }
        let candidate = full_loss(z, t, &w2, b2, loss, shrink_rate);
        if candidate.is_finite() && candidate <= current {
            w = w2;
            b = b2;
            current = candidate;
        } else {
            multiplier *= 0.5;
        }
        history.push(current);
    }
    ((w, b), history)
}

/// Mean loss plus `‖w‖² / (2Cn)`.
fn full_loss(z: &Array2<f64>, t: &[f64], w: &[f64], b: f64, loss: Loss, shrink_rate: f64) -> f64 {
    let n = t.len() as f64;
    let mut total = 0.0;
    for (i, row) in z.rows().into_iter().enumerate() {
        let s = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        total += match loss {
            Loss::Squared => 0.5 * (s - t[i]).powi(2),
            Loss::Logistic => softplus(s) - t[i] * s,
        };
    }
    total / n + 0.5 * shrink_rate * w.iter().map(|v| v * v).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

use ndarray::{ArrayView2, Axis};

use super::{Objective, ObjectiveKind, SearchError};
use crate::learners::{fit_keyed, LearnerConfig, LearnerError, Predictions, Task};
use crate::metrics::auroc;
use crate::seed;

/// Training data for one search: observed targets and their regressors.
#[derive(Clone, Copy, Debug)]
pub struct Problem<'a> {
    pub task: Task,
    pub targets: &'a [f64],
    pub regressors: ArrayView2<'a, f64>,
    /// Stable per-row keys (original row indices), used for fold
    /// assignment and by randomized learners.
    pub row_keys: &'a [u64],
}

impl<'a> Problem<'a> {
    pub fn new(task: Task, targets: &'a [f64], regressors: ArrayView2<'a, f64>, row_keys: &'a [u64]) -> Self {
        Problem {
            task,
            targets,
            regressors,
            row_keys,
        }
    }
}

/// Fold index per row. Rows are ordered by a seeded hash of their key and
/// dealt round-robin; classification deals each class in turn so every
/// fold receives its share of every class.
pub fn assign_folds(problem: &Problem<'_>, folds: usize, seed: u64) -> Vec<usize> {
    let n = problem.targets.len();
    let mut order: Vec<(u64, usize)> = (0..n)
        .map(|i| (seed::derive(seed, &[problem.row_keys[i]]), i))
        .collect();
    order.sort_unstable();
    let mut assignment = vec![0; n];
    match problem.task {
        Task::Regression => {
            for (pos, &(_, i)) in order.iter().enumerate() {
                assignment[i] = pos % folds;
            }
        }
        Task::Classification { .. } => {
            let mut classes: Vec<u64> = problem.targets.iter().map(|v| v.to_bits()).collect();
            classes.sort_unstable_by(|a, b| f64::from_bits(*a).total_cmp(&f64::from_bits(*b)));
            classes.dedup();
            let mut dealt = 0;
            for c in classes {
                for &(_, i) in order.iter().filter(|(_, i)| problem.targets[*i].to_bits() == c) {
                    assignment[i] = dealt % folds;
                    dealt += 1;
                }
            }
        }
    }
    assignment
}

/// Mean out-of-fold RMSE, or mean negative macro one-vs-rest AUROC.
/// Folds whose held-out part has no class with both positives and
/// negatives are skipped for classification.
pub fn cv_objective(config: &LearnerConfig, problem: &Problem<'_>, objective: &Objective, seed: u64) -> Result<f64, SearchError> {
    let n = problem.targets.len();
    let k = objective.folds;
    if k < 2 || n < k {
        return Err(SearchError::InsufficientData { rows: n, folds: k });
    }
    let fold_seed = seed::derive(seed, &[seed::label("folds")]);
    let assignment = assign_folds(problem, k, fold_seed);
    let mut total = 0.0;
    let mut used = 0usize;
    for f in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
        if train.is_empty() || test.is_empty() {
            return Err(SearchError::InsufficientData { rows: n, folds: k });
        }
        let xt = problem.regressors.select(Axis(0), &train);
        let yt: Vec<f64> = train.iter().map(|&i| problem.targets[i]).collect();
        let kt: Vec<u64> = train.iter().map(|&i| problem.row_keys[i]).collect();
        let model = match fit_keyed(config, problem.task, &yt, xt.view(), &kt, seed::derive(seed, &[f as u64])) {
            Ok(m) => m,
            Err(LearnerError::DegenerateTarget(_)) => {
                return Err(SearchError::InsufficientData { rows: n, folds: k })
            }
            Err(e) => return Err(SearchError::Learner(e)),
        };
        let xv = problem.regressors.select(Axis(0), &test);
        let yv: Vec<f64> = test.iter().map(|&i| problem.targets[i]).collect();
        let pred = model.predict(xv.view()).map_err(SearchError::Learner)?;
        let score = match (objective.kind, pred) {
            (ObjectiveKind::MinRmse, Predictions::Values(p)) => {
                let mse = p.iter().zip(&yv).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / yv.len() as f64;
                Some(mse.sqrt())
            }
            (ObjectiveKind::MinNegAuroc, Predictions::Probabilities(p)) => {
                let mut sum = 0.0;
                let mut count = 0;
                for c in 0..p.ncols() {
                    let labels: Vec<bool> = yv.iter().map(|&v| v as usize == c + 1).collect();
                    if let Ok(a) = auroc(&p.column(c).to_vec(), &labels) {
                        sum += a;
                        count += 1;
                    }
                }
                (count > 0).then(|| -sum / count as f64)
            }
            _ => return Err(SearchError::ObjectiveMismatch),
        };
        if let Some(s) = score {
            total += s;
            used += 1;
        }
    }
    if used == 0 {
        return Err(SearchError::InsufficientData { rows: n, folds: k });
    }
    Ok(total / used as f64)
}

//! Mapping from abstract resource units to each class's native iterations.
//!
//! Cost is measured with the learners' deterministic work counters rather
//! than wall time, so calibrated mappings (and everything searched with
//! them) are reproducible across machines and thread counts.

use std::collections::BTreeMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::learners::{default_config, fit, set_resource, LearnerClass, ResourceKind, Task};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ClassScaling {
    /// No partial budget: every unit count maps to the full fit.
    FullFit,
    /// `native = clamp(ceil(units * rate), 1, max)`.
    Linear { rate: f64, max: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceScaling {
    pub classes: BTreeMap<LearnerClass, ClassScaling>,
}

impl ResourceScaling {
    /// Uncalibrated default: `max_resource` units buy each iterative class
    /// its default native budget of 100 trees or epochs.
    pub fn uniform(max_resource: u32) -> Self {
        let rate = 100.0 / f64::from(max_resource.max(1));
        let classes = [
            LearnerClass::LinearRidge,
            LearnerClass::Logistic,
            LearnerClass::DecisionTree,
            LearnerClass::RandomForest,
            LearnerClass::GradientBoosting,
            LearnerClass::Knn,
        ]
        .into_iter()
        .map(|c| (c, Self::for_class(c, rate)))
        .collect();
        ResourceScaling { classes }
    }

    fn for_class(class: LearnerClass, rate: f64) -> ClassScaling {
        match class.resource_kind() {
            ResourceKind::FullFit => ClassScaling::FullFit,
            _ => ClassScaling::Linear {
                rate,
                max: class.max_native(),
            },
        }
    }

    /// Builds a mapping from per-native-iteration costs. The most expensive
    /// class receives `100 / max_resource` native iterations per unit and
    /// every other class as many as cost the same work.
    pub fn from_costs(costs: &[(LearnerClass, f64)], max_resource: u32) -> Self {
        let reference = costs
            .iter()
            .filter(|(c, _)| c.resource_kind() != ResourceKind::FullFit)
            .map(|&(_, cost)| cost)
            .fold(0.0f64, f64::max);
        let base = 100.0 / f64::from(max_resource.max(1));
        let mut out = Self::uniform(max_resource);
        for &(class, cost) in costs {
            let scaling = match class.resource_kind() {
                ResourceKind::FullFit => ClassScaling::FullFit,
                _ if cost > 0.0 && reference > 0.0 => ClassScaling::Linear {
                    rate: base * reference / cost,
                    max: class.max_native(),
                },
                _ => Self::for_class(class, base),
            };
            out.classes.insert(class, scaling);
        }
        out
    }

    pub fn native(&self, class: LearnerClass, units: u32) -> u32 {
        match self.classes.get(&class) {
            Some(ClassScaling::Linear { rate, max }) => {
                let v = (f64::from(units) * rate).ceil();
                (v.min(f64::from(*max)) as u32).clamp(1, (*max).max(1))
            }
            _ => units.max(1),
        }
    }
}

/// Fits each iterative class's default config at 1, 5 and 10 native
/// iterations on the probe data and takes the least-squares slope of work
/// against iterations as the per-iteration cost.
pub fn calibrate_resource_scaling(
    catalogue: &[LearnerClass],
    task: Task,
    probe_targets: &[f64],
    probe_regressors: ArrayView2<'_, f64>,
    max_resource: u32,
    seed: u64,
) -> ResourceScaling {
    let mut costs = Vec::new();
    for &class in catalogue {
        if class.resource_kind() == ResourceKind::FullFit {
            costs.push((class, 0.0));
            continue;
        }
        let points: Vec<(f64, f64)> = [1u32, 5, 10]
            .iter()
            .filter_map(|&it| {
                let c = set_resource(&default_config(class, task), it);
                fit(&c, task, probe_targets, probe_regressors, seed::derive(seed, &[u64::from(it)]))
                    .ok()
                    .map(|m| (f64::from(it), m.work() as f64))
            })
            .collect();
        costs.push((class, slope(&points)));
    }
    ResourceScaling::from_costs(&costs, max_resource)
}

fn slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxy / sxx).max(0.0)
}

//! Univariate conditional models used to impute one column from the others.
//!
//! Every class has a regression and a classification variant. Regressors
//! arrive already numeric (categoricals expanded by [`design_matrix`]);
//! classification targets are integer codes `1..=K`.
//!
//! [`design_matrix`]: crate::data::design_matrix

mod boosting;
mod forest;
mod knn;
mod linear;
mod ridge;
mod scale;
pub mod space;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::ColumnKind;
pub use space::{Domain, HyperparamSpace, ParamValue};
pub use tree::MaxFeatures;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("degenerate target: {0} observed class(es)")]
    DegenerateTarget(usize),
    #[error("invalid target value {value} at row {row}")]
    InvalidTarget { row: usize, value: f64 },
    #[error("{targets} targets for {rows} regressor rows")]
    LengthMismatch { targets: usize, rows: usize },
    #[error("regressor width mismatch: trained on {expected}, got {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("non-finite regressor value at row {row}, column {col}")]
    NonFiniteRegressor { row: usize, col: usize },
    #[error("invalid config for {class}: {reason}")]
    InvalidConfig { class: LearnerClass, reason: String },
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, LearnerError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification { n_classes: usize },
}

impl Task {
    pub fn for_kind(kind: ColumnKind) -> Task {
        match kind {
            ColumnKind::Continuous => Task::Regression,
            ColumnKind::Categorical { cardinality } => Task::Classification {
                n_classes: cardinality,
            },
        }
    }

    pub fn is_classification(self) -> bool {
        matches!(self, Task::Classification { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerClass {
    LinearRidge,
    Logistic,
    DecisionTree,
    RandomForest,
    GradientBoosting,
    Knn,
    /// Mean or mode; the fallback for degenerate columns, not searchable.
    Constant,
}

/// The searchable catalogue, in tie-breaking order.
pub const CATALOGUE: [LearnerClass; 6] = [
    LearnerClass::LinearRidge,
    LearnerClass::Logistic,
    LearnerClass::DecisionTree,
    LearnerClass::RandomForest,
    LearnerClass::GradientBoosting,
    LearnerClass::Knn,
];

/// How a class consumes resource units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Estimators,
    Epochs,
    FullFit,
}

impl LearnerClass {
    pub fn name(self) -> &'static str {
        match self {
            LearnerClass::LinearRidge => "linear_ridge",
            LearnerClass::Logistic => "logistic",
            LearnerClass::DecisionTree => "decision_tree",
            LearnerClass::RandomForest => "random_forest",
            LearnerClass::GradientBoosting => "gradient_boosting",
            LearnerClass::Knn => "knn",
            LearnerClass::Constant => "constant",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim().to_ascii_lowercase().replace('-', "_");
        Some(match t.as_str() {
            "linear_ridge" | "ridge" | "linear" => LearnerClass::LinearRidge,
            "logistic" => LearnerClass::Logistic,
            "decision_tree" | "tree" => LearnerClass::DecisionTree,
            "random_forest" | "forest" | "rf" => LearnerClass::RandomForest,
            "gradient_boosting" | "boosting" | "gb" => LearnerClass::GradientBoosting,
            "knn" => LearnerClass::Knn,
            "constant" => LearnerClass::Constant,
            _ => return None,
        })
    }

    pub fn resource_kind(self) -> ResourceKind {
        match self {
            LearnerClass::RandomForest | LearnerClass::GradientBoosting => ResourceKind::Estimators,
            LearnerClass::Logistic => ResourceKind::Epochs,
            _ => ResourceKind::FullFit,
        }
    }

    /// Name of the parameter driven by resource units, if any.
    pub fn resource_param(self) -> Option<&'static str> {
        match self.resource_kind() {
            ResourceKind::Estimators => Some("n_estimators"),
            ResourceKind::Epochs => Some("epochs"),
            ResourceKind::FullFit => None,
        }
    }

    /// Upper bound on native iterations a resource mapping may request.
    pub fn max_native(self) -> u32 {
        match self.resource_kind() {
            ResourceKind::Estimators => 100,
            ResourceKind::Epochs => 500,
            ResourceKind::FullFit => 1,
        }
    }
}

impl fmt::Display for LearnerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub class: LearnerClass,
    pub params: BTreeMap<String, ParamValue>,
    pub resource_units: u32,
}

impl LearnerConfig {
    /// Canonical text form, used as a cache key and in logs.
    pub fn key(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}({})", self.class, params.join(","))
    }

    fn int(&self, name: &str) -> Result<i64> {
        self.params
            .get(name)
            .and_then(ParamValue::as_i64)
            .ok_or_else(|| self.invalid(format!("missing integer '{name}'")))
    }

    fn positive_int(&self, name: &str) -> Result<usize> {
        let v = self.int(name)?;
        if v < 1 {
            return Err(self.invalid(format!("'{name}' must be >= 1")));
        }
        Ok(v as usize)
    }

    fn positive_real(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .and_then(ParamValue::as_f64)
            .filter(|v| v.is_finite() && *v > 0.0)
            .ok_or_else(|| self.invalid(format!("'{name}' must be a positive real")))
    }

    fn invalid(&self, reason: String) -> LearnerError {
        LearnerError::InvalidConfig {
            class: self.class,
            reason,
        }
    }
}

pub fn default_config(class: LearnerClass, task: Task) -> LearnerConfig {
    let mut params = BTreeMap::new();
    let mut put = |k: &str, v: ParamValue| {
        params.insert(k.to_string(), v);
    };
    match class {
        LearnerClass::LinearRidge => put("alpha", 1.0.into()),
        LearnerClass::Logistic => {
            put("c", 1e-2.into());
            put("epochs", 100.into());
        }
        LearnerClass::DecisionTree => {
            put("max_depth", 5.into());
            put("min_samples_leaf", 1.into());
        }
        LearnerClass::RandomForest => {
            put("max_depth", 4.into());
            put("min_samples_split", 2.into());
            put("min_samples_leaf", 2.into());
            put("n_estimators", 100.into());
            let mf = if task.is_classification() { "sqrt" } else { "all" };
            put("max_features", mf.into());
        }
        LearnerClass::GradientBoosting => {
            put("max_depth", 3.into());
            put("n_estimators", 100.into());
            put("learning_rate", 0.1.into());
        }
        LearnerClass::Knn => put("k", 5.into()),
        LearnerClass::Constant => {}
    }
    let resource_units = class
        .resource_param()
        .and_then(|p| params.get(p))
        .and_then(ParamValue::as_i64)
        .map_or(1, |v| v as u32);
    LearnerConfig {
        class,
        params,
        resource_units,
    }
}

pub fn config_space(class: LearnerClass, _task: Task) -> HyperparamSpace {
    let int = |lo, hi| Domain::IntRange { lo, hi };
    let choice = |options: Vec<ParamValue>| Domain::Choice { options };
    match class {
        LearnerClass::LinearRidge => HyperparamSpace::new(vec![(
            "alpha",
            Domain::RealRange { lo: 1e-3, hi: 10.0, log: true },
        )]),
        LearnerClass::Logistic => HyperparamSpace::new(vec![(
            "c",
            Domain::RealRange { lo: 1e-3, hi: 1e-2, log: true },
        )]),
        LearnerClass::DecisionTree => HyperparamSpace::new(vec![
            ("max_depth", int(1, 8)),
            ("min_samples_leaf", choice(vec![1.into(), 2.into(), 5.into(), 10.into()])),
        ]),
        LearnerClass::RandomForest => HyperparamSpace::new(vec![
            ("max_depth", int(1, 4)),
            ("min_samples_split", choice(vec![2.into(), 5.into(), 10.into()])),
            ("min_samples_leaf", choice(vec![2.into(), 5.into(), 10.into()])),
            ("n_estimators", int(10, 100)),
            ("max_features", choice(vec!["all".into(), "sqrt".into(), "log2".into()])),
        ]),
        LearnerClass::GradientBoosting => HyperparamSpace::new(vec![
            ("max_depth", int(1, 5)),
            ("n_estimators", int(10, 100)),
            ("learning_rate", choice(vec![1e-2.into(), 1e-1.into()])),
        ]),
        LearnerClass::Knn => HyperparamSpace::new(vec![("k", int(1, 25))]),
        LearnerClass::Constant => HyperparamSpace::default(),
    }
}

/// Draws a configuration uniformly from the class space. Epoch-driven
/// classes keep their default epoch budget.
pub fn sample_config<R: rand::Rng + ?Sized>(class: LearnerClass, task: Task, rng: &mut R) -> LearnerConfig {
    let mut config = default_config(class, task);
    for (k, v) in config_space(class, task).sample(rng) {
        config.params.insert(k, v);
    }
    if let Some(p) = class.resource_param() {
        if let Some(v) = config.params.get(p).and_then(ParamValue::as_i64) {
            config.resource_units = v as u32;
        }
    }
    config
}

/// Maps resource units to native iterations. Full-fit classes are returned
/// unchanged apart from the recorded unit count.
pub fn set_resource(config: &LearnerConfig, units: u32) -> LearnerConfig {
    let units = units.max(1);
    let mut out = config.clone();
    out.resource_units = units;
    if let Some(p) = config.class.resource_param() {
        out.params.insert(p.to_string(), ParamValue::Int(i64::from(units)));
    }
    out
}

/// Checks that every searchable parameter lies in the class space. The
/// resource-driven parameter is checked against `resource_units` instead.
pub fn validate_config(config: &LearnerConfig, task: Task) -> Result<()> {
    if config.resource_units < 1 {
        return Err(config.invalid("resource_units must be >= 1".into()));
    }
    let space = config_space(config.class, task);
    let resource = config.class.resource_param();
    for (name, domain) in &space.params {
        if Some(name.as_str()) == resource {
            continue;
        }
        match config.params.get(name) {
            Some(v) if domain.contains(v) => {}
            Some(v) => return Err(config.invalid(format!("'{name}'={v} outside its domain"))),
            None => return Err(config.invalid(format!("missing '{name}'"))),
        }
    }
    if let Some(p) = resource {
        if config.positive_int(p)? as u64 != u64::from(config.resource_units) {
            return Err(config.invalid(format!("'{p}' disagrees with resource_units")));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Predictions {
    Values(Vec<f64>),
    /// One row per query, one column per class `1..=K`.
    Probabilities(Array2<f64>),
}

impl Predictions {
    pub fn len(&self) -> usize {
        match self {
            Predictions::Values(v) => v.len(),
            Predictions::Probabilities(p) => p.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point values to write into a column: regression values as-is,
    /// classification as the argmax label (ties to the smallest label).
    pub fn imputations(&self) -> Vec<f64> {
        match self {
            Predictions::Values(v) => v.clone(),
            Predictions::Probabilities(p) => p
                .rows()
                .into_iter()
                .map(|row| {
                    let mut best = 0;
                    for k in 1..row.len() {
                        if row[k] > row[best] {
                            best = k;
                        }
                    }
                    (best + 1) as f64
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug)]
enum Fitted {
    Constant(Vec<f64>),
    Ridge(ridge::Ridge),
    Linear(linear::SgdLinear),
    Tree(tree::Tree),
    Forest(forest::Forest),
    Boosting(boosting::Booster),
    Knn(knn::Knn),
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    class: LearnerClass,
    task: Task,
    n_features: usize,
    fitted: Fitted,
    work: u64,
}

impl TrainedModel {
    pub fn class(&self) -> LearnerClass {
        self.class
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Deterministic count of elementary training operations.
    pub fn work(&self) -> u64 {
        self.work
    }

    /// Per-epoch training loss for epoch-driven models.
    pub fn loss_history(&self) -> Option<&[f64]> {
        match &self.fitted {
            Fitted::Linear(m) => Some(m.loss_history()),
            _ => None,
        }
    }

    pub fn predict(&self, regressors: ArrayView2<'_, f64>) -> Result<Predictions> {
        if regressors.ncols() != self.n_features {
            return Err(LearnerError::WidthMismatch {
                expected: self.n_features,
                found: regressors.ncols(),
            });
        }
        check_finite(regressors)?;
        let n = regressors.nrows();
        let out = match &self.fitted {
            Fitted::Constant(v) => match self.task {
                Task::Regression => Predictions::Values(vec![v[0]; n]),
                Task::Classification { n_classes } => {
                    Predictions::Probabilities(Array2::from_shape_fn((n, n_classes), |(_, k)| v[k]))
                }
            },
            Fitted::Ridge(m) => m.predict(regressors),
            Fitted::Linear(m) => m.predict(regressors),
            Fitted::Tree(t) => tree_predictions(self.task, n, |i, out| {
                out.copy_from_slice(t.leaf_value(regressors.row(i)))
            }),
            Fitted::Forest(f) => tree_predictions(self.task, n, |i, out| f.predict_row(regressors.row(i), out)),
            Fitted::Boosting(b) => tree_predictions(self.task, n, |i, out| b.predict_row(regressors.row(i), out)),
            Fitted::Knn(m) => m.predict(regressors),
        };
        Ok(out)
    }
}

fn tree_predictions(task: Task, n: usize, mut row: impl FnMut(usize, &mut [f64])) -> Predictions {
    match task {
        Task::Regression => {
            let mut buf = [0.0];
            Predictions::Values(
                (0..n)
                    .map(|i| {
                        row(i, &mut buf);
                        buf[0]
                    })
                    .collect(),
            )
        }
        Task::Classification { n_classes } => {
            let mut probs = Array2::zeros((n, n_classes));
            let mut buf = vec![0.0; n_classes];
            for i in 0..n {
                row(i, &mut buf);
                normalize(&mut buf);
                probs.row_mut(i).assign(&ndarray::ArrayView1::from(&buf[..]));
            }
            Predictions::Probabilities(probs)
        }
    }
}

/// Rescales nonnegative weights to sum to one; all-zero becomes uniform.
pub(crate) fn normalize(p: &mut [f64]) {
    for v in p.iter_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if total > 0.0 && total.is_finite() {
        for v in p.iter_mut() {
            *v /= total;
        }
    } else {
        let u = 1.0 / p.len() as f64;
        p.iter_mut().for_each(|v| *v = u);
    }
}

fn check_finite(x: ArrayView2<'_, f64>) -> Result<()> {
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(LearnerError::NonFiniteRegressor { row, col });
    }
    Ok(())
}

/// Classification targets as zero-based labels.
fn labels(targets: &[f64], n_classes: usize) -> Result<Vec<u32>> {
    targets
        .iter()
        .enumerate()
        .map(|(row, &v)| {
            if v.fract() == 0.0 && v >= 1.0 && v <= n_classes as f64 {
                Ok(v as u32 - 1)
            } else {
                Err(LearnerError::InvalidTarget { row, value: v })
            }
        })
        .collect()
}

fn class_counts(labels: &[u32], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0.0; n_classes];
    for &l in labels {
        counts[l as usize] += 1.0;
    }
    counts
}

pub(crate) enum Target<'a> {
    Values(&'a [f64]),
    Classes { labels: &'a [u32], n_classes: usize },
}

/// Trains `config` on `(regressors, targets)`. Parameters only need to be
/// well formed; membership in the search space is checked by
/// [`validate_config`], not here.
pub fn fit(
    config: &LearnerConfig,
    task: Task,
    targets: &[f64],
    regressors: ArrayView2<'_, f64>,
    seed: u64,
) -> Result<TrainedModel> {
    let keys: Vec<u64> = (0..targets.len() as u64).collect();
    fit_keyed(config, task, targets, regressors, &keys, seed)
}

/// Like [`fit`], with a stable key per training row. Randomized learners
/// draw per-row randomness from the key, so permuting rows together with
/// their keys leaves the fitted model unchanged.
pub fn fit_keyed(
    config: &LearnerConfig,
    task: Task,
    targets: &[f64],
    regressors: ArrayView2<'_, f64>,
    row_keys: &[u64],
    seed: u64,
) -> Result<TrainedModel> {
    let n = regressors.nrows();
    if targets.len() != n || row_keys.len() != n {
        return Err(LearnerError::LengthMismatch {
            targets: targets.len(),
            rows: n,
        });
    }
    if n == 0 {
        return Err(LearnerError::EmptyTrainingSet);
    }
    check_finite(regressors)?;
    let label_buf;
    let target = match task {
        Task::Regression => {
            if let Some(row) = targets.iter().position(|v| !v.is_finite()) {
                return Err(LearnerError::InvalidTarget {
                    row,
                    value: targets[row],
                });
            }
            Target::Values(targets)
        }
        Task::Classification { n_classes } => {
            label_buf = labels(targets, n_classes)?;
            if config.class != LearnerClass::Constant {
                let present = class_counts(&label_buf, n_classes).iter().filter(|&&c| c > 0.0).count();
                if present < 2 {
                    return Err(LearnerError::DegenerateTarget(present));
                }
            }
            Target::Classes {
                labels: &label_buf,
                n_classes,
            }
        }
    };
    let p = regressors.ncols() as u64;
    let (fitted, work) = match config.class {
        LearnerClass::Constant => {
            let v = match target {
                Target::Values(y) => vec![y.iter().sum::<f64>() / n as f64],
                Target::Classes { labels, n_classes } => {
                    let mut c = class_counts(labels, n_classes);
                    normalize(&mut c);
                    c
                }
            };
            (Fitted::Constant(v), n as u64)
        }
        LearnerClass::LinearRidge => {
            let m = ridge::Ridge::fit(regressors, &target, config.positive_real("alpha")?)?;
            (Fitted::Ridge(m), n as u64 * (p + 1) * (p + 1))
        }
        LearnerClass::Logistic => {
            let c = config.positive_real("c")?;
            let epochs = config.positive_int("epochs")?;
            let m = linear::SgdLinear::fit(regressors, &target, c, epochs, row_keys, seed);
            let work = m.work();
            (Fitted::Linear(m), work)
        }
        LearnerClass::DecisionTree => {
            let params = tree::TreeParams {
                max_depth: Some(config.positive_int("max_depth")?),
                min_samples_split: 2,
                min_samples_leaf: config.positive_int("min_samples_leaf")?,
                max_features: MaxFeatures::All,
            };
            let sorted = tree::Presorted::new(regressors);
            let weights = vec![1.0; n];
            let grown = tree::grow(regressors, &sorted, &target, &weights, &params, seed);
            (Fitted::Tree(grown.tree), sorted.work() + grown.work)
        }
        LearnerClass::RandomForest => {
            let mf = config
                .params
                .get("max_features")
                .and_then(ParamValue::as_str)
                .and_then(MaxFeatures::parse)
                .ok_or_else(|| config.invalid("bad 'max_features'".into()))?;
            let params = tree::TreeParams {
                max_depth: Some(config.positive_int("max_depth")?),
                min_samples_split: config.positive_int("min_samples_split")?,
                min_samples_leaf: config.positive_int("min_samples_leaf")?,
                max_features: mf,
            };
            let n_trees = config.positive_int("n_estimators")?;
            let (f, work) = forest::Forest::fit(regressors, &target, row_keys, &params, n_trees, seed);
            (Fitted::Forest(f), work)
        }
        LearnerClass::GradientBoosting => {
            let depth = config.positive_int("max_depth")?;
            let rounds = config.positive_int("n_estimators")?;
            let lr = config.positive_real("learning_rate")?;
            let (b, work) = boosting::Booster::fit(regressors, &target, row_keys, depth, rounds, lr);
            (Fitted::Boosting(b), work)
        }
        LearnerClass::Knn => {
            let k = config.positive_int("k")?;
            let m = knn::Knn::fit(regressors, &target, row_keys, k);
            (Fitted::Knn(m), n as u64 * p.max(1))
        }
    };
    Ok(TrainedModel {
        class: config.class,
        task,
        n_features: regressors.ncols(),
        fitted,
        work,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn probe() -> (Array2<f64>, Vec<f64>, Vec<f64>) {
        let x = Array2::from_shape_fn((60, 3), |(i, j)| {
            let t = i as f64 * 0.37 + j as f64 * 1.3;
            (t * 1.7).sin() * 2.0 + j as f64
        });
        let y: Vec<f64> = x.rows().into_iter().map(|r| r[0] * 1.5 - r[1] + 0.3 * r[2] * r[2]).collect();
        let labels: Vec<f64> = y.iter().map(|&v| if v > 0.5 { 2.0 } else { 1.0 }).collect();
        (x, y, labels)
    }

    #[test]
    fn defaults_match_documented_values() {
        let rf = default_config(LearnerClass::RandomForest, Task::Regression);
        assert_eq!(rf.params["n_estimators"], ParamValue::Int(100));
        assert_eq!(rf.params["max_depth"], ParamValue::Int(4));
        assert_eq!(rf.resource_units, 100);
        assert_eq!(default_config(LearnerClass::LinearRidge, Task::Regression).params["alpha"], ParamValue::Real(1.0));
        assert_eq!(default_config(LearnerClass::Knn, Task::Regression).params["k"], ParamValue::Int(5));
        for class in CATALOGUE {
            for task in [Task::Regression, Task::Classification { n_classes: 3 }] {
                validate_config(&default_config(class, task), task).unwrap();
            }
        }
    }

    #[test]
    fn spaces_contain_documented_ranges() {
        let rf = config_space(LearnerClass::RandomForest, Task::Regression);
        assert_eq!(rf.get("max_depth"), Some(&Domain::IntRange { lo: 1, hi: 4 }));
        let gb = config_space(LearnerClass::GradientBoosting, Task::Regression);
        assert_eq!(gb.get("n_estimators"), Some(&Domain::IntRange { lo: 10, hi: 100 }));
        let mut rng = crate::seed::rng(11);
        for class in CATALOGUE {
            for _ in 0..200 {
                let c = sample_config(class, Task::Regression, &mut rng);
                validate_config(&c, Task::Regression).unwrap();
            }
        }
    }

    #[test]
    fn set_resource_maps_to_native_parameter() {
        let gb = set_resource(&default_config(LearnerClass::GradientBoosting, Task::Regression), 10);
        assert_eq!(gb.params["n_estimators"], ParamValue::Int(10));
        let ridge = default_config(LearnerClass::LinearRidge, Task::Regression);
        let same = set_resource(&ridge, 7);
        assert_eq!(same.params, ridge.params);
        assert_eq!(LearnerClass::LinearRidge.resource_kind(), ResourceKind::FullFit);
        let lg = set_resource(&default_config(LearnerClass::Logistic, Task::Regression), 3);
        assert_eq!(lg.params["epochs"], ParamValue::Int(3));
    }

    #[test]
    fn ridge_extrapolates_line() {
        let mut c = default_config(LearnerClass::LinearRidge, Task::Regression);
        c.params.insert("alpha".into(), 1e-6.into());
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let m = fit(&c, Task::Regression, &[1.0, 3.0, 5.0, 7.0], x.view(), 0).unwrap();
        let Predictions::Values(v) = m.predict(array![[4.0]].view()).unwrap() else { panic!() };
        assert!((v[0] - 9.0).abs() <= 1e-6, "{}", v[0]);
    }

    #[test]
    fn constant_target_is_reproduced() {
        let (x, _, _) = probe();
        let y = vec![5.0; x.nrows()];
        for class in CATALOGUE {
            let m = fit(&default_config(class, Task::Regression), Task::Regression, &y, x.view(), 1).unwrap();
            let Predictions::Values(v) = m.predict(x.view()).unwrap() else { panic!() };
            let exact = !matches!(class, LearnerClass::LinearRidge | LearnerClass::Logistic);
            for p in v {
                if exact {
                    assert_eq!(p, 5.0, "{class}");
                } else {
                    assert!((p - 5.0).abs() <= 1e-6, "{class}: {p}");
                }
            }
        }
    }

    #[test]
    fn probabilities_are_normalized_and_deterministic() {
        let (x, _, labels) = probe();
        let task = Task::Classification { n_classes: 3 };
        for class in CATALOGUE {
            let c = default_config(class, task);
            let a = fit(&c, task, &labels, x.view(), 9).unwrap();
            let b = fit(&c, task, &labels, x.view(), 9).unwrap();
            let pa = a.predict(x.view()).unwrap();
            assert_eq!(pa, b.predict(x.view()).unwrap(), "{class}");
            let Predictions::Probabilities(p) = pa else { panic!() };
            for row in p.rows() {
                assert!(row.iter().all(|&v| v >= 0.0));
                assert!((row.sum() - 1.0).abs() <= 1e-9, "{class}");
            }
        }
    }

    #[test]
    fn rejects_degenerate_and_malformed_input() {
        let x = array![[0.0], [1.0]];
        let task = Task::Classification { n_classes: 2 };
        let c = default_config(LearnerClass::Knn, task);
        assert_eq!(fit(&c, task, &[1.0, 1.0], x.view(), 0).unwrap_err(), LearnerError::DegenerateTarget(1));
        assert!(matches!(fit(&c, task, &[1.0, 3.0], x.view(), 0), Err(LearnerError::InvalidTarget { row: 1, .. })));
        let empty = Array2::<f64>::zeros((0, 1));
        assert_eq!(fit(&c, task, &[], empty.view(), 0).unwrap_err(), LearnerError::EmptyTrainingSet);
        let m = fit(&c, task, &[1.0, 2.0], x.view(), 0).unwrap();
        assert!(matches!(m.predict(array![[1.0, 2.0]].view()), Err(LearnerError::WidthMismatch { .. })));
        assert!(m.predict(empty.view()).unwrap().is_empty());
    }

    #[test]
    fn argmax_ties_go_to_smallest_label() {
        let p = Predictions::Probabilities(array![[0.5, 0.5], [0.2, 0.8]]);
        assert_eq!(p.imputations(), vec![1.0, 2.0]);
    }
}

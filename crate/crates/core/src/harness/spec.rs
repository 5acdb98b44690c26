//! Experiment descriptions, loadable from TOML.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::method::Method;
use super::synth::{make_synth, SynthKind};
use crate::data::{read_csv, CsvOptions, DataError, Schema, Sidecar};
use crate::engine::EngineConfig;
use crate::simulate::Mechanism;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid experiment spec: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub const DEFAULT_RATES: [f64; 4] = [0.1, 0.3, 0.5, 0.7];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// A complete headed CSV, optionally with a column-kind sidecar.
    File {
        path: PathBuf,
        #[serde(default)]
        sidecar: Option<PathBuf>,
    },
    Synth {
        generator: SynthKind,
        n: usize,
        /// Width of the Gaussian generator; ignored by the others.
        #[serde(default)]
        d: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl DatasetSource {
    fn resolve(&mut self, base: &Path) {
        if let DatasetSource::File { path, sidecar } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
            if let Some(s) = sidecar.as_mut().filter(|s| s.is_relative()) {
                *s = base.join(&*s);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: Option<DatasetSource>,
    pub mechanisms: Vec<Mechanism>,
    pub rates: Vec<f64>,
    pub methods: Vec<Method>,
    pub n_seeds: usize,
    /// Root of every mask and method seed.
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Concurrent runs; 0 uses every available core.
    pub workers: usize,
    /// Record per-iteration RMSE and WD against the ground truth.
    pub trace_metrics: bool,
    pub engine: EngineConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            dataset: None,
            mechanisms: vec![Mechanism::Mcar],
            rates: DEFAULT_RATES.to_vec(),
            methods: vec![Method::HyperImpute],
            n_seeds: 10,
            seed: 0,
            out: None,
            workers: 0,
            trace_metrics: true,
            engine: EngineConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SpecError> {
        toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))
    }

    /// Reads a TOML config; relative dataset paths resolve against the
    /// config's directory.
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self, SpecError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(ds) = spec.dataset.as_mut() {
            ds.resolve(base);
        }
        if let Some(out) = spec.out.as_mut().filter(|o| o.is_relative()) {
            *out = base.join(&*out);
        }
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let bad = |m: String| Err(SpecError::Invalid(m));
        if self.dataset.is_none() {
            return bad("no dataset given".into());
        }
        if self.n_seeds < 1 {
            return bad("n_seeds must be >= 1".into());
        }
        if self.mechanisms.is_empty() || self.rates.is_empty() || self.methods.is_empty() {
            return bad("mechanisms, rates and methods must be non-empty".into());
        }
        if let Some(r) = self.rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return bad(format!("rate {r} outside (0, 1)"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return bad(format!("method '{m}' listed twice"));
            }
        }
        if let Some(DatasetSource::Synth { generator, n, d, .. }) = &self.dataset {
            if *n < 2 || generator.width(*d) < 2 {
                return bad("synthetic dataset needs n >= 2 and at least 2 columns".into());
            }
            if let SynthKind::Gaussian { rho } = generator {
                if !(rho.abs() < 1.0) {
                    return bad(format!("gaussian rho {rho} outside (-1, 1)"));
                }
            }
        }
        self.engine.validate().map_err(|e| SpecError::Invalid(e.to_string()))
    }
}

/// A complete dataset used as ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub values: Array2<f64>,
    pub schema: Schema,
}

impl GroundTruth {
    pub fn load(source: &DatasetSource) -> Result<Self, DataError> {
        match source {
            DatasetSource::File { path, sidecar } => {
                let options = CsvOptions {
                    sidecar: sidecar.as_ref().map(Sidecar::read).transpose()?,
                    ..CsvOptions::default()
                };
                let ds = read_csv(path, &options)?;
                if ds.mask().n_missing() > 0 {
                    return Err(DataError::Invalid(format!(
                        "ground-truth dataset has {} missing cells",
                        ds.mask().n_missing()
                    )));
                }
                Ok(GroundTruth {
                    values: ds.values().to_owned(),
                    schema: ds.schema().clone(),
                })
            }
            DatasetSource::Synth { generator, n, d, seed } => {
                let (values, schema) = make_synth(*generator, *n, *d, *seed);
                Ok(GroundTruth { values, schema })
            }
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    /// The given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        GroundTruth {
            values: self.values.select(Axis(0), rows),
            schema: self.schema.clone(),
        }
    }

    /// The first `d` columns.
    pub fn leading_columns(&self, d: usize) -> Self {
        let mut schema = self.schema.clone();
        schema.names.truncate(d);
        schema.kinds.truncate(d);
        schema.levels.truncate(d);
        GroundTruth {
            values: self.values.slice(ndarray::s![.., ..d]).to_owned(),
            schema,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AblationSetting;
    use crate::search::SearchStrategy;

    const EXAMPLE: &str = r#"
n_seeds = 3
seed = 7
mechanisms = ["mcar", "mar"]
rates = [0.3]
methods = ["mean", "hyperimpute", "ice_fixed(random_forest)"]
out = "results"

[dataset.synth]
generator = { kind = "gaussian", rho = 0.5 }
n = 100
d = 4

[engine]
max_outer_iters = 4
strategy = { kind = "hyperband", eta = 3, max_resource = 9 }
"#;

    #[test]
    fn parses_example_config() {
        let spec = ExperimentSpec::from_toml_str(EXAMPLE).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.n_seeds, 3);
        assert_eq!(spec.mechanisms, vec![Mechanism::Mcar, Mechanism::Mar]);
        assert_eq!(spec.methods[2], Method::Ablation(AblationSetting::IceFixed(crate::learners::LearnerClass::RandomForest)));
        assert_eq!(spec.engine.max_outer_iters, 4);
        assert_eq!(spec.engine.tol_imp, EngineConfig::default().tol_imp);
        assert_eq!(spec.engine.strategy, SearchStrategy::Hyperband { eta: 3, max_resource: 9 });
        assert_eq!(ExperimentSpec::from_toml_str(&spec.to_toml_string()).unwrap(), spec);
        let truth = GroundTruth::load(spec.dataset.as_ref().unwrap()).unwrap();
        assert_eq!(truth.values.dim(), (100, 4));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ExperimentSpec::from_toml_str("n_seedz = 3").is_err());
        assert!(ExperimentSpec::from_toml_str("methods = [\"nope\"]").is_err());
        let mut spec = ExperimentSpec::from_toml_str(EXAMPLE).unwrap();
        spec.rates = vec![1.0];
        assert!(spec.validate().is_err());
        spec.rates = vec![0.5];
        spec.n_seeds = 0;
        assert!(spec.validate().is_err());
        spec.n_seeds = 1;
        spec.dataset = None;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("exp.toml");
        fs::write(&cfg, "out = \"o\"\n[dataset.file]\npath = \"data.csv\"\n").unwrap();
        let spec = ExperimentSpec::from_toml_file(&cfg).unwrap();
        assert_eq!(
            spec.dataset,
            Some(DatasetSource::File {
                path: dir.path().join("data.csv"),
                sidecar: None
            })
        );
        assert_eq!(spec.out, Some(dir.path().join("o")));
    }
}

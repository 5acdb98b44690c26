use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ColumnKind, DataError, Result, Schema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredKind {
    Continuous,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnDecl {
    pub name: String,
    pub kind: DeclaredKind,
    /// Level dictionary; code `k` stands for `levels[k - 1]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
}

/// JSON metadata document declaring column kinds, e.g.
///
/// ```json
/// {"columns": [{"name": "color", "kind": "categorical", "levels": ["blue", "red"]}]}
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub columns: Vec<ColumnDecl>,
}

impl Sidecar {
    pub fn from_json(text: &str) -> Result<Self> {
        let sidecar: Sidecar =
            serde_json::from_str(text).map_err(|e| DataError::Sidecar(e.to_string()))?;
        for (i, c) in sidecar.columns.iter().enumerate() {
            if sidecar.columns[..i].iter().any(|o| o.name == c.name) {
                return Err(DataError::DuplicateColumn(c.name.clone()));
            }
            if let Some(levels) = &c.levels {
                if c.kind != DeclaredKind::Categorical {
                    return Err(DataError::Sidecar(format!(
                        "column '{}' declares levels but is not categorical",
                        c.name
                    )));
                }
                let mut sorted = levels.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != levels.len() || levels.len() < 2 {
                    return Err(DataError::Sidecar(format!(
                        "column '{}' needs at least 2 distinct levels",
                        c.name
                    )));
                }
            }
        }
        Ok(sidecar)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sidecar serializes")
    }

    pub fn get(&self, name: &str) -> Option<&ColumnDecl> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Describes a loaded schema, including label dictionaries.
    pub fn from_schema(schema: &Schema) -> Self {
        let columns = schema
            .names
            .iter()
            .zip(&schema.kinds)
            .zip(&schema.levels)
            .map(|((name, kind), levels)| ColumnDecl {
                name: name.clone(),
                kind: match kind {
                    ColumnKind::Continuous => DeclaredKind::Continuous,
                    ColumnKind::Categorical { .. } => DeclaredKind::Categorical,
                },
                levels: levels.clone(),
            })
            .collect();
        Sidecar { columns }
    }
}

//! Tabular containers: incomplete datasets, masks, column typing and the
//! per-column observed/missing partitions consumed by the iterative loop.
//!
//! The [`Mask`] is the single source of truth for missingness. Value
//! matrices carry `NaN` at masked cells only as a convenience; nothing reads
//! a masked value without consulting the mask first.

mod csv_io;
mod design;
mod sidecar;

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{
    format_value, read_csv, read_csv_bytes, read_mask_csv, read_mask_csv_str, write_csv,
    write_csv_string, write_incomplete_csv, write_mask_csv, CsvOptions,
};
pub use design::design_matrix;
pub use sidecar::{ColumnDecl, DeclaredKind, Sidecar};

/// Default distinct-value threshold under which an all-integer column is
/// treated as categorical.
pub const DEFAULT_MAX_CATEGORICAL_CARD: usize = 20;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("NA present in complete input at ({row}, {col})")]
    NaInComplete { row: usize, col: usize },
    #[error("fills missing a masked cell ({row}, {col})")]
    MissingFill { row: usize, col: usize },
    #[error("observed cell overwrite at ({row}, {col})")]
    ObservedOverwrite { row: usize, col: usize },
    #[error("column index {index} out of range for {n_cols} columns")]
    ColumnOutOfRange { index: usize, n_cols: usize },
    #[error("fully missing column '{0}'")]
    FullyMissingColumn(String),
    #[error("ragged row at line {line}: expected {expected} fields, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("unparseable numeric field '{field}' at line {line}, column '{column}'")]
    Unparseable {
        line: usize,
        column: String,
        field: String,
    },
    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),
    #[error("column '{column}': value {value} is not a category code in 1..={cardinality}")]
    InvalidCategory {
        column: String,
        value: String,
        cardinality: usize,
    },
    #[error("non-finite observed value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("sidecar: {0}")]
    Sidecar(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// Statistical type of a column, fixed for the lifetime of a dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    /// Values are integer codes `1..=cardinality`.
    Categorical { cardinality: usize },
}

impl ColumnKind {
    pub fn is_categorical(self) -> bool {
        matches!(self, ColumnKind::Categorical { .. })
    }

    pub fn cardinality(self) -> Option<usize> {
        match self {
            ColumnKind::Continuous => None,
            ColumnKind::Categorical { cardinality } => Some(cardinality),
        }
    }
}

/// Binary observation pattern; `true` marks an observed cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    bits: Array2<bool>,
}

impl Mask {
    pub fn new(bits: Array2<bool>) -> Self {
        Mask { bits }
    }

    pub fn all_observed(rows: usize, cols: usize) -> Self {
        Mask::new(Array2::from_elem((rows, cols), true))
    }

    /// Builds a mask from 0/1 rows; any nonzero entry counts as observed.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut bits = Array2::from_elem((n, d), false);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(DataError::ShapeMismatch {
                    expected: (n, d),
                    found: (i, row.len()),
                });
            }
            for (j, &b) in row.iter().enumerate() {
                bits[[i, j]] = b != 0;
            }
        }
        Ok(Mask::new(bits))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.bits.dim()
    }

    pub fn bits(&self) -> &Array2<bool> {
        &self.bits
    }

    #[inline]
    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.bits[[row, col]]
    }

    pub fn n_missing(&self) -> usize {
        self.bits.iter().filter(|b| !**b).count()
    }

    pub fn column_missing(&self, col: usize) -> usize {
        self.bits.column(col).iter().filter(|b| !**b).count()
    }

    /// Masked cells in row-major order.
    pub fn missing_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .indexed_iter()
            .filter(|(_, b)| !**b)
            .map(|(idx, _)| idx)
    }

    /// Columns that contain at least one masked cell, in index order.
    pub fn columns_with_missing(&self) -> Vec<usize> {
        (0..self.shape().1)
            .filter(|&d| self.column_missing(d) > 0)
            .collect()
    }

    /// Cell-wise conjunction of observation: observed only where both are.
    pub fn intersect(&self, other: &Mask) -> Result<Mask> {
        if self.shape() != other.shape() {
            return Err(DataError::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        let mut bits = self.bits.clone();
        bits.zip_mut_with(&other.bits, |a, b| *a = *a && *b);
        Ok(Mask::new(bits))
    }
}

/// Column names, kinds and (for label-encoded categoricals) the level
/// dictionary mapping code `k` to `levels[k - 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub levels: Vec<Option<Vec<String>>>,
}

impl Schema {
    /// All-continuous schema with names `x0..x{D-1}`.
    pub fn continuous(n_cols: usize) -> Self {
        Schema {
            names: default_names(n_cols),
            kinds: vec![ColumnKind::Continuous; n_cols],
            levels: vec![None; n_cols],
        }
    }

    pub fn with_kinds(kinds: Vec<ColumnKind>) -> Self {
        let d = kinds.len();
        Schema {
            names: default_names(d),
            kinds,
            levels: vec![None; d],
        }
    }

    pub fn n_cols(&self) -> usize {
        self.kinds.len()
    }

    fn check_width(&self, d: usize) -> Result<()> {
        if self.names.len() != d || self.kinds.len() != d || self.levels.len() != d {
            return Err(DataError::Invalid(format!(
                "schema describes {} columns, data has {d}",
                self.kinds.len()
            )));
        }
        if let Some(bad) = self
            .kinds
            .iter()
            .position(|k| matches!(k, ColumnKind::Categorical { cardinality } if *cardinality < 2))
        {
            return Err(DataError::Invalid(format!(
                "column '{}' is categorical with fewer than 2 levels",
                self.names[bad]
            )));
        }
        Ok(())
    }
}

fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

fn check_observed_value(schema: &Schema, row: usize, col: usize, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(DataError::NonFinite { row, col });
    }
    if let ColumnKind::Categorical { cardinality } = schema.kinds[col] {
        if v.fract() != 0.0 || v < 1.0 || v > cardinality as f64 {
            return Err(DataError::InvalidCategory {
                column: schema.names[col].clone(),
                value: v.to_string(),
                cardinality,
            });
        }
    }
    Ok(())
}

/// A dataset with missing cells. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct IncompleteDataset {
    values: Array2<f64>,
    mask: Mask,
    schema: Schema,
}

impl IncompleteDataset {
    /// Validates and builds a dataset. Values at masked cells are ignored and
    /// replaced by `NaN`.
    pub fn new(mut values: Array2<f64>, mask: Mask, schema: Schema) -> Result<Self> {
        let (n, d) = values.dim();
        if mask.shape() != (n, d) {
            return Err(DataError::ShapeMismatch {
                expected: (n, d),
                found: mask.shape(),
            });
        }
        if n < 1 || d < 2 {
            return Err(DataError::Invalid(format!(
                "need at least 1 row and 2 columns, found {n}x{d}"
            )));
        }
        schema.check_width(d)?;
        for ((i, j), v) in values.indexed_iter_mut() {
            if mask.is_observed(i, j) {
                check_observed_value(&schema, i, j, *v)?;
            } else {
                *v = f64::NAN;
            }
        }
        Ok(IncompleteDataset {
            values,
            mask,
            schema,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.schema.kinds
    }

    pub fn names(&self) -> &[String] {
        &self.schema.names
    }

    /// Raw storage; masked cells hold `NaN`.
    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.mask
            .is_observed(row, col)
            .then(|| self.values[[row, col]])
    }

    pub fn observed_column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).filter_map(|i| self.get(i, col)).collect()
    }

    /// Names of columns without a single observed value.
    pub fn fully_missing_columns(&self) -> Vec<&str> {
        (0..self.n_cols())
            .filter(|&d| self.mask.column_missing(d) == self.n_rows())
            .map(|d| self.schema.names[d].as_str())
            .collect()
    }
}

/// A completed dataset whose observed cells are bit-identical to the source.
#[derive(Clone, Debug, PartialEq)]
pub struct ImputedDataset {
    values: Array2<f64>,
    source_mask: Mask,
    schema: Schema,
}

impl ImputedDataset {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn source_mask(&self) -> &Mask {
        &self.source_mask
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.schema.kinds
    }

    /// Builds from a full matrix, keeping the observed cells of `source`
    /// untouched regardless of what `values` holds there.
    pub fn from_parts(source: &IncompleteDataset, mut values: Array2<f64>) -> Result<Self> {
        if values.dim() != source.values.dim() {
            return Err(DataError::ShapeMismatch {
                expected: source.values.dim(),
                found: values.dim(),
            });
        }
        for ((i, j), v) in values.indexed_iter_mut() {
            if source.mask.is_observed(i, j) {
                *v = source.values[[i, j]];
            } else if !v.is_finite() {
                return Err(DataError::NonFinite { row: i, col: j });
            }
        }
        Ok(ImputedDataset {
            values,
            source_mask: source.mask.clone(),
            schema: source.schema.clone(),
        })
    }

    /// Replaces the masked cells of column `col` at `rows` with `fills`.
    pub(crate) fn overwrite_missing(&mut self, col: usize, rows: &[usize], fills: &[f64]) {
        debug_assert_eq!(rows.len(), fills.len());
        for (&i, &v) in rows.iter().zip(fills) {
            debug_assert!(!self.source_mask.is_observed(i, col));
            self.values[[i, col]] = v;
        }
    }
}

/// Entry-wise application of a mask: observed where the mask says so,
/// NA elsewhere. With no schema, every column is continuous.
pub fn apply_mask(
    complete: &Array2<f64>,
    mask: &Mask,
    schema: Option<Schema>,
) -> Result<IncompleteDataset> {
    if complete.dim() != mask.shape() {
        return Err(DataError::ShapeMismatch {
            expected: complete.dim(),
            found: mask.shape(),
        });
    }
    if let Some(((row, col), _)) = complete.indexed_iter().find(|(_, v)| v.is_nan()) {
        return Err(DataError::NaInComplete { row, col });
    }
    let schema = schema.unwrap_or_else(|| Schema::continuous(complete.ncols()));
    IncompleteDataset::new(complete.clone(), mask.clone(), schema)
}

/// Fills every masked cell from `fills`, keyed by `(row, col)`.
pub fn merge_imputations(
    incomplete: &IncompleteDataset,
    fills: &BTreeMap<(usize, usize), f64>,
) -> Result<ImputedDataset> {
    let (n, d) = (incomplete.n_rows(), incomplete.n_cols());
    for &(row, col) in fills.keys() {
        if row >= n || col >= d {
            return Err(DataError::ShapeMismatch {
                expected: (n, d),
                found: (row + 1, col + 1),
            });
        }
        if incomplete.mask.is_observed(row, col) {
            return Err(DataError::ObservedOverwrite { row, col });
        }
    }
    let mut values = incomplete.values.clone();
    for (row, col) in incomplete.mask.missing_cells() {
        match fills.get(&(row, col)) {
            Some(&v) => values[[row, col]] = v,
            None => return Err(DataError::MissingFill { row, col }),
        }
    }
    ImputedDataset::from_parts(incomplete, values)
}

/// Rows of one column split by whether that column's target is observed.
/// Regressors are the other `D - 1` columns of the current imputation.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnSplit {
    pub column: usize,
    pub target_obs: Vec<f64>,
    pub regressors_obs: Array2<f64>,
    pub regressors_mis: Array2<f64>,
    pub obs_row_indices: Vec<usize>,
    pub mis_row_indices: Vec<usize>,
    pub regressor_kinds: Vec<ColumnKind>,
}

pub fn split_column(current: &ImputedDataset, mask: &Mask, d: usize) -> Result<ColumnSplit> {
    let (n, n_cols) = current.values.dim();
    if d >= n_cols {
        return Err(DataError::ColumnOutOfRange {
            index: d,
            n_cols,
        });
    }
    if mask.shape() != (n, n_cols) {
        return Err(DataError::ShapeMismatch {
            expected: (n, n_cols),
            found: mask.shape(),
        });
    }
    let others: Vec<usize> = (0..n_cols).filter(|&j| j != d).collect();
    let (obs_rows, mis_rows): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| mask.is_observed(i, d));
    let regressors = current.values.select(Axis(1), &others);
    Ok(ColumnSplit {
        column: d,
        target_obs: obs_rows.iter().map(|&i| current.values[[i, d]]).collect(),
        regressors_obs: regressors.select(Axis(0), &obs_rows),
        regressors_mis: regressors.select(Axis(0), &mis_rows),
        obs_row_indices: obs_rows,
        mis_row_indices: mis_rows,
        regressor_kinds: others.iter().map(|&j| current.kinds()[j]).collect(),
    })
}

/// Infers column kinds from a raw matrix in which `NaN` marks NA.
///
/// A column is `Categorical(K)` when every observed value is an integer and
/// there are `2 <= K <= max_categorical_card` distinct values.
pub fn infer_column_kinds(raw: &Array2<f64>, max_categorical_card: usize) -> Result<Vec<ColumnKind>> {
    if max_categorical_card < 2 {
        return Err(DataError::Invalid(
            "max_categorical_card must be at least 2".into(),
        ));
    }
    raw.columns()
        .into_iter()
        .enumerate()
        .map(|(j, col)| {
            let observed: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
            if observed.is_empty() {
                return Err(DataError::FullyMissingColumn(format!("x{j}")));
            }
            Ok(kind_of(&observed, max_categorical_card))
        })
        .collect()
}

pub(crate) fn kind_of(observed: &[f64], max_categorical_card: usize) -> ColumnKind {
    if observed.iter().any(|v| !v.is_finite() || v.fract() != 0.0) {
        return ColumnKind::Continuous;
    }
    let mut distinct: Vec<f64> = observed.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    match distinct.len() {
        k if (2..=max_categorical_card).contains(&k) => ColumnKind::Categorical { cardinality: k },
        _ => ColumnKind::Continuous,
    }
}

/// Recodes the categorical columns of a raw matrix (NaN = NA) to `1..=K` by
/// ascending value and returns the level dictionary per column.
pub fn encode_categoricals(
    raw: &Array2<f64>,
    kinds: &[ColumnKind],
) -> Result<(Array2<f64>, Vec<Option<Vec<String>>>)> {
    let mut coded = raw.clone();
    let mut levels = Vec::with_capacity(kinds.len());
    for (j, kind) in kinds.iter().enumerate() {
        if !kind.is_categorical() {
            levels.push(None);
            continue;
        }
        let mut distinct: Vec<f64> = raw.column(j).iter().copied().filter(|v| !v.is_nan()).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if Some(distinct.len()) != kind.cardinality() {
            return Err(DataError::Invalid(format!(
                "column {j}: declared {kind:?} but found {} distinct values",
                distinct.len()
            )));
        }
        for v in coded.column_mut(j).iter_mut().filter(|v| !v.is_nan()) {
            let code = distinct.partition_point(|x| x < v) + 1;
            *v = code as f64;
        }
        levels.push(Some(distinct.iter().map(|v| format_value(*v)).collect()));
    }
    Ok((coded, levels))
}

/// Infers kinds and label-encodes a complete matrix, returning coded values
/// and a schema with default names.
pub fn prepare_complete(raw: &Array2<f64>, max_categorical_card: usize) -> Result<(Array2<f64>, Schema)> {
    let kinds = infer_column_kinds(raw, max_categorical_card)?;
    let (coded, levels) = encode_categoricals(raw, &kinds)?;
    let mut schema = Schema::with_kinds(kinds);
    schema.levels = levels;
    Ok((coded, schema))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn mask(rows: &[&[u8]]) -> Mask {
        Mask::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_mask_keeps_values() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let ds = apply_mask(&x, &Mask::all_observed(2, 2), None).unwrap();
        assert_eq!(ds.mask().n_missing(), 0);
        assert_eq!(ds.get(1, 1), Some(4.0));
        assert_eq!(ds.values(), x.view());
    }

    #[test]
    fn partial_mask_hides_cells() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let ds = apply_mask(&x, &mask(&[&[1, 0], &[1, 1]]), None).unwrap();
        assert_eq!(ds.get(0, 0), Some(1.0));
        assert_eq!(ds.get(0, 1), None);
        assert_eq!(ds.get(1, 0), Some(3.0));
        assert_eq!(ds.get(1, 1), Some(4.0));
    }

    #[test]
    fn all_zero_mask_hides_everything() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let ds = apply_mask(&x, &mask(&[&[0, 0], &[0, 0]]), None).unwrap();
        assert_eq!(ds.mask().n_missing(), 4);
        assert_eq!(ds.fully_missing_columns().len(), 2);
    }

    #[test]
    fn apply_mask_rejects_bad_input() {
        let x = array![[1.0, f64::NAN], [3.0, 4.0]];
        assert!(matches!(
            apply_mask(&x, &Mask::all_observed(2, 2), None),
            Err(DataError::NaInComplete { row: 0, col: 1 })
        ));
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert!(matches!(
            apply_mask(&x, &Mask::all_observed(3, 2), None),
            Err(DataError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn merge_fills_holes() {
        let x = array![[1.0, 5.0]];
        let ds = IncompleteDataset::new(x, mask(&[&[1, 0]]), Schema::continuous(2)).unwrap();
        let fills = BTreeMap::from([((0, 1), 7.0)]);
        let out = merge_imputations(&ds, &fills).unwrap();
        assert_eq!(out.values(), array![[1.0, 7.0]].view());
    }

    #[test]
    fn merge_without_holes_is_noop() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let ds = apply_mask(&x, &Mask::all_observed(2, 2), None).unwrap();
        let out = merge_imputations(&ds, &BTreeMap::new()).unwrap();
        assert_eq!(out.values(), x.view());
    }

    #[test]
    fn merge_rejects_contract_violations() {
        let x = array![[1.0, 2.0]];
        let ds = IncompleteDataset::new(x, mask(&[&[1, 0]]), Schema::continuous(2)).unwrap();
        let err = merge_imputations(&ds, &BTreeMap::from([((0, 0), 9.0), ((0, 1), 1.0)])).unwrap_err();
        assert!(err.to_string().contains("observed cell overwrite"));
        let err = merge_imputations(&ds, &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, DataError::MissingFill { row: 0, col: 1 }));
    }

    #[test]
    fn split_partitions_by_target_mask() {
        let x = array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0]];
        let m = mask(&[&[1, 1], &[1, 0], &[1, 1]]);
        let ds = apply_mask(&x, &Mask::all_observed(3, 2), None).unwrap();
        let current = ImputedDataset::from_parts(&ds, x.clone()).unwrap();
        let split = split_column(&current, &m, 1).unwrap();
        assert_eq!(split.target_obs, vec![10.0, 30.0]);
        assert_eq!(split.regressors_obs, array![[1.0], [3.0]]);
        assert_eq!(split.regressors_mis, array![[2.0]]);
        assert_eq!(split.mis_row_indices, vec![1]);

        let split = split_column(&current, &m, 0).unwrap();
        assert_eq!(split.regressors_mis.nrows(), 0);
        assert!(split.mis_row_indices.is_empty());

        let none = mask(&[&[0, 1], &[0, 1], &[0, 1]]);
        let split = split_column(&current, &none, 0).unwrap();
        assert!(split.target_obs.is_empty());
        assert_eq!(split.mis_row_indices.len(), 3);

        assert!(matches!(
            split_column(&current, &m, 2),
            Err(DataError::ColumnOutOfRange { index: 2, .. })
        ));
    }

    #[test]
    fn kind_inference() {
        let mut raw = Array2::zeros((1000, 3));
        for i in 0..1000 {
            raw[[i, 0]] = (i % 2) as f64;
            raw[[i, 1]] = i as f64 * 0.37 + 0.01;
            raw[[i, 2]] = (i % 25 + 1) as f64;
        }
        let kinds = infer_column_kinds(&raw, 20).unwrap();
        assert_eq!(kinds[0], ColumnKind::Categorical { cardinality: 2 });
        assert_eq!(kinds[1], ColumnKind::Continuous);
        assert_eq!(kinds[2], ColumnKind::Continuous);
        let kinds = infer_column_kinds(&raw, 25).unwrap();
        assert_eq!(kinds[2], ColumnKind::Categorical { cardinality: 25 });
    }

    #[test]
    fn kind_inference_rejects_fully_missing() {
        let raw = array![[1.0, f64::NAN], [2.0, f64::NAN]];
        let err = infer_column_kinds(&raw, 20).unwrap_err();
        assert!(err.to_string().contains("fully missing column"));
    }

    #[test]
    fn encoding_maps_levels_to_codes() {
        let raw = array![[0.0, 1.5], [1.0, 2.5], [f64::NAN, 3.5], [0.0, 1.0]];
        let (coded, schema) = prepare_complete(&raw, 20).unwrap();
        assert_eq!(schema.kinds[0], ColumnKind::Categorical { cardinality: 2 });
        assert_eq!(schema.kinds[1], ColumnKind::Continuous);
        assert_eq!(coded[[0, 0]], 1.0);
        assert_eq!(coded[[1, 0]], 2.0);
        assert!(coded[[2, 0]].is_nan());
        assert_eq!(coded[[3, 1]], 1.0);
        assert_eq!(schema.levels[0], Some(vec!["0".to_string(), "1".to_string()]));
    }

    #[test]
    fn categorical_codes_validated() {
        let x = array![[1.0, 3.0], [2.0, 1.0]];
        let schema = Schema::with_kinds(vec![
            ColumnKind::Continuous,
            ColumnKind::Categorical { cardinality: 2 },
        ]);
        assert!(matches!(
            IncompleteDataset::new(x, Mask::all_observed(2, 2), schema),
            Err(DataError::InvalidCategory { .. })
        ));
    }

    fn matrix_and_mask() -> impl Strategy<Value = (Array2<f64>, Mask)> {
        (1usize..8, 2usize..6).prop_flat_map(|(n, d)| {
            (
                prop::collection::vec(-1e6f64..1e6, n * d),
                prop::collection::vec(any::<bool>(), n * d),
            )
                .prop_map(move |(v, b)| {
                    (
                        Array2::from_shape_vec((n, d), v).unwrap(),
                        Mask::new(Array2::from_shape_vec((n, d), b).unwrap()),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn merge_reverses_apply_mask((x, m) in matrix_and_mask()) {
            let ds = apply_mask(&x, &m, None).unwrap();
            prop_assert_eq!(ds.values().iter().filter(|v| v.is_nan()).count(), m.n_missing());
            let fills: BTreeMap<_, _> = m.missing_cells().map(|(i, j)| ((i, j), x[[i, j]])).collect();
            let out = merge_imputations(&ds, &fills).unwrap();
            for (a, b) in out.values().iter().zip(x.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn split_covers_all_rows((x, m) in matrix_and_mask()) {
            let ds = apply_mask(&x, &Mask::all_observed(x.nrows(), x.ncols()), None).unwrap();
            let current = ImputedDataset::from_parts(&ds, x.clone()).unwrap();
            for d in 0..x.ncols() {
                let s = split_column(&current, &m, d).unwrap();
                prop_assert_eq!(s.target_obs.len() + s.mis_row_indices.len(), x.nrows());
                prop_assert_eq!(s.regressors_obs.nrows(), s.target_obs.len());
                prop_assert_eq!(s.regressors_mis.nrows(), s.mis_row_indices.len());
                prop_assert_eq!(s.regressors_obs.ncols(), x.ncols() - 1);
            }
        }
    }
}

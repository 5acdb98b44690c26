//! Accuracy of imputations against ground truth, plus AUROC.
//!
//! Continuous columns are min-max normalized by the truth column's range
//! before differencing; a constant truth column contributes zero error.
//! Categorical columns use the discrete metric: a cell costs 1 when the
//! label differs, and the per-column distribution distance is total
//! variation (the Wasserstein-1 distance under that metric).

use std::collections::BTreeMap;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ColumnKind, ImputedDataset, Mask};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no missing cells to evaluate")]
    NoMissing,
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("AUROC needs both classes present")]
    SingleClass,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnEval {
    pub rmse: f64,
    pub wd: f64,
    pub n_missing: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Pooled over every missing cell.
    pub rmse: f64,
    /// Mean of per-column distances over columns with missing cells.
    pub wd: f64,
    pub per_column: BTreeMap<String, ColumnEval>,
}

struct ColumnErrors {
    col: usize,
    sq_sum: f64,
    n: usize,
    wd: f64,
}

fn check_shapes(imputed: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>, mask: &Mask) -> Result<()> {
    if imputed.dim() != truth.dim() {
        return Err(MetricsError::ShapeMismatch(imputed.dim(), truth.dim()));
    }
    if mask.shape() != truth.dim() {
        return Err(MetricsError::ShapeMismatch(mask.shape(), truth.dim()));
    }
    Ok(())
}

fn column_errors(
    imputed: ArrayView2<'_, f64>,
    truth: ArrayView2<'_, f64>,
    mask: &Mask,
    kinds: &[ColumnKind],
) -> Result<Vec<ColumnErrors>> {
    check_shapes(imputed, truth, mask)?;
    let mut out = Vec::new();
    for (col, kind) in kinds.iter().enumerate().take(truth.ncols()) {
        let rows: Vec<usize> = (0..truth.nrows()).filter(|&i| !mask.is_observed(i, col)).collect();
        if rows.is_empty() {
            continue;
        }
        let est: Vec<f64> = rows.iter().map(|&i| imputed[[i, col]]).collect();
        let tru: Vec<f64> = rows.iter().map(|&i| truth[[i, col]]).collect();
        let (sq_sum, wd) = if kind.is_categorical() {
            let sq = est.iter().zip(&tru).filter(|(a, b)| a != b).count() as f64;
            (sq, total_variation(&est, &tru))
        } else {
            let column = truth.column(col);
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = hi - lo;
            if !(range > 0.0) {
                (0.0, 0.0)
            } else {
                let e: Vec<f64> = est.iter().map(|v| (v - lo) / range).collect();
                let t: Vec<f64> = tru.iter().map(|v| (v - lo) / range).collect();
                let sq = e.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum();
                (sq, wasserstein1(&e, &t))
            }
        };
        out.push(ColumnErrors {
            col,
            sq_sum,
            n: rows.len(),
            wd,
        });
    }
    if out.is_empty() {
        return Err(MetricsError::NoMissing);
    }
    Ok(out)
}

/// RMSE over missing cells with every column treated as continuous.
pub fn rmse_missing(imputed: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>, mask: &Mask) -> Result<f64> {
    let kinds = vec![ColumnKind::Continuous; truth.ncols()];
    rmse_missing_typed(imputed, truth, mask, &kinds)
}

pub fn rmse_missing_typed(
    imputed: ArrayView2<'_, f64>,
    truth: ArrayView2<'_, f64>,
    mask: &Mask,
    kinds: &[ColumnKind],
) -> Result<f64> {
    let cols = column_errors(imputed, truth, mask, kinds)?;
    let sq: f64 = cols.iter().map(|c| c.sq_sum).sum();
    let n: usize = cols.iter().map(|c| c.n).sum();
    Ok((sq / n as f64).sqrt())
}

/// Mean per-column W1 over missing cells, every column continuous.
pub fn wasserstein_missing(imputed: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>, mask: &Mask) -> Result<f64> {
    let kinds = vec![ColumnKind::Continuous; truth.ncols()];
    wasserstein_missing_typed(imputed, truth, mask, &kinds)
}

pub fn wasserstein_missing_typed(
    imputed: ArrayView2<'_, f64>,
    truth: ArrayView2<'_, f64>,
    mask: &Mask,
    kinds: &[ColumnKind],
) -> Result<f64> {
    let cols = column_errors(imputed, truth, mask, kinds)?;
    Ok(cols.iter().map(|c| c.wd).sum::<f64>() / cols.len() as f64)
}

/// Full report for an imputation whose source mask marks the evaluated cells.
pub fn evaluate(imputed: &ImputedDataset, truth: ArrayView2<'_, f64>) -> Result<EvalReport> {
    let cols = column_errors(imputed.values(), truth, imputed.source_mask(), imputed.kinds())?;
    let sq: f64 = cols.iter().map(|c| c.sq_sum).sum();
    let n: usize = cols.iter().map(|c| c.n).sum();
    let per_column = cols
        .iter()
        .map(|c| {
            (
                imputed.schema().names[c.col].clone(),
                ColumnEval {
                    rmse: (c.sq_sum / c.n as f64).sqrt(),
                    wd: c.wd,
                    n_missing: c.n,
                },
            )
        })
        .collect();
    Ok(EvalReport {
        rmse: (sq / n as f64).sqrt(),
        wd: cols.iter().map(|c| c.wd).sum::<f64>() / cols.len() as f64,
        per_column,
    })
}

/// Exact Wasserstein-1 distance between two empirical distributions on the
/// line: the integral of `|F_a - F_b|`. Equal sizes reduce to the mean
/// absolute difference of the sorted samples.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        return a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    let mut last = a[0].min(b[0]);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        let fa = i as f64 / na;
        let fb = j as f64 / nb;
        total += (fa - fb).abs() * (next - last);
        while i < a.len() && a[i] <= next {
            i += 1;
        }
        while j < b.len() && b[j] <= next {
            j += 1;
        }
        last = next;
    }
    total
}

/// Total variation between the label distributions of two samples.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let mut diff: BTreeMap<u64, f64> = BTreeMap::new();
    for &v in a {
        *diff.entry(v.to_bits()).or_default() += 1.0 / a.len() as f64;
    }
    for &v in b {
        *diff.entry(v.to_bits()).or_default() -= 1.0 / b.len() as f64;
    }
    0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
}

/// Mann-Whitney AUROC with midranks for ties.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tied block i..=j shares the mean rank
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += midrank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
        assert_eq!(auroc(&[0.1, 0.2], &[true, true]), Err(MetricsError::SingleClass));
    }

    #[test]
    fn rmse_examples() {
        let truth = array![[0.0, 5.0], [1.0, 5.0], [0.5, 5.0]];
        let mask = Mask::from_rows(&[vec![1, 1], vec![0, 0], vec![0, 1]]).unwrap();
        assert_eq!(rmse_missing(truth.view(), truth.view(), &mask).unwrap(), 0.0);
        let mut imputed = truth.clone();
        imputed[[1, 0]] = 0.9;
        imputed[[2, 0]] = 0.8;
        // constant column contributes zero error but counts as a cell
        imputed[[1, 1]] = 7.0;
        let r = rmse_missing(imputed.view(), truth.view(), &mask).unwrap();
        assert!((r - ((0.01 + 0.09) / 3.0f64).sqrt()).abs() < 1e-12);
        let two = Mask::from_rows(&[vec![1, 1], vec![0, 1], vec![0, 1]]).unwrap();
        let r = rmse_missing(imputed.view(), truth.view(), &two).unwrap();
        assert!((r - 0.05f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            rmse_missing(truth.view(), truth.view(), &Mask::all_observed(3, 2)),
            Err(MetricsError::NoMissing)
        );
    }

    #[test]
    fn wasserstein_examples() {
        let truth = array![[0.0, 1.0], [10.0, 2.0], [4.0, 3.0]];
        let mask = Mask::from_rows(&[vec![1, 1], vec![1, 1], vec![0, 1]]).unwrap();
        let mut imputed = truth.clone();
        imputed[[2, 0]] = 7.0;
        let w = wasserstein_missing(imputed.view(), truth.view(), &mask).unwrap();
        assert!((w - 0.3).abs() < 1e-12);
        // permutation within a column costs nothing
        let both = Mask::from_rows(&[vec![0, 1], vec![0, 1], vec![1, 1]]).unwrap();
        let mut swapped = truth.clone();
        swapped[[0, 0]] = 10.0;
        swapped[[1, 0]] = 0.0;
        assert_eq!(wasserstein_missing(swapped.view(), truth.view(), &both).unwrap(), 0.0);
        assert!(rmse_missing(swapped.view(), truth.view(), &both).unwrap() > 0.0);
    }

    #[test]
    fn unequal_sizes_use_cdf_integral() {
        assert!((wasserstein1(&[0.0], &[0.0, 1.0]) - 0.5).abs() < 1e-12);
        assert!((wasserstein1(&[0.0, 1.0, 2.0], &[1.0]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn categorical_columns_use_label_mismatch() {
        let truth = array![[1.0, 0.0], [2.0, 1.0], [3.0, 2.0], [1.0, 3.0]];
        let mask = Mask::from_rows(&[vec![0, 1], vec![0, 1], vec![1, 1], vec![1, 1]]).unwrap();
        let mut imputed = truth.clone();
        imputed[[0, 0]] = 2.0;
        imputed[[1, 0]] = 1.0;
        let kinds = [ColumnKind::Categorical { cardinality: 3 }, ColumnKind::Continuous];
        assert_eq!(rmse_missing_typed(imputed.view(), truth.view(), &mask, &kinds).unwrap(), 1.0);
        assert_eq!(wasserstein_missing_typed(imputed.view(), truth.view(), &mask, &kinds).unwrap(), 0.0);
    }
}

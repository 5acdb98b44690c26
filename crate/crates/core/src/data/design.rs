use ndarray::{Array2, ArrayView2};

use super::ColumnKind;

/// Expands categorical columns into `K - 1` indicator columns (level 1 is
/// the reference) and copies continuous columns through.
pub fn design_matrix(regressors: ArrayView2<'_, f64>, kinds: &[ColumnKind]) -> Array2<f64> {
    assert_eq!(regressors.ncols(), kinds.len(), "one kind per regressor column");
    let width: usize = kinds
        .iter()
        .map(|k| k.cardinality().map_or(1, |c| c - 1))
        .sum();
    let mut out = Array2::zeros((regressors.nrows(), width));
    let mut at = 0;
    for (j, kind) in kinds.iter().enumerate() {
        match kind.cardinality() {
            None => {
                out.column_mut(at).assign(&regressors.column(j));
                at += 1;
            }
            Some(k) => {
                for (i, &v) in regressors.column(j).iter().enumerate() {
                    let code = v.round() as usize;
                    if (2..=k).contains(&code) {
                        out[[i, at + code - 2]] = 1.0;
                    }
                }
                at += k - 1;
            }
        }
    }
    out
}

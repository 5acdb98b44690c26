//! Small dense routines: Cholesky solves for ridge and a one-sided Jacobi
//! SVD for matrix completion. Sized for desk-scale problems.

use ndarray::{Array1, Array2, ArrayView2};

/// Cholesky factor `l` of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    /// Returns `None` if `a` is not numerically positive definite.
    pub fn factor(a: &Array2<f64>) -> Option<Self> {
        let n = a.nrows();
        debug_assert_eq!(a.ncols(), n);
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut diag = a[[j, j]];
            for k in 0..j {
                diag -= l[[j, k]] * l[[j, k]];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return None;
            }
            let ljj = diag.sqrt();
            l[[j, j]] = ljj;
            for i in j + 1..n {
                let mut v = a[[i, j]];
                for k in 0..j {
                    v -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = v / ljj;
            }
        }
        Some(Cholesky { l })
    }

    pub fn lower(&self) -> &Array2<f64> {
        &self.l
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let l = &self.l;
        let n = l.nrows();
        debug_assert_eq!(b.len(), n);
        let mut y = Array1::<f64>::zeros(n);
        for i in 0..n {
            let mut v = b[i];
            for k in 0..i {
                v -= l[[i, k]] * y[k];
            }
            y[i] = v / l[[i, i]];
        }
        let mut x = Array1::<f64>::zeros(n);
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= l[[k, i]] * x[k];
            }
            x[i] = v / l[[i, i]];
        }
        x
    }
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    Cholesky::factor(a).map(|c| c.solve(b))
}

/// Thin SVD `a = u diag(s) vt` with singular values in descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Vec<f64>,
    pub vt: Array2<f64>,
}

impl Svd {
    /// Rebuilds `u diag(f(s)) vt`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Array2<f64> {
        let shrunk: Vec<f64> = self.s.iter().map(|&s| f(s)).collect();
        let (m, r) = self.u.dim();
        let n = self.vt.ncols();
        let mut out = Array2::zeros((m, n));
        for k in 0..r {
            let sk = shrunk[k];
            if sk == 0.0 {
                continue;
            }
            for i in 0..m {
                let uik = self.u[[i, k]] * sk;
                if uik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[[i, j]] += uik * self.vt[[k, j]];
                }
            }
        }
        out
    }
}

const MAX_SWEEPS: usize = 100;

/// One-sided (Hestenes) Jacobi SVD. Returns `None` when the sweeps fail to
/// orthogonalize the columns.
pub fn svd(a: ArrayView2<'_, f64>) -> Option<Svd> {
    let (m, n) = a.dim();
    if m < n {
        let t = svd(a.t())?;
        return Some(Svd {
            u: t.vt.t().to_owned(),
            s: t.s,
            vt: t.u.t().to_owned(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return None;
    }
    // column-major working copies
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let eps = 1e-15;
    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for i in 0..m {
                        alpha += cp[i] * cp[i];
                        beta += cq[i] * cq[i];
                        gamma += cp[i] * cq[i];
                    }
                    (alpha, beta, gamma)
                };
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let mut sigma: Vec<(f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (c.iter().map(|x| x * x).sum::<f64>().sqrt(), j))
        .collect();
    sigma.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut u = Array2::zeros((m, n));
    let mut vt = Array2::zeros((n, n));
    let mut s = Vec::with_capacity(n);
    for (k, &(sk, j)) in sigma.iter().enumerate() {
        s.push(sk);
        if sk > 0.0 {
            for i in 0..m {
                u[[i, k]] = cols[j][i] / sk;
            }
        }
        for i in 0..n {
            vt[[k, i]] = v[j][i];
        }
    }
    Some(Svd { u, s, vt })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let x = array![1.0, -2.0, 0.5];
        let b = a.dot(&x);
        let got = cholesky_solve(&a, &b).unwrap();
        for (g, e) in got.iter().zip(x.iter()) {
            assert!((g - e).abs() < 1e-12);
        }
        assert!(cholesky_solve(&array![[1.0, 2.0], [2.0, 1.0]], &array![1.0, 1.0]).is_none());
    }

    fn check_svd(a: &Array2<f64>) {
        let svd = svd(a.view()).unwrap();
        let back = svd.reconstruct_with(|s| s);
        for (x, y) in back.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        // orthonormal right factor
        let vvt = svd.vt.dot(&svd.vt.t());
        for i in 0..vvt.nrows() {
            for j in 0..vvt.ncols() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((vvt[[i, j]] - e).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn svd_reconstructs_tall_and_wide() {
        let a = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.5], [7.0, 8.0, 9.0], [1.0, 0.0, -1.0]];
        check_svd(&a);
        check_svd(&a.t().to_owned());
    }

    #[test]
    fn svd_of_rank_one() {
        let u = array![1.0, 2.0, -1.0, 0.5];
        let v = array![3.0, -1.0, 2.0];
        let a = Array2::from_shape_fn((4, 3), |(i, j)| u[i] * v[j]);
        let svd = svd(a.view()).unwrap();
        let expected = (u.dot(&u) * v.dot(&v)).sqrt();
        assert!((svd.s[0] - expected).abs() < 1e-10);
        assert!(svd.s[1].abs() < 1e-10 && svd.s[2].abs() < 1e-10);
    }
}

//! Multi-response least squares via Householder QR with column-norm pivoting.
//!
//! Columns are equilibrated to unit norm before factorization, so the
//! condition diagnostic `|r_11| / |r_kk|` is invariant to the units of each
//! regressor.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default ceiling on the design condition diagnostic.
pub const DEFAULT_MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// `k x q`: coefficient column `c` maps regressors to response `c`.
    pub coef: DMatrix<f64>,
    /// `n x q`
    pub resid: DMatrix<f64>,
    pub condition: f64,
}

/// Solves `min ||Y - X B||_F` for `B`.
pub fn solve(x: &DMatrix<f64>, y: &DMatrix<f64>, max_condition: f64) -> Result<LeastSquares> {
    let (n, k) = x.shape();
    assert_eq!(y.nrows(), n, "design and response row counts differ");
    let q = y.ncols();
    if k == 0 {
        return Ok(LeastSquares {
            coef: DMatrix::zeros(0, q),
            resid: y.clone(),
            condition: 1.0,
        });
    }
    if n < k {
        return Err(Error::InsufficientData {
            needed: k,
            available: n,
        });
    }

    let mut scale = vec![0.0; k];
    let mut a = x.clone();
    for (j, s) in scale.iter_mut().enumerate() {
        let norm = a.column(j).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::SingularDesign {
                condition: f64::INFINITY,
                threshold: max_condition,
            });
        }
        *s = norm;
        a.column_mut(j).unscale_mut(norm);
    }

    let mut b = y.clone();
    let qr = PivotedQr::factor(&mut a, &mut b);
    let condition = qr.condition();
    if !(condition <= max_condition) {
        return Err(Error::SingularDesign {
            condition,
            threshold: max_condition,
        });
    }

    // back substitution on the leading k rows of Q'Y
    let mut z = b.rows(0, k).into_owned();
    for c in 0..q {
        for i in (0..k).rev() {
            let mut acc = z[(i, c)];
            for j in i + 1..k {
                acc -= a[(i, j)] * z[(j, c)];
            }
            z[(i, c)] = acc / qr.diag[i];
        }
    }
    let mut coef = DMatrix::zeros(k, q);
    for (i, &col) in qr.perm.iter().enumerate() {
        for c in 0..q {
            coef[(col, c)] = z[(i, c)] / scale[col];
        }
    }
    let resid = y - x * &coef;
    Ok(LeastSquares {
        coef,
        resid,
        condition,
    })
}

struct PivotedQr {
    /// `perm[i]` is the original column placed at position `i`.
    perm: Vec<usize>,
    diag: Vec<f64>,
}

impl PivotedQr {
    /// Factors `a` in place (upper triangle holds `R` off the diagonal) and
    /// overwrites `b` with `Q' b`.
    fn factor(a: &mut DMatrix<f64>, b: &mut DMatrix<f64>) -> Self {
        let (n, k) = a.shape();
        let q = b.ncols();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut diag = vec![0.0; k];
        let mut v = vec![0.0; n];

        for i in 0..k {
            let tail_norm2 = |m: &DMatrix<f64>, j: usize| -> f64 {
                let col = &m.as_slice()[j * n + i..(j + 1) * n];
                col.iter().map(|x| x * x).sum()
            };
            let (best, _) = (i..k)
                .map(|j| (j, tail_norm2(a, j)))
                .fold((i, -1.0), |acc, (j, s)| if s > acc.1 { (j, s) } else { acc });
            if best != i {
                a.swap_columns(i, best);
                perm.swap(i, best);
            }

            let col = &a.as_slice()[i * n + i..(i + 1) * n];
            let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                diag[i] = 0.0;
                continue;
            }
            let alpha = if col[0] > 0.0 { -norm } else { norm };
            let len = n - i;
            v[..len].copy_from_slice(col);
            v[0] -= alpha;
            let vtv: f64 = v[..len].iter().map(|x| x * x).sum();
            diag[i] = alpha;
            if vtv == 0.0 {
                continue;
            }
            let tau = 2.0 / vtv;

            let data = a.as_mut_slice();
            data[i * n + i] = alpha;
            for x in &mut data[i * n + i + 1..(i + 1) * n] {
                *x = 0.0;
            }
            for j in i + 1..k {
                reflect(&mut data[j * n + i..(j + 1) * n], &v[..len], tau);
            }
            let bd = b.as_mut_slice();
            for c in 0..q {
                reflect(&mut bd[c * n + i..(c + 1) * n], &v[..len], tau);
            }
        }
        Self { perm, diag }
    }

    fn condition(&self) -> f64 {
        let mut hi = 0.0f64;
        let mut lo = f64::INFINITY;
        for d in &self.diag {
            hi = hi.max(d.abs());
            lo = lo.min(d.abs());
        }
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }
}

#[inline]
fn reflect(x: &mut [f64], v: &[f64], tau: f64) {
    let dot: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
    let s = tau * dot;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pseudo(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
        let mut s = seed;
        DMatrix::from_fn(n, k, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    #[test]
    fn exact_system_recovered() {
        let x = pseudo(40, 5, 1);
        let beta = pseudo(5, 2, 2);
        let y = &x * &beta;
        let ls = solve(&x, &y, DEFAULT_MAX_CONDITION).unwrap();
        assert!((ls.coef - beta).abs().max() < 1e-12);
        assert!(ls.resid.abs().max() < 1e-12);
    }

    #[test]
    fn residuals_orthogonal_to_regressors() {
        let x = pseudo(200, 7, 3);
        let y = pseudo(200, 3, 4);
        let ls = solve(&x, &y, DEFAULT_MAX_CONDITION).unwrap();
        let g = x.transpose() * &ls.resid;
        assert!(g.abs().max() < 1e-12);
    }

    #[test]
    fn matches_normal_equations() {
        let x = pseudo(100, 4, 5);
        let y = pseudo(100, 2, 6);
        let ls = solve(&x, &y, DEFAULT_MAX_CONDITION).unwrap();
        let xtx = x.transpose() * &x;
        let oracle = xtx.lu().solve(&(x.transpose() * &y)).unwrap();
        assert!((ls.coef - oracle).abs().max() < 1e-10);
    }

    #[test]
    fn collinear_columns_rejected() {
        let mut x = pseudo(30, 3, 7);
        let c0 = x.column(0).into_owned();
        x.column_mut(2).copy_from(&(c0 * 2.0));
        let y = pseudo(30, 1, 8);
        match solve(&x, &y, DEFAULT_MAX_CONDITION) {
            Err(Error::SingularDesign { condition, .. }) => assert!(condition > 1e10),
            other => panic!("expected singular design, got {other:?}"),
        }
    }

    #[test]
    fn zero_column_rejected() {
        let mut x = pseudo(10, 2, 9);
        x.column_mut(1).fill(0.0);
        assert!(matches!(
            solve(&x, &pseudo(10, 1, 1), DEFAULT_MAX_CONDITION),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn condition_is_unit_invariant() {
        let x = pseudo(60, 3, 10);
        let mut scaled = x.clone();
        scaled.column_mut(1).scale_mut(1e6);
        let y = pseudo(60, 1, 11);
        let a = solve(&x, &y, DEFAULT_MAX_CONDITION).unwrap();
        let b = solve(&scaled, &y, DEFAULT_MAX_CONDITION).unwrap();
        assert!((a.condition - b.condition).abs() < 1e-9 * a.condition);
    }

    #[test]
    fn empty_design_returns_response() {
        let y = pseudo(5, 2, 12);
        let ls = solve(&DMatrix::zeros(5, 0), &y, DEFAULT_MAX_CONDITION).unwrap();
        assert_eq!(ls.resid, y);
        assert_eq!(ls.coef.shape(), (0, 2));
    }
}

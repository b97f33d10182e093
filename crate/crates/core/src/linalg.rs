//! Small dense LU with partial pivoting, generic over the jet scalar so the
//! same factorization differentiates through solves when run over duals.
//! Pivots are chosen and checked on the value part.

use crate::error::{Error, Result};
use crate::expr::JetScalar;

pub(crate) const PIVOT_TOL: f64 = 1e-12;

pub(crate) struct Lu<S> {
    n: usize,
    a: Vec<S>,
    piv: Vec<usize>,
    pub min_pivot: f64,
}

/// Factors the row-major `n x n` matrix; fails with `SingularMatrix` if any
/// pivot's value part drops to `tol` or below in absolute value.
pub(crate) fn lu_factor<S: JetScalar>(mut a: Vec<S>, n: usize, tol: f64) -> Result<Lu<S>> {
    debug_assert_eq!(a.len(), n * n);
    let mut piv = Vec::with_capacity(n);
    let mut min_pivot = f64::INFINITY;
    for k in 0..n {
        let mut p = k;
        let mut best = a[k * n + k].re().abs();
        for i in k + 1..n {
            let cand = a[i * n + k].re().abs();
            if cand > best {
                best = cand;
                p = i;
            }
        }
        if !(best > tol) {
            return Err(Error::SingularMatrix { pivot: best });
        }
        min_pivot = min_pivot.min(best);
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
        }
        piv.push(p);
        let d = a[k * n + k];
        for i in k + 1..n {
            let l = a[i * n + k] / d;
            a[i * n + k] = l;
            for j in k + 1..n {
                a[i * n + j] = a[i * n + j] - l * a[k * n + j];
            }
        }
    }
    Ok(Lu { n, a, piv, min_pivot })
}

impl<S: JetScalar> Lu<S> {
    pub fn solve(&self, b: &[S]) -> Vec<S> {
        debug_assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc = acc - self.a[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc = acc - self.a[i * n + j] * x[j];
            }
            x[i] = acc / self.a[i * n + i];
        }
        x
    }
}

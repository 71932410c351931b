//! Dense LU factorization with partial pivoting.

use ndarray::{Array2, ArrayView2};

/// Row-pivoted LU factors of a square matrix, packed in one array
/// (unit-diagonal `L` below, `U` on and above the diagonal).
#[derive(Debug, Clone)]
pub struct Lu {
    factors: Array2<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factors `a`. Returns `None` when a pivot is zero or smaller than
    /// `n · ε · max|a|`, i.e. the matrix is singular to working precision.
    pub fn factor(a: ArrayView2<'_, f64>) -> Option<Self> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        let mut f = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = n as f64 * f64::EPSILON * scale;

        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, f[[i, k]].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pivot > tiny) {
                return None;
            }
            if p != k {
                for j in 0..n {
                    f.swap([k, j], [p, j]);
                }
                perm.swap(k, p);
            }
            let d = f[[k, k]];
            for i in k + 1..n {
                let l = f[[i, k]] / d;
                f[[i, k]] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        f[[i, j]] -= l * f[[k, j]];
                    }
                }
            }
        }
        Some(Self { factors: f, perm })
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: ArrayView2<'_, f64>) -> Array2<f64> {
        let n = self.factors.nrows();
        assert_eq!(b.nrows(), n);
        let mut x = Array2::zeros(b.dim());
        for (i, &p) in self.perm.iter().enumerate() {
            x.row_mut(i).assign(&b.row(p));
        }
        let f = &self.factors;
        for col in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[[i, col]];
                for j in 0..i {
                    s -= f[[i, j]] * x[[j, col]];
                }
                x[[i, col]] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[[i, col]];
                for j in i + 1..n {
                    s -= f[[i, j]] * x[[j, col]];
                }
                x[[i, col]] = s / f[[i, i]];
            }
        }
        x
    }
}

/// Largest absolute entry.
pub fn max_abs(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

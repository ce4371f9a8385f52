//! Small dense complex linear algebra kernels.
//!
//! Everything here operates on matrices whose limiting dimension is tiny
//! (pilot length B, terminal count K, eavesdropper antennas N_E), so plain
//! textbook factorizations beat any BLAS detour. All routines are
//! deterministic: same input bits, same output bits.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::Error;

/// Cholesky factorization `A = L L^H` of a Hermitian positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<Complex64>,
}

impl Cholesky {
    pub fn new(a: &Array2<Complex64>) -> Result<Self, Error> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "Cholesky needs a square matrix");
        let mut l = Array2::<Complex64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for p in 0..j {
                d -= l[(j, p)].norm_sqr();
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let ljj = d.sqrt();
            l[(j, j)] = Complex64::new(ljj, 0.0);
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: ArrayView1<Complex64>) -> Array1<Complex64> {
        let n = self.l.nrows();
        let mut x = b.to_owned();
        // forward: L y = b
        for i in 0..n {
            let mut s = x[i];
            for p in 0..i {
                s -= self.l[(i, p)] * x[p];
            }
            x[i] = s / self.l[(i, i)].re;
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in i + 1..n {
                s -= self.l[(p, i)].conj() * x[p];
            }
            x[i] = s / self.l[(i, i)].re;
        }
        x
    }

    /// Explicit inverse, column by column. Fine for the tiny systems here.
    pub fn inverse(&self) -> Array2<Complex64> {
        let n = self.l.nrows();
        let mut inv = Array2::<Complex64>::zeros((n, n));
        for j in 0..n {
            let mut e = Array1::<Complex64>::zeros(n);
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.solve(e.view());
            inv.column_mut(j).assign(&col);
        }
        inv
    }
}

/// 1-norm (maximum absolute column sum).
pub fn norm_1(a: ArrayView2<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number via the explicit inverse. Exact enough as a
/// guard; only computed once per pilot set.
pub fn condition_1(a: &Array2<Complex64>, chol: &Cholesky) -> f64 {
    norm_1(a.view()) * norm_1(chol.inverse().view())
}

/// Hermitian quadratic form `x^H A x` (returns the real part; the imaginary
/// part is zero for Hermitian `A` up to roundoff).
pub fn quad_form(a: ArrayView2<Complex64>, x: ArrayView1<Complex64>) -> f64 {
    let n = x.len();
    let mut acc = Complex64::ZERO;
    for i in 0..n {
        let mut row = Complex64::ZERO;
        for j in 0..n {
            row += a[(i, j)] * x[j];
        }
        acc += x[i].conj() * row;
    }
    acc.re
}

pub fn dot_conj(x: ArrayView1<Complex64>, y: ArrayView1<Complex64>) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(x: ArrayView1<Complex64>) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius(a: ArrayView2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Householder QR of a tall matrix (n x k, n >= k), kept in factored form so
/// both the thin orthonormal basis of the column span and an orthonormal
/// basis of its orthogonal complement can be extracted without ever forming
/// the full n x n Q.
#[derive(Debug, Clone)]
pub struct HouseholderQr {
    /// Reflector j lives in column j, rows j.. ; the diagonal of R is kept
    /// separately for the rank check.
    v: Array2<Complex64>,
    r_diag: Vec<f64>,
    n: usize,
    k: usize,
}

impl HouseholderQr {
    pub fn new(a: &Array2<Complex64>) -> Result<Self, Error> {
        let (n, k) = a.dim();
        assert!(n >= k, "QR expects a tall matrix");
        let mut work = a.clone();
        let mut v = Array2::<Complex64>::zeros((n, k));
        let mut r_diag = Vec::with_capacity(k);
        for j in 0..k {
            let col_norm: f64 = (j..n).map(|i| work[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            let x0 = work[(j, j)];
            // beta = phase(x0) * ||x||, v = x + beta e_j
            let phase = if x0.norm() > 0.0 {
                x0 / x0.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            let beta = phase * col_norm;
            let mut vn = 0.0;
            for i in j..n {
                let mut vi = work[(i, j)];
                if i == j {
                    vi += beta;
                }
                v[(i, j)] = vi;
                vn += vi.norm_sqr();
            }
            r_diag.push(col_norm);
            if vn == 0.0 {
                continue; // column already zero; rank check happens below
            }
            // apply H_j = I - 2 v v^H / (v^H v) to the remaining columns
            for c in j..k {
                let mut s = Complex64::ZERO;
                for i in j..n {
                    s += v[(i, j)].conj() * work[(i, c)];
                }
                s *= 2.0 / vn;
                for i in j..n {
                    let vij = v[(i, j)];
                    work[(i, c)] -= s * vij;
                }
            }
        }
        Ok(Self { v, r_diag, n, k })
    }

    /// Relative rank check: smallest |r_jj| against the largest.
    pub fn rank_ok(&self, rel_tol: f64) -> Result<(), Error> {
        let max = self.r_diag.iter().cloned().fold(0.0, f64::max);
        for (j, &d) in self.r_diag.iter().enumerate() {
            if d <= rel_tol * max || max == 0.0 {
                return Err(Error::RankDeficient { col: j });
            }
        }
        Ok(())
    }

    /// Apply Q = H_0 H_1 ... H_{k-1} to a matrix in place.
    fn apply_q(&self, m: &mut Array2<Complex64>) {
        let cols = m.ncols();
        for j in (0..self.k).rev() {
            let vn: f64 = (j..self.n).map(|i| self.v[(i, j)].norm_sqr()).sum();
            if vn == 0.0 {
                continue;
            }
            for c in 0..cols {
                let mut s = Complex64::ZERO;
                for i in j..self.n {
                    s += self.v[(i, j)].conj() * m[(i, c)];
                }
                s *= 2.0 / vn;
                for i in j..self.n {
                    let vij = self.v[(i, j)];
                    m[(i, c)] -= s * vij;
                }
            }
        }
    }

    /// Thin orthonormal basis of the column span (n x k).
    pub fn span_basis(&self) -> Array2<Complex64> {
        let mut m = Array2::<Complex64>::zeros((self.n, self.k));
        for j in 0..self.k {
            m[(j, j)] = Complex64::new(1.0, 0.0);
        }
        self.apply_q(&mut m);
        m
    }

    /// Orthonormal basis of the orthogonal complement (n x (n-k)).
    pub fn complement_basis(&self) -> Array2<Complex64> {
        let l = self.n - self.k;
        let mut m = Array2::<Complex64>::zeros((self.n, l));
        for j in 0..l {
            m[(self.k + j, j)] = Complex64::new(1.0, 0.0);
        }
        self.apply_q(&mut m);
        m
    }
}

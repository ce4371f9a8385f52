//! Matched-filter data precoding and null-space artificial-noise precoding,
//! both computed once per coherence block from the channel estimates at the
//! precoder-design slot.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::Error;
use crate::linalg::{self, HouseholderQr};

const RANK_TOL: f64 = 1e-10;

/// Matched-filter columns f_k = ghat_k / ||ghat_k||.
pub fn mf_precoder(g_hat: &Array2<Complex64>) -> Result<Array2<Complex64>, Error> {
    let mut f = g_hat.clone();
    for k in 0..f.ncols() {
        let norm = linalg::norm_sqr(f.column(k)).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNormEstimate { k });
        }
        f.column_mut(k).mapv_inplace(|z| z / norm);
    }
    Ok(f)
}

/// Orthonormal basis of span(ghat_1, .., ghat_K): the K directions data
/// beamforming lives in. The artificial-noise subspace is its complement,
/// reached either explicitly through [`ns_an_precoder`] or implicitly through
/// [`projected_leakage`].
pub fn span_basis(g_hat: &Array2<Complex64>) -> Result<Array2<Complex64>, Error> {
    let qr = HouseholderQr::new(g_hat)?;
    qr.rank_ok(RANK_TOL)?;
    Ok(qr.span_basis())
}

/// N x L orthonormal basis A of the orthogonal complement of span(Ghat),
/// L = N - K: Ghat^H A = 0 and A^H A = I_L.
///
/// The basis is deterministic given Ghat but not unique; the AN vector is
/// isotropic, so no measured statistic can depend on the choice.
pub fn ns_an_precoder(g_hat: &Array2<Complex64>) -> Result<Array2<Complex64>, Error> {
    let qr = HouseholderQr::new(g_hat)?;
    qr.rank_ok(RANK_TOL)?;
    Ok(qr.complement_basis())
}

/// AN leakage power of a channel vector through the projector identity:
/// g^H A A^H g = ||g||^2 - ||Q^H g||^2 with Q = span basis. Costs O(N K)
/// instead of O(N L).
pub fn projected_leakage(q_span: ArrayView2<Complex64>, g: ArrayView1<Complex64>) -> f64 {
    let total = linalg::norm_sqr(g);
    let mut inside = 0.0;
    for c in 0..q_span.ncols() {
        inside += linalg::dot_conj(q_span.column(c), g).norm_sqr();
    }
    total - inside
}

/// Downlink transmit vector x = sqrt(p) F s + sqrt(q) A z.
pub fn transmit_signal(
    f: &Array2<Complex64>,
    a: &Array2<Complex64>,
    p: f64,
    q: f64,
    s: ArrayView1<Complex64>,
    z: ArrayView1<Complex64>,
) -> Array1<Complex64> {
    let n = f.nrows();
    let sp = p.sqrt();
    let sq = q.sqrt();
    let mut x = Array1::<Complex64>::zeros(n);
    for k in 0..f.ncols() {
        let coef = sp * s[k];
        for r in 0..n {
            x[r] += coef * f[(r, k)];
        }
    }
    if sq > 0.0 {
        for c in 0..a.ncols() {
            let coef = sq * z[c];
            for r in 0..n {
                x[r] += coef * a[(r, c)];
            }
        }
    }
    x
}

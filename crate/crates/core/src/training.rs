//! Uplink training: pilot construction, the received-signal model during the
//! training window, and the LMMSE estimate of the phase-rotated channel at
//! the precoder-design slot.
//!
//! The stacked-observation estimator has Kronecker structure, so estimation
//! never touches a (B·N)-dimensional system: the B x B training covariance is
//! factorized once per configuration, each terminal reduces to a length-B
//! combining row, and a trial costs O(B^2 N) regardless of N.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;

use crate::config::{PilotDesign, ValidatedConfig};
use crate::error::Error;
use crate::linalg::{self, Cholesky};
use crate::stochastic::{cn_sample, theta_diag, ChannelSet, PhaseTrajectories};

/// Condition guard for the training covariance.
const SIGMA_COND_LIMIT: f64 = 1e12;

/// Pilot sequences plus every derived training-phase matrix: the per-terminal
/// correlation kernels W_k, the covariance Sigma of one antenna's stacked
/// training observations, and its factorization. Immutable; shared across
/// trials.
#[derive(Debug, Clone)]
pub struct PilotSet {
    /// B x K, column k is pilot omega_k with omega_k^H omega_k = B p_tau.
    pub omega: Array2<Complex64>,
    /// K matrices, [W_k]_{ij} = omega_k(i) conj(omega_k(j)) e^{-(s/2)|i-j|}
    /// with s = sigma_psi^2 + sigma_phi^2.
    pub w: Vec<Array2<Complex64>>,
    /// Sigma = sum_k beta_k W_k + xi_UL I_B (Hermitian positive definite).
    pub sigma: Array2<Complex64>,
    chol: Cholesky,
    cond: f64,
    decay_half: f64,
}

impl PilotSet {
    /// Diagonal of the training-window decay matrix at slot `t`:
    /// entry b is e^{-(s/2)|t-b|}, b = 1..B.
    pub fn theta_sigma(&self, t: usize) -> Array1<f64> {
        let b_len = self.omega.nrows();
        Array1::from_shape_fn(b_len, |b| {
            (-self.decay_half * t.abs_diff(b + 1) as f64).exp()
        })
    }

    /// Solve Sigma x = rhs.
    pub fn solve_sigma(&self, rhs: &Array1<Complex64>) -> Array1<Complex64> {
        self.chol.solve(rhs.view())
    }

    /// 1-norm condition number of Sigma.
    pub fn sigma_cond(&self) -> f64 {
        self.cond
    }

    /// Decayed pilot Theta_sigma(t) * omega_k.
    pub fn decayed_pilot(&self, k: usize, t: usize) -> Array1<Complex64> {
        let th = self.theta_sigma(t);
        let mut w = self.omega.column(k).to_owned();
        for (b, z) in w.iter_mut().enumerate() {
            *z *= th[b];
        }
        w
    }

    /// LMMSE combining row for terminal `k` at slot `t`: the estimate is
    /// ghat_k(t) = sum_b c_b y_tr(b). Returned as the vector of c_b.
    pub fn combining_row(&self, cfg: &ValidatedConfig, k: usize, t: usize) -> Array1<Complex64> {
        // c = beta_k omega_k^H Theta_sigma(t) Sigma^{-1}; c^H solves Sigma x = w.
        let w = self.decayed_pilot(k, t);
        let mut x = self.solve_sigma(&w);
        for z in x.iter_mut() {
            *z = cfg.beta[k] * z.conj();
        }
        x
    }

    /// Channel-estimate quality lambda_k(t) =
    /// beta_k omega_k^H Theta_sigma(t) Sigma^{-1} Theta_sigma(t) omega_k.
    pub fn lambda(&self, cfg: &ValidatedConfig, k: usize, t: usize) -> f64 {
        let w = self.decayed_pilot(k, t);
        let x = self.solve_sigma(&w);
        cfg.beta[k] * linalg::dot_conj(w.view(), x.view()).re
    }
}

/// Build pilots and the derived training statistics.
///
/// `time_orthogonal`: terminal k transmits sqrt(B p_tau) in slot k and stays
/// silent otherwise. `unitary_overlapping`: the first K columns of a scaled
/// B x B DFT family, all terminals transmitting in every slot.
pub fn make_pilots(cfg: &ValidatedConfig) -> Result<PilotSet, Error> {
    let b_len = cfg.b;
    let k_cnt = cfg.k;
    let mut omega = Array2::<Complex64>::zeros((b_len, k_cnt));
    match cfg.pilot_design {
        PilotDesign::TimeOrthogonal => {
            let amp = (b_len as f64 * cfg.p_tau).sqrt();
            for k in 0..k_cnt {
                omega[(k, k)] = Complex64::new(amp, 0.0);
            }
        }
        PilotDesign::UnitaryOverlapping => {
            let amp = cfg.p_tau.sqrt();
            for k in 0..k_cnt {
                for b in 0..b_len {
                    let ang = -2.0 * std::f64::consts::PI * (b as f64) * (k as f64) / b_len as f64;
                    omega[(b, k)] = Complex64::from_polar(amp, ang);
                }
            }
        }
    }

    let s_sum = cfg.sigma_sq_sum();
    let mut w = Vec::with_capacity(k_cnt);
    for k in 0..k_cnt {
        let mut wk = Array2::<Complex64>::zeros((b_len, b_len));
        for i in 0..b_len {
            for j in 0..b_len {
                let decay = (-s_sum / 2.0 * i.abs_diff(j) as f64).exp();
                wk[(i, j)] = omega[(i, k)] * omega[(j, k)].conj() * decay;
            }
        }
        w.push(wk);
    }

    let mut sigma = Array2::<Complex64>::eye(b_len) * Complex64::new(cfg.xi_ul, 0.0);
    for (wk, &beta_k) in w.iter().zip(&cfg.beta) {
        sigma = sigma + wk * Complex64::new(beta_k, 0.0);
    }

    let chol = Cholesky::new(&sigma)?;
    let cond = linalg::condition_1(&sigma, &chol);
    if !cond.is_finite() || cond > SIGMA_COND_LIMIT {
        return Err(Error::IllConditioned { cond });
    }
    Ok(PilotSet {
        omega,
        w,
        sigma,
        chol,
        cond,
        decay_half: s_sum / 2.0,
    })
}

/// Received training signal, one N-vector per slot t = 1..B (column t-1):
/// y_tr(t) = sum_k Theta_k(t) g_k omega_k(t) + noise.
pub fn simulate_training(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    channels: &ChannelSet,
    traj: &PhaseTrajectories,
    rng: &mut impl Rng,
) -> Array2<Complex64> {
    let mut y = Array2::<Complex64>::zeros((cfg.n, cfg.b));
    for t in 1..=cfg.b {
        for k in 0..cfg.k {
            let omega_kt = pilots.omega[(t - 1, k)];
            if omega_kt == Complex64::ZERO {
                continue;
            }
            let th = theta_diag(cfg, traj, k, t);
            for n in 0..cfg.n {
                let rot = Complex64::from_polar(1.0, th.angle(n));
                y[(n, t - 1)] += rot * channels.g[(n, k)] * omega_kt;
            }
        }
        if cfg.xi_ul > 0.0 {
            for n in 0..cfg.n {
                y[(n, t - 1)] += cn_sample(rng, cfg.xi_ul);
            }
        }
    }
    y
}

/// Per-terminal combining rows at the precoder-design slot, precomputed once
/// per configuration.
#[derive(Debug, Clone)]
pub struct Estimator {
    /// B x K, column k is the combining row of terminal k at t0.
    pub c: Array2<Complex64>,
    /// lambda_k(t0) for every terminal.
    pub lambda_t0: Vec<f64>,
}

impl Estimator {
    pub fn new(cfg: &ValidatedConfig, pilots: &PilotSet) -> Self {
        let mut c = Array2::<Complex64>::zeros((cfg.b, cfg.k));
        let mut lambda_t0 = Vec::with_capacity(cfg.k);
        for k in 0..cfg.k {
            c.column_mut(k).assign(&pilots.combining_row(cfg, k, cfg.t0));
            lambda_t0.push(pilots.lambda(cfg, k, cfg.t0));
        }
        Estimator { c, lambda_t0 }
    }
}

/// LMMSE estimates from the received training block: N x K, column k is
/// ghat_k = sum_b c_b(k) y_tr(b).
pub fn lmmse_estimate(est: &Estimator, y_train: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, b_len) = y_train.dim();
    let k_cnt = est.c.ncols();
    let mut g_hat = Array2::<Complex64>::zeros((n, k_cnt));
    for k in 0..k_cnt {
        for b in 0..b_len {
            let coef = est.c[(b, k)];
            if coef == Complex64::ZERO {
                continue;
            }
            for r in 0..n {
                g_hat[(r, k)] += coef * y_train[(r, b)];
            }
        }
    }
    g_hat
}

/// Per-antenna estimation-error variance at slot `t`: beta_k (1 - lambda_k(t)).
pub fn error_covariance_coeff(cfg: &ValidatedConfig, pilots: &PilotSet, k: usize, t: usize) -> f64 {
    cfg.beta[k] * (1.0 - pilots.lambda(cfg, k, t))
}

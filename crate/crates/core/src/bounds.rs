//! Closed-form evaluation of every analytic quantity: per-terminal rate
//! lower bounds, the eavesdropper capacity upper bound, ergodic secrecy
//! rates, and the power-split optimizer.
//!
//! ## Moment closed forms
//!
//! The SINR of terminal k at slot t is built from four expectations: the
//! coherent beam gain, its second moment, the multiuser interference powers,
//! and the artificial-noise leakage. All four are driven by quadratic forms
//! of the LMMSE combining row over two-time phase-correlation kernels:
//!
//! * antenna pairs fed by the same oscillator keep the full pairwise slot
//!   correlation e^{-(sigma_psi^2+sigma_phi^2)|b-b'|/2} between training
//!   slots b, b';
//! * pairs on different oscillators decorrelate through the independent
//!   drifts from each training slot out to the evaluated slot t,
//!   e^{-sigma_psi^2 ((t-b)+(t-b'))/2}, while the terminal's own phase is
//!   common to all antennas and cancels in every squared magnitude.
//!
//! For single-slot (time-orthogonal) pilots the kernels collapse to scalars
//! and the forms are exact at finite N; Monte Carlo agrees to estimator
//! noise. For overlapping pilots the leakage form slightly overestimates
//! the loss at strong phase noise (a few percent at N >= 64) because the
//! contamination part of the estimate is treated as fully misaligned; the
//! simulator is the reference where the difference matters.
//!
//! Two independent assemblies of the same SINR are exposed: a moment-composed
//! form (source of truth) and a packaged constant form; they must agree to
//! 1e-9 relative, which the test suite enforces.

use ndarray::Array2;
use num_complex::Complex64;

use crate::config::ValidatedConfig;
use crate::error::Error;
use crate::linalg;
use crate::training::PilotSet;

/// Closed-form upper bound on the eavesdropper's ergodic capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EveBound {
    /// log2(1 + p N_E / (q (L - N_E))) bits per slot.
    Finite(f64),
    /// phi = 1: no artificial noise, the bound diverges and the secrecy
    /// rate is zero.
    Unbounded,
}

/// Every constant of the packaged rate form for one (terminal, slot) pair.
#[derive(Debug, Clone)]
pub struct RateTerms {
    pub k: usize,
    pub t: usize,
    pub n: usize,
    pub l: usize,
    /// Estimate quality lambda_k(t0).
    pub lambda: f64,
    /// lambda_k(t0) e^{-(sigma_psi^2+sigma_phi^2)|t-t0|}.
    pub lambda_bar: f64,
    /// Cross-oscillator coherence e^{-sigma_psi^2 |t-t0|}.
    pub epsilon: f64,
    /// Pilot-contamination quotients of the multiuser interference, one per
    /// interferer (entry k is zero). Zero for time-orthogonal pilots at any
    /// phase-noise level; nonzero for overlapping pilots under drift.
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// Multiuser interference, summed over interferers, normalized by beta_k.
    pub a_k: f64,
    /// Variance of the desired-signal gain, normalized by beta_k.
    pub c_k: f64,
    /// AN leakage normalized by beta_k: (N - K)(1 - self-coherence).
    pub mu_k: f64,
    /// Noise constant K xi_DL / (beta_k P_T).
    pub xi_k: f64,
    /// Load ratio K / N.
    pub beta_ratio: f64,
}

/// Combining rows and kernel quadratic forms for one configuration.
/// Construction costs a handful of B x B solves; evaluation per (k, l, t)
/// is O(B^2).
#[derive(Debug, Clone)]
pub struct MomentKernels {
    /// Column k: LMMSE combining row of terminal k at t0.
    c: Array2<Complex64>,
    lambda_t0: Vec<f64>,
    n: usize,
    k_cnt: usize,
    n_o: usize,
    b_len: usize,
    t0: usize,
    beta: Vec<f64>,
    s_sum: f64,
    s_psi_sq: f64,
    s_phi_sq: f64,
    omega: Array2<Complex64>,
}

impl MomentKernels {
    pub fn new(cfg: &ValidatedConfig, pilots: &PilotSet) -> Self {
        let mut c = Array2::<Complex64>::zeros((cfg.b, cfg.k));
        let mut lambda_t0 = Vec::with_capacity(cfg.k);
        for k in 0..cfg.k {
            c.column_mut(k).assign(&pilots.combining_row(cfg, k, cfg.t0));
            lambda_t0.push(pilots.lambda(cfg, k, cfg.t0));
        }
        MomentKernels {
            c,
            lambda_t0,
            n: cfg.n,
            k_cnt: cfg.k,
            n_o: cfg.n_o,
            b_len: cfg.b,
            t0: cfg.t0,
            beta: cfg.beta.clone(),
            s_sum: cfg.sigma_sq_sum(),
            s_psi_sq: cfg.sigma_psi_sq(),
            s_phi_sq: cfg.sigma_phi() * cfg.sigma_phi(),
            omega: pilots.omega.clone(),
        }
    }

    pub fn lambda_t0(&self, k: usize) -> f64 {
        self.lambda_t0[k]
    }

    /// Quadratic form of terminal `rows`'s combining row over the two-time
    /// kernel of terminal `kernel`'s pilot at slot `t`.
    fn coherence_quad(&self, kernel: usize, rows: usize, t: usize) -> f64 {
        let same = 1.0 / self.n_o as f64;
        let cross = 1.0 - same;
        let c = self.c.column(rows);
        let om = self.omega.column(kernel);
        let mut acc = Complex64::ZERO;
        for i in 0..self.b_len {
            let ci = c[i].conj() * om[i];
            if ci == Complex64::ZERO {
                continue;
            }
            let di = t.abs_diff(i + 1) as f64;
            for j in 0..self.b_len {
                let cj = c[j] * om[j].conj();
                if cj == Complex64::ZERO {
                    continue;
                }
                let dj = t.abs_diff(j + 1) as f64;
                let dij = i.abs_diff(j) as f64;
                let kernel_val = same * (-self.s_sum / 2.0 * dij).exp()
                    + cross
                        * (-self.s_phi_sq / 2.0 * dij).exp()
                        * (-self.s_psi_sq / 2.0 * (di + dj)).exp();
                acc += ci * cj * kernel_val;
            }
        }
        acc.re
    }

    /// Self-coherence of terminal k's estimate against its slot-t effective
    /// channel; equals lambda at zero drift and decays with it.
    pub fn self_coherence(&self, k: usize, t: usize) -> f64 {
        self.coherence_quad(k, k, t) / self.lambda_t0[k]
    }

    /// Coherent beam gain: sqrt(beta_k N lambda_k) e^{-(s/2)|t-t0|}.
    pub fn signal_gain(&self, k: usize, t: usize) -> f64 {
        (self.beta[k] * self.n as f64 * self.lambda_t0[k]).sqrt()
            * (-self.s_sum / 2.0 * t.abs_diff(self.t0) as f64).exp()
    }

    /// E[|g_k^H(t) f_k|^2] = beta_k (1 + (N-1) * self-coherence).
    pub fn desired_second_moment(&self, k: usize, t: usize) -> f64 {
        self.beta[k] * (1.0 + (self.n as f64 - 1.0) * self.self_coherence(k, t))
    }

    /// Variance of the beam gain: second moment minus squared mean. This is
    /// the residual self-noise the rate bound treats as Gaussian.
    pub fn desired_signal_variance(&self, k: usize, t: usize) -> f64 {
        let g = self.signal_gain(k, t);
        self.desired_second_moment(k, t) - g * g
    }

    /// E[|g_k^H(t) f_l|^2] for an interferer l != k.
    pub fn interference_power(&self, k: usize, l: usize, t: usize) -> f64 {
        assert_ne!(k, l, "interference is defined for l != k");
        let quad = self.coherence_quad(k, l, t);
        self.beta[k]
            + self.n as f64 * self.beta[k] * self.beta[k] * quad
                / (self.beta[l] * self.lambda_t0[l])
    }

    /// AN leakage with the null-space precoder:
    /// beta_k (N - K)(1 - self-coherence).
    pub fn an_leakage(&self, k: usize, t: usize) -> f64 {
        self.beta[k] * (self.n - self.k_cnt) as f64 * (1.0 - self.self_coherence(k, t))
    }
}

/// Pilot-contamination quotients of the interference carried by terminal
/// l's beam onto terminal k, in the t0-anchored constant packaging.
pub fn contamination_quotients(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    k: usize,
    l: usize,
) -> (f64, f64) {
    let w_l = pilots.decayed_pilot(l, cfg.t0);
    let w_k = pilots.decayed_pilot(k, cfg.t0);
    let x = pilots.solve_sigma(&w_l);
    let den = linalg::dot_conj(w_l.view(), x.view()).re;
    let beta_k = cfg.beta[k];
    let x1 = (cfg.n as f64 / cfg.n_o as f64) * beta_k * beta_k
        * linalg::quad_form(pilots.w[k].view(), x.view())
        / den;
    let cross = linalg::dot_conj(w_k.view(), x.view());
    let x2 = cfg.n as f64 * (1.0 - 1.0 / cfg.n_o as f64) * (beta_k * cross.norm()).powi(2) / den;
    (x1, x2)
}

pub fn signal_gain(cfg: &ValidatedConfig, pilots: &PilotSet, k: usize, t: usize) -> f64 {
    MomentKernels::new(cfg, pilots).signal_gain(k, t)
}

pub fn desired_second_moment(cfg: &ValidatedConfig, pilots: &PilotSet, k: usize, t: usize) -> f64 {
    MomentKernels::new(cfg, pilots).desired_second_moment(k, t)
}

pub fn desired_signal_variance(cfg: &ValidatedConfig, pilots: &PilotSet, k: usize, t: usize) -> f64 {
    MomentKernels::new(cfg, pilots).desired_signal_variance(k, t)
}

pub fn interference_power(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    k: usize,
    l: usize,
    t: usize,
) -> f64 {
    MomentKernels::new(cfg, pilots).interference_power(k, l, t)
}

pub fn an_leakage(cfg: &ValidatedConfig, pilots: &PilotSet, k: usize, t: usize) -> f64 {
    MomentKernels::new(cfg, pilots).an_leakage(k, t)
}

/// All packaged constants for terminal k at slot t. Everything here is
/// independent of phi, so sweeps over the power split reuse one `RateTerms`.
pub fn rate_terms(cfg: &ValidatedConfig, pilots: &PilotSet, k: usize, t: usize) -> RateTerms {
    let kern = MomentKernels::new(cfg, pilots);
    rate_terms_with(&kern, cfg, pilots, k, t)
}

pub fn rate_terms_with(
    kern: &MomentKernels,
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    k: usize,
    t: usize,
) -> RateTerms {
    let n = cfg.n;
    let lambda = kern.lambda_t0(k);
    let dt = t.abs_diff(cfg.t0) as f64;
    let lambda_bar = lambda * (-cfg.sigma_sq_sum() * dt).exp();
    let epsilon = (-cfg.sigma_psi_sq() * dt).exp();
    let beta_k = cfg.beta[k];
    let mut x1 = vec![0.0; cfg.k];
    let mut x2 = vec![0.0; cfg.k];
    let mut a_k = 0.0;
    for l in 0..cfg.k {
        if l == k {
            continue;
        }
        let (q1, q2) = contamination_quotients(cfg, pilots, k, l);
        x1[l] = q1;
        x2[l] = q2;
        a_k += kern.interference_power(k, l, t) / beta_k;
    }
    let coh = kern.self_coherence(k, t);
    let c_k = 1.0 + (n as f64 - 1.0) * coh - n as f64 * lambda_bar;
    let mu_k = (n - cfg.k) as f64 * (1.0 - coh);
    let xi_k = cfg.k as f64 * cfg.xi_dl / (beta_k * cfg.p_t());
    RateTerms {
        k,
        t,
        n,
        l: cfg.l(),
        lambda,
        lambda_bar,
        epsilon,
        x1,
        x2,
        a_k,
        c_k,
        mu_k,
        xi_k,
        beta_ratio: cfg.k as f64 / n as f64,
    }
}

/// Packaged rate form: `log2(1 + lambda_bar phi N / ((a + c - r mu) phi +
/// r mu + xi))` with r = K/L so that the constants reproduce the composed
/// SINR identically.
pub fn rate_from_terms(terms: &RateTerms, phi: f64) -> Result<f64, Error> {
    let r = (terms.n - terms.l) as f64 / terms.l as f64; // K / L
    let den = (terms.a_k + terms.c_k - r * terms.mu_k) * phi + r * terms.mu_k + terms.xi_k;
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::NonPositiveDenominator { value: den });
    }
    Ok((1.0 + terms.lambda_bar * phi * terms.n as f64 / den).log2())
}

/// Packaged-path rate lower bound at the configured phi.
pub fn rate_lower_bound(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    k: usize,
    t: usize,
) -> Result<f64, Error> {
    rate_from_terms(&rate_terms(cfg, pilots, k, t), cfg.phi)
}

/// Moment-composed rate: assembles the SINR directly from the four moment
/// closed forms and the power loads. Independent code path from
/// [`rate_lower_bound`]; the two must agree to 1e-9 relative.
pub fn rate_lower_bound_composed(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    k: usize,
    t: usize,
) -> Result<f64, Error> {
    let kern = MomentKernels::new(cfg, pilots);
    let (p, q) = cfg.power_split();
    let gain = kern.signal_gain(k, t);
    let second = kern.desired_second_moment(k, t);
    let interference: f64 = (0..cfg.k)
        .filter(|&l| l != k)
        .map(|l| kern.interference_power(k, l, t))
        .sum();
    let leak = kern.an_leakage(k, t);
    let num = p * gain * gain;
    let den = p * interference + p * (second - gain * gain) + q * leak + cfg.xi_dl;
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::NonPositiveDenominator { value: den });
    }
    Ok((1.0 + num / den).log2())
}

/// Closed-form eavesdropper capacity upper bound. Needs L > N_E and a
/// nonzero AN load.
pub fn eve_capacity_upper(cfg: &ValidatedConfig) -> Result<EveBound, Error> {
    let l = cfg.l();
    if l <= cfg.n_e {
        return Err(Error::EveBoundUndefined { l, n_e: cfg.n_e });
    }
    let (p, q) = cfg.power_split();
    if q == 0.0 {
        return Ok(EveBound::Unbounded);
    }
    let gamma = p * cfg.n_e as f64 / (q * (l - cfg.n_e) as f64);
    Ok(EveBound::Finite((1.0 + gamma).log2()))
}

/// Ergodic secrecy-rate lower bound for terminal k:
/// (1/T) sum over data slots of [rate(t) - Ce]^+, evaluated on the
/// configured slot grid with each grid point weighting the slots it covers.
pub fn secrecy_rate_bound(cfg: &ValidatedConfig, pilots: &PilotSet, k: usize) -> Result<f64, Error> {
    let ce = match eve_capacity_upper(cfg)? {
        EveBound::Finite(c) => c,
        EveBound::Unbounded => return Ok(0.0),
    };
    let kern = MomentKernels::new(cfg, pilots);
    let mut acc = 0.0;
    for (t, w) in cfg.grid_weights() {
        let terms = rate_terms_with(&kern, cfg, pilots, k, t);
        let r = rate_from_terms(&terms, cfg.phi)?;
        acc += w * (r - ce).max(0.0);
    }
    Ok(acc / cfg.t as f64)
}

/// Secrecy-rate bound as a function of the power split, evaluated over a
/// sorted grid. The slot-level constants are phi-free and computed once.
pub fn secrecy_curve(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    k: usize,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, Error> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let kern = MomentKernels::new(cfg, pilots);
    let weighted_terms: Vec<(RateTerms, f64)> = cfg
        .grid_weights()
        .into_iter()
        .map(|(t, w)| (rate_terms_with(&kern, cfg, pilots, k, t), w))
        .collect();

    let mut out = Vec::with_capacity(grid.len());
    for &phi in &grid {
        let probe = cfg.with_phi(phi);
        let secrecy = match eve_capacity_upper(&probe)? {
            EveBound::Unbounded => 0.0,
            EveBound::Finite(ce) => {
                let mut acc = 0.0;
                for (terms, w) in &weighted_terms {
                    acc += w * (rate_from_terms(terms, phi)? - ce).max(0.0);
                }
                acc / cfg.t as f64
            }
        };
        out.push((phi, secrecy));
    }
    Ok(out)
}

/// Grid search for the secrecy-maximizing power split. Ties break toward
/// smaller phi (more artificial noise).
pub fn optimize_phi(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    k: usize,
    grid: &[f64],
) -> Result<(f64, f64), Error> {
    let curve = secrecy_curve(cfg, pilots, k, grid)?;
    let mut best = curve[0];
    for &(phi, s) in &curve[1..] {
        if s > best.1 {
            best = (phi, s);
        }
    }
    Ok(best)
}

/// Default phi grid for the optimizer: 0.01, 0.02, .., 0.99.
pub fn default_phi_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

//! System parameters shared by every other module, plus validation and the
//! dB/degree unit conversions that happen exactly once.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use crate::error::ConfigError;

/// How the uplink pilot sequences occupy the training window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotDesign {
    /// Each terminal transmits its whole pilot energy in its own slot.
    /// Pilots stay orthogonal under phase drift, so the training covariance
    /// is exactly diagonal for any phase-noise level.
    TimeOrthogonal,
    /// Scaled DFT columns: all terminals transmit in every slot. Orthogonal
    /// at zero phase noise, but drift during training leaks the other
    /// terminals' channels into each estimate (pilot contamination).
    UnitaryOverlapping,
}

impl PilotDesign {
    pub fn as_str(&self) -> &'static str {
        match self {
            PilotDesign::TimeOrthogonal => "time_orthogonal",
            PilotDesign::UnitaryOverlapping => "unitary_overlapping",
        }
    }
}

impl FromStr for PilotDesign {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "time_orthogonal" => Ok(PilotDesign::TimeOrthogonal),
            "unitary_overlapping" => Ok(PilotDesign::UnitaryOverlapping),
            other => Err(format!(
                "unknown pilot_design '{other}' (expected time_orthogonal | unitary_overlapping)"
            )),
        }
    }
}

impl fmt::Display for PilotDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Every scalar parameter of the model. Angles in degrees and the power
/// budget in dB, exactly as they appear in configuration files; `validate`
/// converts once and caches the linear/radian values.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Base-station antennas.
    pub n: usize,
    /// Single-antenna terminals.
    pub k: usize,
    /// Eavesdropper antennas.
    pub n_e: usize,
    /// Free-running local oscillators at the base station; antennas are
    /// split into `n_o` equal groups, one oscillator each.
    pub n_o: usize,
    /// Pilot length in slots (>= k).
    pub b: usize,
    /// Coherence block length in slots.
    pub t: usize,
    /// Total downlink power budget, dB.
    pub p_t_db: f64,
    /// Fraction of the budget spent on data (rest feeds artificial noise).
    pub phi: f64,
    /// Uplink pilot power per symbol (linear).
    pub p_tau: f64,
    /// Phase increment standard deviation per slot at the BS oscillators, degrees.
    pub sigma_psi_deg: f64,
    /// Phase increment standard deviation per slot at the terminals, degrees.
    pub sigma_phi_deg: f64,
    /// Per-terminal path losses (length k).
    pub beta: Vec<f64>,
    /// Eavesdropper path loss.
    pub beta_e: f64,
    /// Thermal noise power at the base station (uplink).
    pub xi_ul: f64,
    /// Thermal noise power at each terminal (downlink).
    pub xi_dl: f64,
    pub pilot_design: PilotDesign,
    /// Slot whose channel estimate feeds the precoders (in [b+1, t]).
    pub t0: usize,
    /// Monte Carlo realization count.
    pub trials: usize,
    pub seed: u64,
    /// Data slots to evaluate, each a subset of {b+1, .., t}.
    pub t_grid: Vec<usize>,
}

impl SystemConfig {
    /// Check every invariant, normalize `t_grid`, and cache unit conversions.
    /// All violations are reported together.
    pub fn validate(self) -> Result<ValidatedConfig, ConfigError> {
        let mut v = Vec::new();
        let mut cfg = self;
        if cfg.n == 0 || cfg.k == 0 || cfg.n_e == 0 || cfg.n_o == 0 {
            v.push("N, K, N_E, N_o must be positive".to_string());
        }
        if cfg.n_o > 0 && !cfg.n.is_multiple_of(cfg.n_o) {
            v.push(format!("N mod N_o != 0 (N={}, N_o={})", cfg.n, cfg.n_o));
        }
        if cfg.n <= cfg.k {
            v.push(format!("L = N - K must be positive (N={}, K={})", cfg.n, cfg.k));
        }
        if cfg.b < cfg.k {
            v.push(format!("B >= K required (B={}, K={})", cfg.b, cfg.k));
        }
        if cfg.t <= cfg.b {
            v.push(format!("T > B required (T={}, B={})", cfg.t, cfg.b));
        }
        if !(cfg.phi > 0.0 && cfg.phi <= 1.0) {
            v.push(format!("phi must lie in (0, 1] (phi={})", cfg.phi));
        }
        if cfg.p_tau <= 0.0 || cfg.p_tau.is_nan() {
            v.push(format!("p_tau must be positive (p_tau={})", cfg.p_tau));
        }
        if cfg.sigma_psi_deg < 0.0 || cfg.sigma_phi_deg < 0.0 {
            v.push("phase-noise standard deviations must be >= 0".to_string());
        }
        if cfg.beta.len() != cfg.k {
            v.push(format!(
                "beta must list one path loss per terminal (got {}, K={})",
                cfg.beta.len(),
                cfg.k
            ));
        }
        if cfg.beta.iter().any(|b| *b < 0.0) {
            v.push("path losses beta must be >= 0".to_string());
        }
        if cfg.beta_e < 0.0 {
            v.push("beta_E must be >= 0".to_string());
        }
        if cfg.xi_ul < 0.0 || cfg.xi_dl < 0.0 {
            v.push("noise powers xi_UL, xi_DL must be >= 0".to_string());
        }
        if cfg.t0 <= cfg.b || cfg.t0 > cfg.t {
            v.push(format!("t0 must lie in [B+1, T] (t0={}, B={}, T={})", cfg.t0, cfg.b, cfg.t));
        }
        if cfg.trials == 0 {
            v.push("trials must be >= 1".to_string());
        }
        cfg.t_grid.sort_unstable();
        cfg.t_grid.dedup();
        if cfg.t_grid.is_empty() {
            v.push("t_grid must be nonempty".to_string());
        } else if cfg.t_grid[0] <= cfg.b || *cfg.t_grid.last().unwrap() > cfg.t {
            v.push(format!(
                "t_grid must be a subset of {{B+1, .., T}} (got [{}, {}], B={}, T={})",
                cfg.t_grid[0],
                cfg.t_grid.last().unwrap(),
                cfg.b,
                cfg.t
            ));
        }
        if !v.is_empty() {
            return Err(ConfigError { violations: v });
        }

        let mut warnings = Vec::new();
        if cfg.n - cfg.k <= cfg.n_e {
            warnings.push(format!(
                "L = {} <= N_E = {}: eavesdropper upper bound undefined",
                cfg.n - cfg.k,
                cfg.n_e
            ));
        }
        if cfg.phi == 1.0 {
            warnings.push("phi = 1: no artificial noise, secrecy rate is zero".to_string());
        }

        let deg = std::f64::consts::PI / 180.0;
        Ok(ValidatedConfig {
            p_t: 10f64.powf(cfg.p_t_db / 10.0),
            sigma_psi: cfg.sigma_psi_deg * deg,
            sigma_phi: cfg.sigma_phi_deg * deg,
            warnings,
            cfg,
        })
    }
}

/// A [`SystemConfig`] that passed validation, with cached linear-power and
/// radian conversions. Immutable; share freely across worker threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    cfg: SystemConfig,
    p_t: f64,
    sigma_psi: f64,
    sigma_phi: f64,
    warnings: Vec<String>,
}

impl Deref for ValidatedConfig {
    type Target = SystemConfig;
    fn deref(&self) -> &SystemConfig {
        &self.cfg
    }
}

impl ValidatedConfig {
    /// Total power budget, linear.
    pub fn p_t(&self) -> f64 {
        self.p_t
    }

    /// BS phase increment standard deviation, radians.
    pub fn sigma_psi(&self) -> f64 {
        self.sigma_psi
    }

    /// Terminal phase increment standard deviation, radians.
    pub fn sigma_phi(&self) -> f64 {
        self.sigma_phi
    }

    /// sigma_psi^2 + sigma_phi^2 (radians^2) — the combined per-slot drift.
    pub fn sigma_sq_sum(&self) -> f64 {
        self.sigma_psi * self.sigma_psi + self.sigma_phi * self.sigma_phi
    }

    pub fn sigma_psi_sq(&self) -> f64 {
        self.sigma_psi * self.sigma_psi
    }

    /// Null-space dimension L = N - K.
    pub fn l(&self) -> usize {
        self.cfg.n - self.cfg.k
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Per-terminal data power and per-dimension artificial-noise power:
    /// p = phi P_T / K, q = (1 - phi) P_T / L.
    pub fn power_split(&self) -> (f64, f64) {
        let p = self.cfg.phi * self.p_t / self.cfg.k as f64;
        let q = (1.0 - self.cfg.phi) * self.p_t / self.l() as f64;
        (p, q)
    }

    /// Same config with a different power split, bypassing re-validation.
    /// Panics if `phi` is outside (0, 1]; callers pass grid values.
    pub fn with_phi(&self, phi: f64) -> ValidatedConfig {
        assert!(phi > 0.0 && phi <= 1.0, "phi grid value outside (0, 1]");
        let mut out = self.clone();
        out.cfg.phi = phi;
        out
    }

    /// Last slot any computation needs a phase trajectory for.
    pub fn horizon(&self) -> usize {
        self.cfg.t0.max(*self.cfg.t_grid.last().unwrap())
    }

    /// Weight of each `t_grid` slot: how many data slots of {B+1, .., T} it
    /// represents (nearest grid point; ties go to the earlier one). Weights
    /// sum to T - B, so grid subsampling keeps the secrecy average unbiased.
    pub fn grid_weights(&self) -> Vec<(usize, f64)> {
        let grid = &self.cfg.t_grid;
        let mut counts = vec![0usize; grid.len()];
        for s in self.cfg.b + 1..=self.cfg.t {
            let mut best = 0usize;
            let mut best_d = usize::MAX;
            for (i, &g) in grid.iter().enumerate() {
                let d = s.abs_diff(g);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            counts[best] += 1;
        }
        grid.iter().zip(counts).map(|(&g, c)| (g, c as f64)).collect()
    }
}

/// Evenly spaced data slots, endpoints included: the default evaluation grid
/// when scanning a long coherence block is wasteful.
pub fn auto_t_grid(b: usize, t: usize, points: usize) -> Vec<usize> {
    let lo = b + 1;
    let hi = t;
    let m = points.max(1);
    if hi <= lo || m == 1 {
        return vec![(lo + hi) / 2];
    }
    let span = (hi - lo) as f64;
    let mut grid: Vec<usize> = (0..m)
        .map(|i| lo + (span * i as f64 / (m - 1) as f64).round() as usize)
        .collect();
    grid.sort_unstable();
    grid.dedup();
    grid
}

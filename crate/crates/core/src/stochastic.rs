//! Random objects of the model: block-fading channels, Wiener phase-noise
//! trajectories, thermal noise and symbol draws, under a deterministic
//! counter-based seeding discipline.
//!
//! Seeding contract: the root seed keys a ChaCha stream cipher and the trial
//! index selects the stream, so any trial can be regenerated independently of
//! scheduling order. Within a trial the draw order is fixed: terminal
//! channels, eavesdropper channel, BS oscillator trajectories, terminal
//! trajectories, then per-slot training noise.
//!
//! The phase increments are real Gaussians. Initial phases start at zero:
//! the fading is circularly symmetric, so a common initial rotation is
//! statistically absorbed, and zero keeps replay tests simple.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ValidatedConfig;

/// Independent per-trial RNG stream derived from the root seed.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(b"secmimo\0");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

/// One circularly symmetric complex Gaussian draw with variance `var`.
#[inline]
pub fn cn_sample(rng: &mut impl Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Channels of one coherence block: terminal vectors and the eavesdropper
/// matrix, constant over the block.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// N x K; column k is the channel of terminal k, entries CN(0, beta_k).
    pub g: Array2<Complex64>,
    /// N x N_E eavesdropper channel, entries CN(0, beta_E).
    pub g_e: Array2<Complex64>,
}

pub fn sample_channels(cfg: &ValidatedConfig, rng: &mut impl Rng) -> ChannelSet {
    let mut g = Array2::<Complex64>::zeros((cfg.n, cfg.k));
    for k in 0..cfg.k {
        let var = cfg.beta[k];
        for n in 0..cfg.n {
            g[(n, k)] = cn_sample(rng, var);
        }
    }
    let mut g_e = Array2::<Complex64>::zeros((cfg.n, cfg.n_e));
    for e in 0..cfg.n_e {
        for n in 0..cfg.n {
            g_e[(n, e)] = cn_sample(rng, cfg.beta_e);
        }
    }
    ChannelSet { g, g_e }
}

/// Wiener phase trajectories over slots 1..=horizon for every BS oscillator
/// and every terminal.
#[derive(Debug, Clone)]
pub struct PhaseTrajectories {
    psi: Array2<f64>,
    phi_mt: Array2<f64>,
    horizon: usize,
}

impl PhaseTrajectories {
    /// BS oscillator `l` phase at slot `t` (1-based).
    #[inline]
    pub fn psi(&self, l: usize, t: usize) -> f64 {
        self.psi[(l, t - 1)]
    }

    /// Terminal `k` phase at slot `t` (1-based).
    #[inline]
    pub fn phi_mt(&self, k: usize, t: usize) -> f64 {
        self.phi_mt[(k, t - 1)]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

pub fn sample_phase_trajectories(
    cfg: &ValidatedConfig,
    horizon: usize,
    rng: &mut impl Rng,
) -> PhaseTrajectories {
    let mut psi = Array2::<f64>::zeros((cfg.n_o, horizon));
    let mut phi_mt = Array2::<f64>::zeros((cfg.k, horizon));
    let s_psi = cfg.sigma_psi();
    let s_phi = cfg.sigma_phi();
    for l in 0..cfg.n_o {
        for t in 1..horizon {
            let step: f64 = rng.sample(StandardNormal);
            psi[(l, t)] = psi[(l, t - 1)] + s_psi * step;
        }
    }
    for k in 0..cfg.k {
        for t in 1..horizon {
            let step: f64 = rng.sample(StandardNormal);
            phi_mt[(k, t)] = phi_mt[(k, t - 1)] + s_phi * step;
        }
    }
    PhaseTrajectories { psi, phi_mt, horizon }
}

/// The diagonal phase rotation seen by terminal `k` at slot `t`, stored as
/// one angle per oscillator group instead of an N x N matrix. Antenna `n`
/// belongs to group `n / group_size`.
#[derive(Debug, Clone)]
pub struct ThetaDiag {
    pub group_angles: Vec<f64>,
    pub group_size: usize,
}

impl ThetaDiag {
    #[inline]
    pub fn angle(&self, n: usize) -> f64 {
        self.group_angles[n / self.group_size]
    }

    /// Per-antenna unit phasors e^{j angle(n)}.
    pub fn phasors(&self, n_antennas: usize) -> Array1<Complex64> {
        Array1::from_shape_fn(n_antennas, |n| Complex64::from_polar(1.0, self.angle(n)))
    }

    /// Effective channel at this slot: Theta * g.
    pub fn rotate(&self, g: ArrayView1<Complex64>) -> Array1<Complex64> {
        let mut out = g.to_owned();
        for (n, z) in out.iter_mut().enumerate() {
            *z *= Complex64::from_polar(1.0, self.angle(n));
        }
        out
    }
}

/// Angles psi_l(t) + phi_k(t) for all oscillator groups.
pub fn theta_diag(cfg: &ValidatedConfig, traj: &PhaseTrajectories, k: usize, t: usize) -> ThetaDiag {
    let phi = traj.phi_mt(k, t);
    ThetaDiag {
        group_angles: (0..cfg.n_o).map(|l| traj.psi(l, t) + phi).collect(),
        group_size: cfg.n / cfg.n_o,
    }
}

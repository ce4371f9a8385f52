//! Direct simulation of the full link: training, estimation, precoding and
//! the per-slot inner products behind every expectation in the SINR, plus
//! the eavesdropper's SINR samples.
//!
//! Trials are independent and embarrassingly parallel. Each trial owns a
//! counter-derived RNG stream keyed by its index, trials are grouped into
//! fixed blocks, and block partials are merged in block order, so the report
//! is bit-identical for any worker count.
//!
//! Per-trial cost is kept off the O(N^2) cliff: inner products against the
//! precoder columns are accumulated once per oscillator group and then
//! recombined per slot with N_o phasors, and the AN leakage goes through the
//! span-projector identity instead of the N x L basis.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bounds::{self, EveBound};
use crate::config::ValidatedConfig;
use crate::error::Error;
use crate::linalg::{self, Cholesky};
use crate::precoding;
use crate::stochastic::{
    sample_channels, sample_phase_trajectories, trial_rng, ChannelSet, PhaseTrajectories,
};
use crate::training::{lmmse_estimate, simulate_training, Estimator, PilotSet};

/// Trials per reduction block. Fixed so the merge tree (and therefore the
/// floating-point result) does not depend on thread count.
const BLOCK: usize = 32;

/// One Monte Carlo draw with every intermediate product kept around.
/// Production reduction uses the compact [`TrialStats`] instead; this type
/// exists for oracle-style tests that need the raw pieces.
#[derive(Debug, Clone)]
pub struct TrialRealization {
    pub channels: ChannelSet,
    pub traj: PhaseTrajectories,
    /// N x B received training block.
    pub y_train: Array2<Complex64>,
    /// N x K LMMSE estimates at t0.
    pub g_hat: Array2<Complex64>,
    /// N x K matched-filter columns.
    pub f: Array2<Complex64>,
    /// N x K orthonormal basis of span(Ghat).
    pub q_span: Array2<Complex64>,
}

pub fn realize_trial(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    est: &Estimator,
    trial: u64,
) -> Result<TrialRealization, Error> {
    let mut rng = trial_rng(cfg.seed, trial);
    let channels = sample_channels(cfg, &mut rng);
    let traj = sample_phase_trajectories(cfg, cfg.horizon(), &mut rng);
    let y_train = simulate_training(cfg, pilots, &channels, &traj, &mut rng);
    let g_hat = lmmse_estimate(est, &y_train);
    let f = precoding::mf_precoder(&g_hat)?;
    let q_span = precoding::span_basis(&g_hat)?;
    Ok(TrialRealization {
        channels,
        traj,
        y_train,
        g_hat,
        f,
        q_span,
    })
}

/// Per-trial sufficient statistics: the K x K inner-product matrix
/// g_k(t)^H f_l per evaluated slot, the AN leakage per terminal per slot,
/// and one eavesdropper SINR sample per terminal when defined.
#[derive(Debug, Clone)]
pub struct TrialStats {
    pub dot: Vec<Array2<Complex64>>,
    pub an_leak: Vec<Vec<f64>>,
    pub eve_gamma: Option<Vec<f64>>,
}

/// Whether the eavesdropper SINR is computable for this configuration.
fn eve_feasible(cfg: &ValidatedConfig) -> bool {
    let (_, q) = cfg.power_split();
    q > 0.0 && cfg.l() > cfg.n_e
}

pub fn trial_stats(cfg: &ValidatedConfig, real: &TrialRealization) -> Result<TrialStats, Error> {
    let n = cfg.n;
    let k_cnt = cfg.k;
    let n_o = cfg.n_o;
    let gs = n / n_o;

    // group partials: dot_part[k][l][g] = sum over group g of conj(g_k) f_l,
    // span_part[k][g] = Q_g^H g_k (a K-vector per group)
    let mut dot_part = vec![Complex64::ZERO; k_cnt * k_cnt * n_o];
    let mut span_part = vec![Complex64::ZERO; k_cnt * n_o * k_cnt];
    let mut g_norm = vec![0.0f64; k_cnt];
    for k in 0..k_cnt {
        let gk = real.channels.g.column(k);
        g_norm[k] = linalg::norm_sqr(gk);
        for nn in 0..n {
            let grp = nn / gs;
            let gc = gk[nn].conj();
            for l in 0..k_cnt {
                dot_part[(k * k_cnt + l) * n_o + grp] += gc * real.f[(nn, l)];
            }
            for m in 0..k_cnt {
                span_part[(k * n_o + grp) * k_cnt + m] += real.q_span[(nn, m)].conj() * gk[nn];
            }
        }
    }

    let mut dot = Vec::with_capacity(cfg.t_grid.len());
    let mut an_leak = Vec::with_capacity(cfg.t_grid.len());
    for &t in &cfg.t_grid {
        let mut d = Array2::<Complex64>::zeros((k_cnt, k_cnt));
        let mut leak_t = vec![0.0f64; k_cnt];
        for k in 0..k_cnt {
            let phi_k = real.traj.phi_mt(k, t);
            // g_k(t)^H f_l carries e^{-j theta}; Q^H g_k(t) carries e^{+j theta}
            for l in 0..k_cnt {
                let mut acc = Complex64::ZERO;
                for g in 0..n_o {
                    let rot = Complex64::from_polar(1.0, -(real.traj.psi(g, t) + phi_k));
                    acc += rot * dot_part[(k * k_cnt + l) * n_o + g];
                }
                d[(k, l)] = acc;
            }
            let mut inside = 0.0;
            for m in 0..k_cnt {
                let mut acc = Complex64::ZERO;
                for g in 0..n_o {
                    let rot = Complex64::from_polar(1.0, real.traj.psi(g, t) + phi_k);
                    acc += rot * span_part[(k * n_o + g) * k_cnt + m];
                }
                inside += acc.norm_sqr();
            }
            leak_t[k] = g_norm[k] - inside;
        }
        dot.push(d);
        an_leak.push(leak_t);
    }

    let eve_gamma = if eve_feasible(cfg) {
        Some(eve_gamma_samples(cfg, real)?)
    } else {
        None
    };

    Ok(TrialStats {
        dot,
        an_leak,
        eve_gamma,
    })
}

/// gamma_E per targeted terminal: p f_k^H G_E (q G_E^H A A^H G_E)^{-1}
/// G_E^H f_k, with A A^H = I - Q Q^H so the N x L basis never materializes.
/// Phase rotations drop out: the eavesdropper estimates its effective
/// channel perfectly, and the rotation is unitary.
fn eve_gamma_samples(cfg: &ValidatedConfig, real: &TrialRealization) -> Result<Vec<f64>, Error> {
    let (p, q) = cfg.power_split();
    let n_e = cfg.n_e;
    let g_e = &real.channels.g_e;

    // M = G_E^H G_E - (Q^H G_E)^H (Q^H G_E)
    let mut m = Array2::<Complex64>::zeros((n_e, n_e));
    for i in 0..n_e {
        for j in i..n_e {
            m[(i, j)] = linalg::dot_conj(g_e.column(i), g_e.column(j));
        }
    }
    let mut qg = Array2::<Complex64>::zeros((cfg.k, n_e));
    for c in 0..cfg.k {
        for j in 0..n_e {
            qg[(c, j)] = linalg::dot_conj(real.q_span.column(c), g_e.column(j));
        }
    }
    for i in 0..n_e {
        for j in i..n_e {
            let mut s = Complex64::ZERO;
            for c in 0..cfg.k {
                s += qg[(c, i)].conj() * qg[(c, j)];
            }
            m[(i, j)] -= s;
            if i != j {
                m[(j, i)] = m[(i, j)].conj();
            }
        }
    }
    let chol = Cholesky::new(&m)?;

    let mut out = Vec::with_capacity(cfg.k);
    for k in 0..cfg.k {
        let mut u = Array1::<Complex64>::zeros(n_e);
        for e in 0..n_e {
            u[e] = linalg::dot_conj(real.f.column(k), g_e.column(e));
        }
        let x = chol.solve(u.view());
        let quad = linalg::dot_conj(u.view(), x.view()).re;
        out.push(p / q * quad);
    }
    Ok(out)
}

pub fn run_trial(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    est: &Estimator,
    trial: u64,
) -> Result<TrialStats, Error> {
    let real = realize_trial(cfg, pilots, est, trial)?;
    trial_stats(cfg, &real)
}

/// Index of the five jointly tracked moment coordinates.
const RE_GAIN: usize = 0;
const IM_GAIN: usize = 1;
const SECOND: usize = 2;
const INTERF: usize = 3;
const LEAK: usize = 4;

#[derive(Debug, Clone)]
struct Accumulator {
    m: usize,
    k_cnt: usize,
    nt: usize,
    sums: Vec<[f64; 5]>,
    cross: Vec<[[f64; 5]; 5]>,
    eve: Option<Vec<[f64; 4]>>, // per k: sum gamma, gamma^2, log2(1+g), log2^2
}

impl Accumulator {
    fn new(k_cnt: usize, nt: usize, eve: bool) -> Self {
        Accumulator {
            m: 0,
            k_cnt,
            nt,
            sums: vec![[0.0; 5]; k_cnt * nt],
            cross: vec![[[0.0; 5]; 5]; k_cnt * nt],
            eve: eve.then(|| vec![[0.0; 4]; k_cnt]),
        }
    }

    fn add(&mut self, stats: &TrialStats) {
        self.m += 1;
        for ti in 0..self.nt {
            let d = &stats.dot[ti];
            for k in 0..self.k_cnt {
                let mut v = [0.0f64; 5];
                v[RE_GAIN] = d[(k, k)].re;
                v[IM_GAIN] = d[(k, k)].im;
                v[SECOND] = d[(k, k)].norm_sqr();
                v[INTERF] = (0..self.k_cnt)
                    .filter(|&l| l != k)
                    .map(|l| d[(k, l)].norm_sqr())
                    .sum();
                v[LEAK] = stats.an_leak[ti][k];
                let cell = ti * self.k_cnt + k;
                for i in 0..5 {
                    self.sums[cell][i] += v[i];
                    for j in 0..5 {
                        self.cross[cell][i][j] += v[i] * v[j];
                    }
                }
            }
        }
        if let (Some(acc), Some(gammas)) = (self.eve.as_mut(), stats.eve_gamma.as_ref()) {
            for k in 0..self.k_cnt {
                let g = gammas[k];
                let lg = (1.0 + g).log2();
                acc[k][0] += g;
                acc[k][1] += g * g;
                acc[k][2] += lg;
                acc[k][3] += lg * lg;
            }
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.m += other.m;
        for c in 0..self.sums.len() {
            for i in 0..5 {
                self.sums[c][i] += other.sums[c][i];
                for j in 0..5 {
                    self.cross[c][i][j] += other.cross[c][i][j];
                }
            }
        }
        if let (Some(a), Some(b)) = (self.eve.as_mut(), other.eve.as_ref()) {
            for k in 0..a.len() {
                for i in 0..4 {
                    a[k][i] += b[k][i];
                }
            }
        }
    }

    fn finalize(self, t_grid: Vec<usize>) -> (MomentEstimates, Option<EveEstimates>) {
        let m = self.m as f64;
        let stderr_defined = self.m >= 2;
        let mut cells = Vec::with_capacity(self.sums.len());
        for c in 0..self.sums.len() {
            let mean: Vec<f64> = self.sums[c].iter().map(|s| s / m).collect();
            let mut cov = [[0.0f64; 5]; 5];
            if stderr_defined {
                for i in 0..5 {
                    for j in 0..5 {
                        // covariance of the sample mean
                        let s = (self.cross[c][i][j] - m * mean[i] * mean[j]) / (m - 1.0);
                        cov[i][j] = s / m;
                    }
                }
            }
            cells.push(MomentCell {
                mean_gain: Complex64::new(mean[RE_GAIN], mean[IM_GAIN]),
                second_moment: mean[SECOND],
                interference_sum: mean[INTERF],
                an_leakage: mean[LEAK],
                cov,
            });
        }
        let eve = self.eve.map(|acc| EveEstimates {
            per_mt: acc
                .into_iter()
                .map(|s| {
                    let mean_gamma = s[0] / m;
                    let c_e = s[2] / m;
                    let (gamma_stderr, stderr) = if stderr_defined {
                        (
                            ((s[1] - m * mean_gamma * mean_gamma) / (m - 1.0) / m)
                                .max(0.0)
                                .sqrt(),
                            ((s[3] - m * c_e * c_e) / (m - 1.0) / m).max(0.0).sqrt(),
                        )
                    } else {
                        (0.0, 0.0)
                    };
                    EveEstimate {
                        c_e,
                        stderr,
                        mean_gamma,
                        gamma_stderr,
                        m: self.m,
                    }
                })
                .collect(),
            stderr_defined,
        });
        (
            MomentEstimates {
                m: self.m,
                k_cnt: self.k_cnt,
                t_grid,
                cells,
                stderr_defined,
            },
            eve,
        )
    }
}

/// Monte Carlo averages of every expectation in the SINR, per terminal and
/// evaluated slot, with the joint covariance needed for delta-method error
/// bars on the assembled rate.
#[derive(Debug, Clone)]
pub struct MomentEstimates {
    pub m: usize,
    k_cnt: usize,
    pub t_grid: Vec<usize>,
    cells: Vec<MomentCell>,
    /// False when m < 2: standard errors are reported as zero.
    pub stderr_defined: bool,
}

#[derive(Debug, Clone)]
pub struct MomentCell {
    pub mean_gain: Complex64,
    pub second_moment: f64,
    pub interference_sum: f64,
    pub an_leakage: f64,
    /// Covariance of the five mean estimates
    /// (Re gain, Im gain, second moment, interference, leakage).
    pub cov: [[f64; 5]; 5],
}

impl MomentCell {
    pub fn gain_stderr(&self) -> (f64, f64) {
        (self.cov[0][0].sqrt(), self.cov[1][1].sqrt())
    }
    pub fn second_moment_stderr(&self) -> f64 {
        self.cov[SECOND][SECOND].sqrt()
    }
    pub fn interference_stderr(&self) -> f64 {
        self.cov[INTERF][INTERF].sqrt()
    }
    pub fn an_leakage_stderr(&self) -> f64 {
        self.cov[LEAK][LEAK].sqrt()
    }
}

impl MomentEstimates {
    pub fn cell(&self, k: usize, t: usize) -> Result<&MomentCell, Error> {
        let ti = self
            .t_grid
            .iter()
            .position(|&g| g == t)
            .ok_or(Error::MissingMoments { k, t })?;
        self.cells
            .get(ti * self.k_cnt + k)
            .ok_or(Error::MissingMoments { k, t })
    }
}

/// Plain averages over a slice of per-trial statistics, in slice order.
pub fn estimate_moments(
    cfg: &ValidatedConfig,
    stats: &[TrialStats],
) -> (MomentEstimates, Option<EveEstimates>) {
    let with_eve = stats.iter().all(|s| s.eve_gamma.is_some()) && !stats.is_empty();
    let mut acc = Accumulator::new(cfg.k, cfg.t_grid.len(), with_eve);
    for s in stats {
        acc.add(s);
    }
    acc.finalize(cfg.t_grid.clone())
}

/// Eavesdropper capacity estimate per targeted terminal.
#[derive(Debug, Clone)]
pub struct EveEstimates {
    pub per_mt: Vec<EveEstimate>,
    pub stderr_defined: bool,
}

#[derive(Debug, Clone)]
pub struct EveEstimate {
    /// Mean of log2(1 + gamma_E).
    pub c_e: f64,
    pub stderr: f64,
    pub mean_gamma: f64,
    pub gamma_stderr: f64,
    pub m: usize,
}

/// Why the eavesdropper side of a run is missing.
#[derive(Debug, Clone)]
pub enum EveOutcome {
    Estimated(EveEstimates),
    /// phi = 1.
    NoArtificialNoise,
    /// L <= N_E.
    Undefined { l: usize, n_e: usize },
}

#[derive(Debug, Clone)]
pub struct McRun {
    pub moments: MomentEstimates,
    pub eve: EveOutcome,
}

/// Run `cfg.trials` independent realizations. Deterministic in (config,
/// seed) for any rayon worker count.
pub fn run_trials(cfg: &ValidatedConfig, pilots: &PilotSet) -> Result<McRun, Error> {
    let est = Estimator::new(cfg, pilots);
    let with_eve = eve_feasible(cfg);
    let n_blocks = cfg.trials.div_ceil(BLOCK);
    let blocks: Vec<Accumulator> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Accumulator::new(cfg.k, cfg.t_grid.len(), with_eve);
            let lo = b * BLOCK;
            let hi = ((b + 1) * BLOCK).min(cfg.trials);
            for trial in lo..hi {
                acc.add(&run_trial(cfg, pilots, &est, trial as u64)?);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut total = Accumulator::new(cfg.k, cfg.t_grid.len(), with_eve);
    for b in &blocks {
        total.merge(b);
    }
    let (moments, eve) = total.finalize(cfg.t_grid.clone());
    let eve = match eve {
        Some(e) => EveOutcome::Estimated(e),
        None => {
            let (_, q) = cfg.power_split();
            if q == 0.0 {
                EveOutcome::NoArtificialNoise
            } else {
                EveOutcome::Undefined {
                    l: cfg.l(),
                    n_e: cfg.n_e,
                }
            }
        }
    };
    Ok(McRun { moments, eve })
}

/// Eavesdropper-only entry point with the spec'd error behaviour.
pub fn simulate_eve(cfg: &ValidatedConfig, pilots: &PilotSet) -> Result<EveEstimates, Error> {
    let (_, q) = cfg.power_split();
    if q == 0.0 {
        return Err(Error::NoArtificialNoise);
    }
    if cfg.l() <= cfg.n_e {
        return Err(Error::EveBoundUndefined {
            l: cfg.l(),
            n_e: cfg.n_e,
        });
    }
    match run_trials(cfg, pilots)?.eve {
        EveOutcome::Estimated(e) => Ok(e),
        _ => unreachable!("feasibility checked above"),
    }
}

/// Rate assembled from estimated moments for one (terminal, slot).
#[derive(Debug, Clone, Copy)]
pub struct McRatePoint {
    pub rate: f64,
    /// First-order (delta method) standard error through the full joint
    /// covariance of the five moment estimates.
    pub stderr: f64,
    /// Sampling noise made the estimated gain variance negative; it was
    /// clamped to zero.
    pub clamped: bool,
}

pub fn mc_rate(
    cfg: &ValidatedConfig,
    moments: &MomentEstimates,
    k: usize,
    t: usize,
) -> Result<McRatePoint, Error> {
    let cell = moments.cell(k, t)?;
    let (p, q) = cfg.power_split();
    let g1 = cell.mean_gain.re;
    let g2 = cell.mean_gain.im;
    let gain_sq = g1 * g1 + g2 * g2;
    let raw_var = cell.second_moment - gain_sq;
    let clamped = raw_var < 0.0;
    let var_term = raw_var.max(0.0);
    let den = p * cell.interference_sum + p * var_term + q * cell.an_leakage + cfg.xi_dl;
    if den <= 0.0 || !den.is_finite() {
        return Err(Error::NonPositiveDenominator { value: den });
    }
    let gamma = p * gain_sq / den;
    let rate = (1.0 + gamma).log2();

    // delta method: gradient of gamma w.r.t. (re, im, second, interf, leak)
    let dg = if clamped {
        p / den
    } else {
        (p / den) * (1.0 + gamma)
    };
    let d_second = if clamped { 0.0 } else { -(p / den) * gamma };
    let grad = [
        2.0 * g1 * dg,
        2.0 * g2 * dg,
        d_second,
        -(p / den) * gamma,
        -(q / den) * gamma,
    ];
    let mut var_gamma = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            var_gamma += grad[i] * cell.cov[i][j] * grad[j];
        }
    }
    let stderr = var_gamma.max(0.0).sqrt() / ((1.0 + gamma) * std::f64::consts::LN_2);
    Ok(McRatePoint {
        rate,
        stderr,
        clamped,
    })
}

/// Analytic and simulated secrecy figures for one terminal.
#[derive(Debug, Clone)]
pub struct MtSecrecy {
    /// Zero-based terminal index.
    pub k: usize,
    /// Grid-weighted mean of the closed-form rate over the data phase,
    /// bits per data slot.
    pub rate_analytic: f64,
    /// None when phi = 1 (bound diverges).
    pub ce_bound: Option<f64>,
    pub secrecy_analytic: f64,
    pub rate_mc: Option<f64>,
    pub ce_mc: Option<f64>,
    pub secrecy_mc: Option<f64>,
    /// Weighted mean of the per-slot delta-method errors; slots share
    /// trials, so this is a conservative (fully correlated) combination.
    pub stderr_rate: Option<f64>,
    pub stderr_ce: Option<f64>,
    /// Any per-slot variance clamp fired while assembling the MC rate.
    pub clamped: bool,
}

/// Side-by-side analytic/simulated secrecy report.
#[derive(Debug, Clone)]
pub struct SecrecyReport {
    pub per_mt: Vec<MtSecrecy>,
    pub m: usize,
    pub seed: u64,
}

/// Build the report. Pass `mc` to fill the simulated columns; `None` gives
/// the analytic-only report.
pub fn report(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    mc: Option<&McRun>,
) -> Result<SecrecyReport, Error> {
    let ce_bound = match bounds::eve_capacity_upper(cfg) {
        Ok(EveBound::Finite(c)) => Some(c),
        Ok(EveBound::Unbounded) => None,
        Err(e) => return Err(e),
    };
    let weights = cfg.grid_weights();
    let total_w: f64 = weights.iter().map(|(_, w)| w).sum();
    let kern = bounds::MomentKernels::new(cfg, pilots);

    let mut per_mt = Vec::with_capacity(cfg.k);
    for k in 0..cfg.k {
        let mut rate_acc = 0.0;
        let mut sec_acc = 0.0;
        let mut mc_rate_acc = 0.0;
        let mut mc_sec_acc = 0.0;
        let mut mc_err_acc = 0.0;
        let mut clamped = false;
        let eve_est = mc.and_then(|run| match &run.eve {
            EveOutcome::Estimated(e) => Some(&e.per_mt[k]),
            _ => None,
        });
        for &(t, w) in &weights {
            let terms = bounds::rate_terms_with(&kern, cfg, pilots, k, t);
            let r = bounds::rate_from_terms(&terms, cfg.phi)?;
            rate_acc += w * r;
            if let Some(ce) = ce_bound {
                sec_acc += w * (r - ce).max(0.0);
            }
            if let Some(run) = mc {
                let point = mc_rate(cfg, &run.moments, k, t)?;
                clamped |= point.clamped;
                mc_rate_acc += w * point.rate;
                mc_err_acc += w * point.stderr;
                if let Some(e) = eve_est {
                    mc_sec_acc += w * (point.rate - e.c_e).max(0.0);
                }
            }
        }
        let rate_analytic = rate_acc / total_w;
        let secrecy_analytic = if ce_bound.is_some() {
            sec_acc / cfg.t as f64
        } else {
            0.0
        };
        let (rate_mc, stderr_rate) = match mc {
            Some(_) => (Some(mc_rate_acc / total_w), Some(mc_err_acc / total_w)),
            None => (None, None),
        };
        let (ce_mc, stderr_ce, secrecy_mc) = match (mc, eve_est) {
            (Some(_), Some(e)) => (
                Some(e.c_e),
                Some(e.stderr),
                Some(mc_sec_acc / cfg.t as f64),
            ),
            // phi = 1 under MC: no AN, eavesdropper capacity unbounded,
            // simulated secrecy is zero by convention
            (Some(run), None) => match run.eve {
                EveOutcome::NoArtificialNoise => (None, None, Some(0.0)),
                _ => (None, None, None),
            },
            _ => (None, None, None),
        };
        per_mt.push(MtSecrecy {
            k,
            rate_analytic,
            ce_bound,
            secrecy_analytic,
            rate_mc,
            ce_mc,
            secrecy_mc,
            stderr_rate,
            stderr_ce,
            clamped,
        });
    }
    Ok(SecrecyReport {
        per_mt,
        m: mc.map_or(0, |run| run.moments.m),
        seed: cfg.seed,
    })
}

/// Combine estimated moments and the eavesdropper estimate into the full
/// side-by-side report.
pub fn mc_secrecy(
    cfg: &ValidatedConfig,
    pilots: &PilotSet,
    run: &McRun,
) -> Result<SecrecyReport, Error> {
    report(cfg, pilots, Some(run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{PilotDesign, SystemConfig};
    use crate::training::make_pilots;

    fn cfg(n: usize, n_o: usize, sigma_deg: f64, trials: usize, t_grid: Vec<usize>) -> ValidatedConfig {
        SystemConfig {
            n,
            k: 4,
            n_e: 4,
            n_o,
            b: 4,
            t: 50,
            p_t_db: 10.0,
            phi: 0.5,
            p_tau: 2.5,
            sigma_psi_deg: sigma_deg,
            sigma_phi_deg: sigma_deg,
            beta: vec![1.0; 4],
            beta_e: 1.0,
            xi_ul: 1.0,
            xi_dl: 1.0,
            pilot_design: PilotDesign::TimeOrthogonal,
            t0: 5,
            trials,
            seed: 2024,
            t_grid,
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn perfect_csi_trial_has_no_leakage() {
        let mut sc = (*cfg(32, 1, 0.0, 4, vec![5, 20])).clone();
        sc.xi_ul = 0.0;
        let c = sc.validate().unwrap();
        let p = make_pilots(&c).unwrap();
        let est = Estimator::new(&c, &p);
        let stats = run_trial(&c, &p, &est, 0).unwrap();
        for ti in 0..2 {
            for k in 0..4 {
                assert!(
                    stats.an_leak[ti][k].abs() < 1e-9,
                    "leak {}",
                    stats.an_leak[ti][k]
                );
            }
        }
    }

    #[test]
    fn trials_replay_bit_identically() {
        let c = cfg(32, 4, 6.0, 4, vec![5, 20]);
        let p = make_pilots(&c).unwrap();
        let est = Estimator::new(&c, &p);
        let a = run_trial(&c, &p, &est, 7).unwrap();
        let b = run_trial(&c, &p, &est, 7).unwrap();
        assert_eq!(a.dot[1], b.dot[1]);
        assert_eq!(a.an_leak, b.an_leak);
        assert_eq!(a.eve_gamma, b.eve_gamma);
        let other = run_trial(&c, &p, &est, 8).unwrap();
        assert_ne!(a.dot[1], other.dot[1]);
    }

    #[test]
    fn projector_leakage_matches_explicit_basis() {
        let c = cfg(24, 4, 6.0, 2, vec![5, 20]);
        let p = make_pilots(&c).unwrap();
        let est = Estimator::new(&c, &p);
        let real = realize_trial(&c, &p, &est, 3).unwrap();
        let stats = trial_stats(&c, &real).unwrap();
        let a = precoding::ns_an_precoder(&real.g_hat).unwrap();
        for (ti, &t) in c.t_grid.iter().enumerate() {
            for k in 0..c.k {
                let th = crate::stochastic::theta_diag(&c, &real.traj, k, t);
                let gt = th.rotate(real.channels.g.column(k));
                let mut direct = 0.0;
                for col in 0..a.ncols() {
                    direct += linalg::dot_conj(a.column(col), gt.view()).norm_sqr();
                }
                let fast = stats.an_leak[ti][k];
                assert!(
                    (fast - direct).abs() <= 1e-8 * direct.max(1e-12),
                    "t={t} k={k}: {fast} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn moments_match_closed_forms() {
        // run a moderate batch and compare every estimated moment against
        // the analytic kernel forms within a few standard errors
        let c = cfg(64, 1, 6.0, 2000, vec![5, 9, 25]);
        let p = make_pilots(&c).unwrap();
        let run = run_trials(&c, &p).unwrap();
        let kern = bounds::MomentKernels::new(&c, &p);
        for &t in &c.t_grid {
            for k in 0..c.k {
                let cell = run.moments.cell(k, t).unwrap();
                let (se_re, se_im) = cell.gain_stderr();
                let gain = kern.signal_gain(k, t);
                assert!(
                    (cell.mean_gain.re - gain).abs() < 4.0 * se_re + 0.01 * gain,
                    "gain k={k} t={t}: {} vs {gain}",
                    cell.mean_gain.re
                );
                assert!(cell.mean_gain.im.abs() < 4.0 * se_im + 1e-3);
                let second = kern.desired_second_moment(k, t);
                assert!(
                    (cell.second_moment - second).abs()
                        < 4.0 * cell.second_moment_stderr() + 0.01 * second,
                    "second k={k} t={t}: {} vs {second}",
                    cell.second_moment
                );
                let interf: f64 = (0..c.k)
                    .filter(|&l| l != k)
                    .map(|l| kern.interference_power(k, l, t))
                    .sum();
                assert!(
                    (cell.interference_sum - interf).abs()
                        < 4.0 * cell.interference_stderr() + 0.01 * interf
                );
                let leak = kern.an_leakage(k, t);
                assert!(
                    (cell.an_leakage - leak).abs() < 4.0 * cell.an_leakage_stderr() + 0.01 * leak,
                    "leak k={k} t={t}: {} vs {leak}",
                    cell.an_leakage
                );
            }
        }
    }

    #[test]
    fn single_trial_estimates_have_zero_flagged_stderr() {
        let c = cfg(16, 1, 6.0, 1, vec![5, 20]);
        let p = make_pilots(&c).unwrap();
        let est = Estimator::new(&c, &p);
        let stats = vec![run_trial(&c, &p, &est, 0).unwrap()];
        let (m, eve) = estimate_moments(&c, &stats);
        assert_eq!(m.m, 1);
        assert!(!m.stderr_defined);
        let cell = m.cell(0, 5).unwrap();
        assert_eq!(cell.mean_gain.re, stats[0].dot[0][(0, 0)].re);
        assert_eq!(cell.gain_stderr(), (0.0, 0.0));
        assert!(!eve.unwrap().stderr_defined);
    }

    #[test]
    fn all_zero_stats_give_zero_moments() {
        let c = cfg(16, 1, 6.0, 2, vec![5, 20]);
        let zero = TrialStats {
            dot: vec![Array2::zeros((4, 4)); 2],
            an_leak: vec![vec![0.0; 4]; 2],
            eve_gamma: None,
        };
        let (m, eve) = estimate_moments(&c, &[zero.clone(), zero]);
        assert!(eve.is_none());
        let cell = m.cell(2, 20).unwrap();
        assert_eq!(cell.mean_gain, Complex64::ZERO);
        assert_eq!(cell.second_moment, 0.0);
        assert_eq!(cell.an_leakage, 0.0);
    }

    #[test]
    fn mc_rate_vanishes_with_data_power() {
        let c = cfg(32, 1, 6.0, 64, vec![5, 20]);
        let p = make_pilots(&c).unwrap();
        let run = run_trials(&c, &p).unwrap();
        let r_half = mc_rate(&c, &run.moments, 0, 20).unwrap().rate;
        let tiny = c.with_phi(1e-9);
        let r_tiny = mc_rate(&tiny, &run.moments, 0, 20).unwrap().rate;
        assert!(r_tiny < 1e-5 && r_tiny < r_half);
    }

    #[test]
    fn distributed_oscillators_beat_common_at_high_phi() {
        // same seed, phi = 0.9: per-terminal mean rate over the grid
        let grid = vec![5, 12, 20, 35, 50];
        let c1 = cfg(64, 1, 6.0, 1500, grid.clone()).with_phi(0.9);
        let c64 = cfg(64, 64, 6.0, 1500, grid).with_phi(0.9);
        let p1 = make_pilots(&c1).unwrap();
        let p64 = make_pilots(&c64).unwrap();
        let r1 = run_trials(&c1, &p1).unwrap();
        let r64 = run_trials(&c64, &p64).unwrap();
        let mean = |c: &ValidatedConfig, run: &McRun| -> f64 {
            let mut acc = 0.0;
            for &t in &c.t_grid {
                acc += mc_rate(c, &run.moments, 0, t).unwrap().rate;
            }
            acc / c.t_grid.len() as f64
        };
        let common = mean(&c1, &r1);
        let distributed = mean(&c64, &r64);
        assert!(
            distributed > common,
            "distributed {distributed} <= common {common}"
        );
    }

    #[test]
    fn eve_scale_invariance_in_path_loss() {
        let c_a = cfg(32, 1, 6.0, 8, vec![5, 20]);
        let mut sc = (*c_a).clone();
        sc.beta_e = 7.3;
        let c_b = sc.validate().unwrap();
        let p = make_pilots(&c_a).unwrap();
        let est = Estimator::new(&c_a, &p);
        for trial in 0..4 {
            let a = run_trial(&c_a, &p, &est, trial).unwrap().eve_gamma.unwrap();
            let b = run_trial(&c_b, &p, &est, trial).unwrap().eve_gamma.unwrap();
            for k in 0..4 {
                assert!(
                    (a[k] - b[k]).abs() <= 1e-9 * a[k].abs(),
                    "trial {trial} k {k}: {} vs {}",
                    a[k],
                    b[k]
                );
            }
        }
    }

    #[test]
    fn eve_single_antenna_mean_matches_ratio() {
        let mut sc = (*cfg(128, 1, 6.0, 2000, vec![5])).clone();
        sc.n_e = 1;
        let c = sc.validate().unwrap();
        let p = make_pilots(&c).unwrap();
        let eve = simulate_eve(&c, &p).unwrap();
        let (pp, qq) = c.power_split();
        let expect = pp / (qq * (c.l() - 1) as f64);
        let got = eve.per_mt[0].mean_gamma;
        assert!(
            (got - expect).abs() < 0.1 * expect,
            "mean gamma {got} vs {expect}"
        );
    }

    #[test]
    fn eve_estimate_respects_upper_bound() {
        for n_e in [1usize, 4, 16] {
            let mut sc = (*cfg(128, 1, 6.0, 600, vec![5])).clone();
            sc.n_e = n_e;
            let c = sc.validate().unwrap();
            let p = make_pilots(&c).unwrap();
            let eve = simulate_eve(&c, &p).unwrap();
            let EveBound::Finite(bound) = bounds::eve_capacity_upper(&c).unwrap() else {
                panic!()
            };
            for e in &eve.per_mt {
                assert!(
                    e.c_e <= bound + 2.0 * e.stderr,
                    "N_E={n_e}: {} > {bound} + 2 x {}",
                    e.c_e,
                    e.stderr
                );
            }
        }
    }

    #[test]
    fn eve_error_paths() {
        let c = cfg(32, 1, 6.0, 4, vec![5]).with_phi(1.0);
        let p = make_pilots(&c).unwrap();
        assert!(matches!(
            simulate_eve(&c, &p),
            Err(Error::NoArtificialNoise)
        ));

        let mut sc = (*cfg(32, 1, 6.0, 4, vec![5])).clone();
        sc.n = 8;
        sc.n_e = 5;
        let c = sc.validate().unwrap();
        let p = make_pilots(&c).unwrap();
        assert!(matches!(
            simulate_eve(&c, &p),
            Err(Error::EveBoundUndefined { .. })
        ));
    }

    #[test]
    fn secrecy_report_clips_and_stays_consistent() {
        let c = cfg(32, 1, 6.0, 200, vec![5, 20, 50]);
        let p = make_pilots(&c).unwrap();
        let run = run_trials(&c, &p).unwrap();
        let rep = mc_secrecy(&c, &p, &run).unwrap();
        assert_eq!(rep.per_mt.len(), 4);
        assert_eq!(rep.m, 200);
        for row in &rep.per_mt {
            assert!(row.secrecy_analytic >= 0.0);
            assert!(row.secrecy_mc.unwrap() >= 0.0);
            assert!(row.rate_mc.unwrap() > 0.0);
            assert!(row.stderr_ce.unwrap() > 0.0);
        }

        // a strong eavesdropper wipes out the secrecy rate entirely
        let mut sc = (*c).clone();
        sc.n_e = 24;
        sc.phi = 0.95;
        let c2 = sc.validate().unwrap();
        let p2 = make_pilots(&c2).unwrap();
        let run2 = run_trials(&c2, &p2).unwrap();
        let rep2 = mc_secrecy(&c2, &p2, &run2).unwrap();
        for row in &rep2.per_mt {
            assert_eq!(row.secrecy_analytic, 0.0);
            assert_eq!(row.secrecy_mc.unwrap(), 0.0);
        }
    }

    #[test]
    fn stderr_shrinks_like_root_m() {
        let c_small = cfg(32, 1, 6.0, 400, vec![5, 20]);
        let c_big = cfg(32, 1, 6.0, 800, vec![5, 20]);
        let p = make_pilots(&c_small).unwrap();
        let run_s = run_trials(&c_small, &p).unwrap();
        let run_b = run_trials(&c_big, &p).unwrap();
        let ratio_expect = (0.5f64).sqrt();
        for &t in &c_small.t_grid {
            for k in 0..c_small.k {
                let s = run_s.moments.cell(k, t).unwrap().second_moment_stderr();
                let b = run_b.moments.cell(k, t).unwrap().second_moment_stderr();
                let ratio = b / s;
                assert!(
                    (ratio - ratio_expect).abs() < 0.2 * ratio_expect,
                    "k={k} t={t}: ratio {ratio}"
                );
            }
        }
    }

    #[test]
    fn parallel_and_serial_reductions_agree_bitwise() {
        let c = cfg(24, 4, 6.0, 70, vec![5, 20]);
        let p = make_pilots(&c).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_trials(&c, &p))
            .unwrap();
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| run_trials(&c, &p))
            .unwrap();
        for &t in &c.t_grid {
            for k in 0..c.k {
                let a = single.moments.cell(k, t).unwrap();
                let b = many.moments.cell(k, t).unwrap();
                assert_eq!(a.mean_gain, b.mean_gain);
                assert_eq!(a.second_moment, b.second_moment);
                assert_eq!(a.cov, b.cov);
            }
        }
    }
}

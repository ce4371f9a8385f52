//! Experiment orchestration: evaluate single configurations, parameter
//! sweeps and the power-split optimizer, producing report rows in a fixed
//! deterministic order regardless of worker count.

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use secmimo_core::montecarlo::{self, McRun};
use secmimo_core::training::make_pilots;
use secmimo_core::{bounds, PilotSet, ValidatedConfig};

use crate::config_file::FileConfig;
use crate::output::{Mode, ReportRow};

/// Which terminals end up in the report (terminal 1 by default).
pub fn reported_mts(cfg: &ValidatedConfig, all: bool) -> Vec<usize> {
    if all {
        (0..cfg.k).collect()
    } else {
        vec![0]
    }
}

pub struct PointOutcome {
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
    /// Per reported terminal: relative |rate_mc - rate_analytic| / rate_analytic.
    pub rate_gaps: Vec<(usize, f64)>,
}

/// Validate, run the requested paths, and lift the per-terminal report.
pub fn evaluate_point(
    cfg: &ValidatedConfig,
    mode: Mode,
    all_mts: bool,
    sweep: Option<(&str, f64)>,
) -> Result<PointOutcome> {
    let pilots = make_pilots(cfg)?;
    let mc: Option<McRun> = if mode.wants_mc() {
        Some(montecarlo::run_trials(cfg, &pilots)?)
    } else {
        None
    };
    let report = montecarlo::report(cfg, &pilots, mc.as_ref())?;
    let m = mc.as_ref().map(|run| run.moments.m);
    let mut rows = Vec::new();
    let mut rate_gaps = Vec::new();
    for k in reported_mts(cfg, all_mts) {
        let mt = &report.per_mt[k];
        if let (Some(rm), ra) = (mt.rate_mc, mt.rate_analytic) {
            if ra > 0.0 {
                rate_gaps.push((k + 1, (rm - ra).abs() / ra));
            }
        }
        rows.push(ReportRow::from_mt(cfg, mt, mode, sweep, None, m));
    }
    Ok(PointOutcome {
        rows,
        warnings: cfg.warnings().to_vec(),
        rate_gaps,
    })
}

/// A sweep request: the varied parameter and its values.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Phi,
    SigmaDeg,
    NE,
    NO,
    K,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Phi => "phi",
            SweepVar::SigmaDeg => "sigma_deg",
            SweepVar::NE => "N_E",
            SweepVar::NO => "N_o",
            SweepVar::K => "K",
        }
    }
}

/// Parse `VAR=v1,v2,...` with VAR in {phi, sigma_deg, N_E, N_o, K}.
pub fn parse_sweep(spec: &str) -> Result<SweepSpec> {
    let (var, values) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("--sweep expects VAR=v1,v2,... (got '{spec}')"))?;
    let var = match var.trim() {
        "phi" => SweepVar::Phi,
        "sigma_deg" => SweepVar::SigmaDeg,
        "N_E" => SweepVar::NE,
        "N_o" => SweepVar::NO,
        "K" => SweepVar::K,
        other => bail!("unknown sweep variable '{other}' (phi | sigma_deg | N_E | N_o | K)"),
    };
    let values: Vec<f64> = values
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("sweep value '{s}': {e}"))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    if matches!(var, SweepVar::NE | SweepVar::NO | SweepVar::K) {
        for &v in &values {
            if v.fract() != 0.0 || v < 1.0 {
                bail!("sweep variable {} takes positive integers (got {v})", var.name());
            }
        }
    }
    Ok(SweepSpec { var, values })
}

/// Apply one sweep value, re-resolving the `auto` keys afterwards.
/// Sweeping K keeps the reference convention B = K (the pilot window tracks
/// the terminal count) and broadcasts a uniform path loss.
pub fn apply_sweep(base: &FileConfig, var: SweepVar, value: f64) -> Result<FileConfig> {
    let mut fc = base.clone();
    match var {
        SweepVar::Phi => fc.phi = value,
        SweepVar::SigmaDeg => {
            fc.sigma_psi_deg = value;
            fc.sigma_phi_deg = value;
        }
        SweepVar::NE => fc.n_e = value as usize,
        SweepVar::NO => fc.n_o = value as usize,
        SweepVar::K => {
            let k = value as usize;
            if fc.beta.windows(2).any(|w| w[0] != w[1]) {
                // a config-level problem: exit code 1, not a numerical failure
                return Err(secmimo_core::Error::from(secmimo_core::ConfigError {
                    violations: vec![
                        "sweeping K needs a uniform beta (path losses cannot be resized)"
                            .to_string(),
                    ],
                })
                .into());
            }
            fc.beta = vec![fc.beta[0]; 1];
            fc.k = k;
            fc.b = k;
        }
    }
    Ok(fc)
}

/// Evaluate every sweep point (possibly in parallel) and return the rows in
/// sweep order. Each point revalidates its own configuration.
pub fn run_sweep(
    base: &FileConfig,
    spec: &SweepSpec,
    mode: Mode,
    all_mts: bool,
) -> Result<(Vec<ReportRow>, Vec<String>)> {
    let points: Vec<(f64, ValidatedConfig)> = spec
        .values
        .iter()
        .map(|&v| {
            let cfg = apply_sweep(base, spec.var, v)?
                .resolve()
                .validate()
                .map_err(secmimo_core::Error::from)
                .with_context(|| format!("sweep {}={v}", spec.var.name()))?;
            Ok((v, cfg))
        })
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<PointOutcome> = points
        .par_iter()
        .map(|(v, cfg)| evaluate_point(cfg, mode, all_mts, Some((spec.var.name(), *v))))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (outcome, (v, _)) in outcomes.into_iter().zip(&points) {
        for w in outcome.warnings {
            warnings.push(format!("{}={v}: {w}", spec.var.name()));
        }
        rows.extend(outcome.rows);
    }
    Ok((rows, warnings))
}

/// Parse `start:stop:step` into an inclusive grid.
pub fn parse_phi_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("--phi-grid expects start:stop:step (got '{spec}')");
    }
    let start: f64 = parts[0].parse().map_err(|e| anyhow!("phi-grid start: {e}"))?;
    let stop: f64 = parts[1].parse().map_err(|e| anyhow!("phi-grid stop: {e}"))?;
    let step: f64 = parts[2].parse().map_err(|e| anyhow!("phi-grid step: {e}"))?;
    if step <= 0.0 || step.is_nan() || stop < start {
        bail!("phi-grid needs step > 0 and stop >= start");
    }
    if !(start > 0.0 && stop <= 1.0) {
        bail!("phi-grid values must lie in (0, 1]");
    }
    let n = ((stop - start) / step).round() as usize + 1;
    let mut grid: Vec<f64> = (0..n)
        .map(|i| start + i as f64 * step)
        .filter(|&x| x <= stop + 1e-12)
        .collect();
    if grid.is_empty() {
        grid.push(start);
    }
    Ok(grid)
}

pub struct OptimizeOutcome {
    pub rows: Vec<ReportRow>,
    /// (phi, secrecy) curve of the first reported terminal.
    pub curve_rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
}

/// Grid-search the power split per reported terminal; the report row is
/// evaluated at the optimum.
pub fn run_optimize(
    cfg: &ValidatedConfig,
    grid: &[f64],
    all_mts: bool,
) -> Result<OptimizeOutcome> {
    let pilots: PilotSet = make_pilots(cfg)?;
    let mut rows = Vec::new();
    let mut curve_rows = Vec::new();
    for (idx, k) in reported_mts(cfg, all_mts).into_iter().enumerate() {
        let (phi_star, _) = bounds::optimize_phi(cfg, &pilots, k, grid)?;
        let best = cfg.with_phi(phi_star);
        let best_pilots = make_pilots(&best)?;
        let report = montecarlo::report(&best, &best_pilots, None)?;
        rows.push(ReportRow::from_mt(
            &best,
            &report.per_mt[k],
            Mode::Analytic,
            None,
            Some(phi_star),
            None,
        ));
        if idx == 0 {
            for (phi, secrecy) in bounds::secrecy_curve(cfg, &pilots, k, grid)? {
                let point = cfg.with_phi(phi);
                let mut row = ReportRow::from_mt(
                    &point,
                    &report.per_mt[k],
                    Mode::Analytic,
                    Some(("phi", phi)),
                    None,
                    None,
                );
                row.rate_analytic = None;
                row.ce_bound = None;
                row.secrecy_analytic = Some(secrecy);
                curve_rows.push(row);
            }
        }
    }
    Ok(OptimizeOutcome {
        rows,
        curve_rows,
        warnings: cfg.warnings().to_vec(),
    })
}

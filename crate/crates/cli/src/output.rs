//! Result rows, CSV emission and whitespace-delimited plot data.
//!
//! Every row echoes the full scalar configuration so it reproduces without
//! external state. Floats are serialized with nine significant digits;
//! absent values are empty CSV fields (or `nan` in plot data, which stays
//! parseable). Files are written to a temporary sibling and renamed, so
//! concurrent sweep writers never expose half a file.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use secmimo_core::montecarlo::MtSecrecy;
use secmimo_core::{SystemConfig, ValidatedConfig};

pub const CSV_HEADER: &str = "sweep_var,sweep_value,k,N,K,N_E,N_o,B,T,P_T_dB,phi,p_tau,\
sigma_psi_deg,sigma_phi_deg,beta_k,beta_E,xi_UL,xi_DL,pilot_design,t0,\
rate_analytic,Ce_bound,secrecy_analytic,rate_mc,Ce_mc,secrecy_mc,\
stderr_rate,stderr_Ce,phi_star,M,seed";

/// Which result columns a command fills.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analytic,
    Mc,
    Both,
}

impl Mode {
    pub fn wants_mc(self) -> bool {
        matches!(self, Mode::Mc | Mode::Both)
    }
    pub fn wants_analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "analytic" => Ok(Mode::Analytic),
            "mc" => Ok(Mode::Mc),
            "both" => Ok(Mode::Both),
            other => Err(format!("unknown mode '{other}' (analytic | mc | both)")),
        }
    }
}

/// One CSV row: full config echo plus the per-terminal results.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub sweep_var: Option<String>,
    pub sweep_value: Option<f64>,
    /// One-based terminal index, as reported.
    pub k: usize,
    pub cfg: SystemConfig,
    pub rate_analytic: Option<f64>,
    pub ce_bound: Option<f64>,
    pub secrecy_analytic: Option<f64>,
    pub rate_mc: Option<f64>,
    pub ce_mc: Option<f64>,
    pub secrecy_mc: Option<f64>,
    pub stderr_rate: Option<f64>,
    pub stderr_ce: Option<f64>,
    pub phi_star: Option<f64>,
    pub m: Option<usize>,
}

/// Nine significant digits, deterministic across platforms.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.8e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

impl ReportRow {
    /// Lift a core report row into a CSV row. `mode` masks the columns the
    /// command did not ask for.
    pub fn from_mt(
        cfg: &ValidatedConfig,
        mt: &MtSecrecy,
        mode: Mode,
        sweep: Option<(&str, f64)>,
        phi_star: Option<f64>,
        m: Option<usize>,
    ) -> Self {
        let unbounded_ce = mt.ce_bound.is_none();
        ReportRow {
            sweep_var: sweep.map(|(v, _)| v.to_string()),
            sweep_value: sweep.map(|(_, x)| x),
            k: mt.k + 1,
            cfg: (**cfg).clone(),
            rate_analytic: mode.wants_analytic().then_some(mt.rate_analytic),
            ce_bound: if mode.wants_analytic() {
                Some(mt.ce_bound.unwrap_or(f64::INFINITY))
            } else {
                None
            },
            secrecy_analytic: mode.wants_analytic().then_some(mt.secrecy_analytic),
            rate_mc: if mode.wants_mc() { mt.rate_mc } else { None },
            ce_mc: if mode.wants_mc() {
                // phi = 1 leaves the eavesdropper capacity unbounded
                if unbounded_ce && mt.ce_mc.is_none() && mt.secrecy_mc.is_some() {
                    Some(f64::INFINITY)
                } else {
                    mt.ce_mc
                }
            } else {
                None
            },
            secrecy_mc: if mode.wants_mc() { mt.secrecy_mc } else { None },
            stderr_rate: if mode.wants_mc() { mt.stderr_rate } else { None },
            stderr_ce: if mode.wants_mc() { mt.stderr_ce } else { None },
            phi_star,
            m,
        }
    }

    fn to_csv_line(&self) -> String {
        let c = &self.cfg;
        let beta_k = c.beta.get(self.k - 1).copied().unwrap_or(f64::NAN);
        [
            self.sweep_var.clone().unwrap_or_default(),
            self.sweep_value.map(fmt_sig).unwrap_or_default(),
            self.k.to_string(),
            c.n.to_string(),
            c.k.to_string(),
            c.n_e.to_string(),
            c.n_o.to_string(),
            c.b.to_string(),
            c.t.to_string(),
            fmt_sig(c.p_t_db),
            fmt_sig(c.phi),
            fmt_sig(c.p_tau),
            fmt_sig(c.sigma_psi_deg),
            fmt_sig(c.sigma_phi_deg),
            fmt_sig(beta_k),
            fmt_sig(c.beta_e),
            fmt_sig(c.xi_ul),
            fmt_sig(c.xi_dl),
            c.pilot_design.to_string(),
            c.t0.to_string(),
            opt(self.rate_analytic),
            opt(self.ce_bound),
            opt(self.secrecy_analytic),
            opt(self.rate_mc),
            opt(self.ce_mc),
            opt(self.secrecy_mc),
            opt(self.stderr_rate),
            opt(self.stderr_ce),
            opt(self.phi_star),
            self.m.map(|m| m.to_string()).unwrap_or_default(),
            c.seed.to_string(),
        ]
        .join(",")
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot rename {} into place", tmp.display()))?;
    Ok(())
}

pub fn write_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 256 + CSV_HEADER.len() + 2);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Column-oriented plot data for the first reported terminal, one file per
/// (N_o, K) combination found in the rows: x, analytic secrecy, simulated
/// secrecy and its ±2-stderr band. The per-point band combines the rate and
/// eavesdropper errors in quadrature.
pub fn emit_plotdata(rows: &[ReportRow], dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
    let mut combos: Vec<(usize, usize)> = rows.iter().map(|r| (r.cfg.n_o, r.cfg.k)).collect();
    combos.sort_unstable();
    combos.dedup();
    let mut written = Vec::new();
    for (n_o, k_cnt) in combos {
        let mut out = String::new();
        writeln!(out, "# {stem}: N_o={n_o} K={k_cnt}; terminal 1").unwrap();
        writeln!(out, "# x secrecy_analytic secrecy_mc mc_lo mc_hi").unwrap();
        let first_k = rows
            .iter()
            .filter(|r| r.cfg.n_o == n_o && r.cfg.k == k_cnt)
            .map(|r| r.k)
            .min()
            .unwrap();
        for row in rows
            .iter()
            .filter(|r| r.cfg.n_o == n_o && r.cfg.k == k_cnt && r.k == first_k)
        {
            let x = row
                .sweep_value
                .or(row.phi_star)
                .unwrap_or(row.cfg.phi);
            let band = match (row.stderr_rate, row.stderr_ce) {
                (Some(a), Some(b)) => Some(2.0 * (a * a + b * b).sqrt()),
                _ => None,
            };
            let mc = row.secrecy_mc.unwrap_or(f64::NAN);
            let (lo, hi) = match (row.secrecy_mc, band) {
                (Some(s), Some(w)) => ((s - w).max(0.0), s + w),
                _ => (f64::NAN, f64::NAN),
            };
            writeln!(
                out,
                "{} {} {} {} {}",
                fmt_sig(x),
                opt_or_nan(row.secrecy_analytic),
                fmt_sig(mc),
                fmt_sig(lo),
                fmt_sig(hi)
            )
            .unwrap();
        }
        let path = dir.join(format!("{stem}_No{n_o}_K{k_cnt}.dat"));
        write_atomic(&path, &out)?;
        written.push(path);
    }
    Ok(written)
}

fn opt_or_nan(x: Option<f64>) -> String {
    fmt_sig(x.unwrap_or(f64::NAN))
}

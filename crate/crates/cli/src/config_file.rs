//! Flat `key = value` experiment configuration files.
//!
//! One key per line, `#` starts a comment, arrays are comma-separated.
//! Every key is required; unknown keys are rejected so misspellings cannot
//! silently fall back to defaults. Three keys accept `auto`:
//! `p_tau` (pilot power P_T/K), `t0` (B+1), and `t_grid` (ten evenly spaced
//! data slots). The `auto` markers are kept unresolved so parameter sweeps
//! that change K, B or T re-derive them per sweep point.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use secmimo_core::{auto_t_grid, PilotDesign, SystemConfig};

pub const REQUIRED_KEYS: [&str; 20] = [
    "N",
    "K",
    "N_E",
    "N_o",
    "B",
    "T",
    "P_T_dB",
    "phi",
    "p_tau",
    "sigma_psi_deg",
    "sigma_phi_deg",
    "beta",
    "beta_E",
    "xi_UL",
    "xi_DL",
    "pilot_design",
    "trials",
    "seed",
    "t0",
    "t_grid",
];

/// Parsed file with `auto` markers still unresolved.
#[derive(Debug, Clone)]
pub struct FileConfig {
    pub n: usize,
    pub k: usize,
    pub n_e: usize,
    pub n_o: usize,
    pub b: usize,
    pub t: usize,
    pub p_t_db: f64,
    pub phi: f64,
    pub p_tau: Option<f64>,
    pub sigma_psi_deg: f64,
    pub sigma_phi_deg: f64,
    pub beta: Vec<f64>,
    pub beta_e: f64,
    pub xi_ul: f64,
    pub xi_dl: f64,
    pub pilot_design: PilotDesign,
    pub trials: usize,
    pub seed: u64,
    pub t0: Option<usize>,
    pub t_grid: Option<Vec<usize>>,
}

impl FileConfig {
    /// Resolve `auto` values against the current scalar parameters.
    pub fn resolve(&self) -> SystemConfig {
        let p_t = 10f64.powf(self.p_t_db / 10.0);
        let beta = if self.beta.len() == 1 && self.k > 1 {
            vec![self.beta[0]; self.k]
        } else {
            self.beta.clone()
        };
        SystemConfig {
            n: self.n,
            k: self.k,
            n_e: self.n_e,
            n_o: self.n_o,
            b: self.b,
            t: self.t,
            p_t_db: self.p_t_db,
            phi: self.phi,
            p_tau: self.p_tau.unwrap_or(p_t / self.k as f64),
            sigma_psi_deg: self.sigma_psi_deg,
            sigma_phi_deg: self.sigma_phi_deg,
            beta,
            beta_e: self.beta_e,
            xi_ul: self.xi_ul,
            xi_dl: self.xi_dl,
            pilot_design: self.pilot_design,
            t0: self.t0.unwrap_or(self.b + 1),
            trials: self.trials,
            seed: self.seed,
            t_grid: self
                .t_grid
                .clone()
                .unwrap_or_else(|| auto_t_grid(self.b, self.t, 10)),
        }
    }
}

pub fn parse_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    parse_str(&text).with_context(|| format!("in config file {}", path.display()))
}

pub fn parse_str(text: &str) -> Result<FileConfig> {
    let mut seen: BTreeMap<&str, String> = BTreeMap::new();
    let mut unknown = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected 'key = value', got '{raw}'", lineno + 1))?;
        let key = key.trim();
        let value = value.trim().to_string();
        match REQUIRED_KEYS.iter().find(|&&k| k == key) {
            Some(&canon) => {
                if seen.insert(canon, value).is_some() {
                    bail!("line {}: duplicate key '{key}'", lineno + 1);
                }
            }
            None => unknown.push(format!("'{key}' (line {})", lineno + 1)),
        }
    }
    if !unknown.is_empty() {
        bail!("unknown keys rejected: {}", unknown.join(", "));
    }
    let missing: Vec<&str> = REQUIRED_KEYS
        .iter()
        .copied()
        .filter(|k| !seen.contains_key(k))
        .collect();
    if !missing.is_empty() {
        bail!("missing required keys: {}", missing.join(", "));
    }

    let get = |k: &str| seen.get(k).unwrap();
    let usize_of = |k: &str| -> Result<usize> {
        get(k)
            .parse::<usize>()
            .map_err(|e| anyhow!("key {k} = '{}': {e}", get(k)))
    };
    let f64_of = |k: &str| -> Result<f64> {
        get(k)
            .parse::<f64>()
            .map_err(|e| anyhow!("key {k} = '{}': {e}", get(k)))
    };

    let beta: Vec<f64> = get("beta")
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("key beta entry '{s}': {e}"))
        })
        .collect::<Result<_>>()?;

    let p_tau = match get("p_tau").as_str() {
        "auto" => None,
        v => Some(v.parse::<f64>().map_err(|e| anyhow!("key p_tau = '{v}': {e}"))?),
    };
    let t0 = match get("t0").as_str() {
        "auto" => None,
        v => Some(v.parse::<usize>().map_err(|e| anyhow!("key t0 = '{v}': {e}"))?),
    };
    let t_grid = match get("t_grid").as_str() {
        "auto" => None,
        v => Some(
            v.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|e| anyhow!("key t_grid entry '{s}': {e}"))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let pilot_design: PilotDesign = get("pilot_design")
        .parse()
        .map_err(|e: String| anyhow!(e))?;

    Ok(FileConfig {
        n: usize_of("N")?,
        k: usize_of("K")?,
        n_e: usize_of("N_E")?,
        n_o: usize_of("N_o")?,
        b: usize_of("B")?,
        t: usize_of("T")?,
        p_t_db: f64_of("P_T_dB")?,
        phi: f64_of("phi")?,
        p_tau,
        sigma_psi_deg: f64_of("sigma_psi_deg")?,
        sigma_phi_deg: f64_of("sigma_phi_deg")?,
        beta,
        beta_e: f64_of("beta_E")?,
        xi_ul: f64_of("xi_UL")?,
        xi_dl: f64_of("xi_DL")?,
        pilot_design,
        trials: usize_of("trials")?,
        seed: get("seed")
            .parse::<u64>()
            .map_err(|e| anyhow!("key seed = '{}': {e}", get("seed")))?,
        t0,
        t_grid,
    })
}

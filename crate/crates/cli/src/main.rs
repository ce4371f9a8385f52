//! `secmimo` — experiment driver for the secrecy-rate simulator.
//!
//! Subcommands: `analyze` (closed forms), `simulate` (Monte Carlo),
//! `validate` (both plus an agreement report), `sweep` (one varied
//! parameter), `optimize-phi` (power-split grid search). Exit codes:
//! 0 success, 1 configuration error, 2 numerical or I/O failure.

mod config_file;
mod output;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use output::{Mode, ReportRow};
use secmimo_core::Error as CoreError;

#[derive(Parser)]
#[command(name = "secmimo", version, about = "Secrecy-rate experiments for phase-noise-impaired massive MIMO downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (flat key = value file).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV and plot data.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (0 = all cores). Results are identical either way.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Report every terminal instead of terminal 1 only.
    #[arg(long)]
    all_mts: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the closed-form bounds only.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Run the Monte Carlo simulation only.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Run both paths and report the agreement gap.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Fail (exit 2) if the max relative rate gap exceeds this.
        #[arg(long)]
        max_gap: Option<f64>,
    },
    /// Sweep one parameter: phi | sigma_deg | N_E | N_o | K.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// VAR=v1,v2,...
        #[arg(long)]
        sweep: String,
        #[arg(long, default_value = "both")]
        mode: Mode,
    },
    /// Grid-search the power split maximizing the secrecy bound.
    OptimizePhi {
        #[command(flatten)]
        common: Common,
        /// start:stop:step
        #[arg(long, default_value = "0.01:0.99:0.01")]
        phi_grid: String,
    },
}

/// Failure with the documented exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: String) -> Self {
        Failure { code: 1, message }
    }
    fn numerical(message: String) -> Self {
        Failure { code: 2, message }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        // configuration problems exit 1, runtime problems exit 2
        let is_config = e.downcast_ref::<CoreError>().map_or(
            e.downcast_ref::<secmimo_core::ConfigError>().is_some(),
            |c| matches!(c, CoreError::Config(_)),
        );
        if is_config {
            Failure::config(format!("{e:#}"))
        } else {
            Failure::numerical(format!("{e:#}"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Analyze { common }
        | Command::Simulate { common }
        | Command::Validate { common, .. }
        | Command::Sweep { common, .. }
        | Command::OptimizePhi { common, .. } => common,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| Failure::numerical(format!("thread pool: {e}")))?;

    let file_cfg = config_file::parse_file(&common.config)
        .map_err(|e| Failure::config(format!("{e:#}")))?;
    let out_dir = common.out.clone();
    let all_mts = common.all_mts;

    pool.install(move || -> Result<(), Failure> {
        match cli.command {
            Command::Analyze { .. } => {
                let cfg = validate(&file_cfg)?;
                let outcome = runner::evaluate_point(&cfg, Mode::Analytic, all_mts, None)?;
                finish("analyze", &out_dir, &outcome.rows, &outcome.warnings)?;
                Ok(())
            }
            Command::Simulate { .. } => {
                let cfg = validate(&file_cfg)?;
                let outcome = runner::evaluate_point(&cfg, Mode::Mc, all_mts, None)?;
                finish("simulate", &out_dir, &outcome.rows, &outcome.warnings)?;
                Ok(())
            }
            Command::Validate { max_gap, .. } => {
                let cfg = validate(&file_cfg)?;
                let outcome = runner::evaluate_point(&cfg, Mode::Both, all_mts, None)?;
                finish("validate", &out_dir, &outcome.rows, &outcome.warnings)?;
                let worst = outcome
                    .rate_gaps
                    .iter()
                    .cloned()
                    .fold((0usize, 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
                println!(
                    "max relative rate gap: {:.6} (terminal {})",
                    worst.1, worst.0
                );
                if let Some(limit) = max_gap {
                    if worst.1 > limit {
                        return Err(Failure::numerical(format!(
                            "analytic/simulated rate gap {:.6} exceeds --max-gap {limit}",
                            worst.1
                        )));
                    }
                }
                Ok(())
            }
            Command::Sweep { sweep, mode, .. } => {
                let spec = runner::parse_sweep(&sweep).map_err(|e| Failure::config(format!("{e:#}")))?;
                let (rows, warnings) = runner::run_sweep(&file_cfg, &spec, mode, all_mts)?;
                finish("sweep", &out_dir, &rows, &warnings)?;
                let files = output::emit_plotdata(&rows, &out_dir, "sweep")
                    .map_err(|e| Failure::numerical(format!("{e:#}")))?;
                for f in files {
                    println!("wrote {}", f.display());
                }
                Ok(())
            }
            Command::OptimizePhi { phi_grid, .. } => {
                let cfg = validate(&file_cfg)?;
                let grid =
                    runner::parse_phi_grid(&phi_grid).map_err(|e| Failure::config(format!("{e:#}")))?;
                let outcome = runner::run_optimize(&cfg, &grid, all_mts)?;
                finish("optimize_phi", &out_dir, &outcome.rows, &outcome.warnings)?;
                let files = output::emit_plotdata(&outcome.curve_rows, &out_dir, "optimize_phi_curve")
                    .map_err(|e| Failure::numerical(format!("{e:#}")))?;
                for f in files {
                    println!("wrote {}", f.display());
                }
                for row in &outcome.rows {
                    println!(
                        "terminal {}: phi* = {:.4}, secrecy bound {:.6} bits/slot",
                        row.k,
                        row.phi_star.unwrap_or(f64::NAN),
                        row.secrecy_analytic.unwrap_or(f64::NAN)
                    );
                }
                Ok(())
            }
        }
    })
}

fn validate(file_cfg: &config_file::FileConfig) -> Result<secmimo_core::ValidatedConfig, Failure> {
    file_cfg
        .resolve()
        .validate()
        .map_err(|e| Failure::config(e.to_string()))
}

fn finish(
    name: &str,
    out_dir: &std::path::Path,
    rows: &[ReportRow],
    warnings: &[String],
) -> Result<(), Failure> {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let csv_path = out_dir.join(format!("{name}.csv"));
    output::write_csv(&csv_path, rows).map_err(|e| Failure::numerical(format!("{e:#}")))?;
    println!("wrote {} ({} rows)", csv_path.display(), rows.len());
    for row in rows {
        let fmt_opt = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into());
        println!(
            "  {}k={}: secrecy_analytic={} secrecy_mc={} rate_analytic={} rate_mc={} Ce_bound={} Ce_mc={}",
            row.sweep_var
                .as_ref()
                .map(|v| format!("{v}={} ", output::fmt_sig(row.sweep_value.unwrap())))
                .unwrap_or_default(),
            row.k,
            fmt_opt(row.secrecy_analytic),
            fmt_opt(row.secrecy_mc),
            fmt_opt(row.rate_analytic),
            fmt_opt(row.rate_mc),
            fmt_opt(row.ce_bound),
            fmt_opt(row.ce_mc),
        );
    }
    Ok(())
}

//! End-to-end tests of the `secmimo` binary: config ingestion, exit codes,
//! CSV/plot-data emission and the documented command behaviours.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_secmimo"))
}

fn desk_config(dir: &Path, overrides: &[(&str, &str)]) -> std::path::PathBuf {
    let mut text = String::from(
        "\
N = 32
K = 4
N_E = 2
N_o = 1
B = 4
T = 40
P_T_dB = 10
phi = 0.5
p_tau = auto
sigma_psi_deg = 6
sigma_phi_deg = 6
beta = 1,1,1,1
beta_E = 1
xi_UL = 1
xi_DL = 1
pilot_design = time_orthogonal
trials = 400
seed = 11
t0 = auto
t_grid = auto
",
    );
    for (key, value) in overrides {
        let mut replaced = false;
        text = text
            .lines()
            .map(|l| {
                if l.starts_with(&format!("{key} ")) {
                    replaced = true;
                    format!("{key} = {value}")
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n";
        assert!(replaced, "override key {key} not found");
    }
    let path = dir.join("exp.conf");
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> usize {
    rows[0].iter().position(|h| h == name).expect("column exists")
}

#[test]
fn analyze_emits_positive_secrecy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), &[("N", "128"), ("N_E", "4"), ("T", "500")]);
    let out = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("analyze.csv"));
    assert_eq!(rows.len(), 2); // header + terminal 1
    let secrecy: f64 = rows[1][column(&rows, "secrecy_analytic")].parse().unwrap();
    assert!(secrecy > 0.0);
    // analytic mode leaves the simulation columns empty
    assert!(rows[1][column(&rows, "rate_mc")].is_empty());
    assert!(rows[1][column(&rows, "Ce_mc")].is_empty());
}

#[test]
fn all_mts_reports_every_terminal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), &[]);
    let out = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--all-mts",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("analyze.csv"));
    assert_eq!(rows.len(), 5);
    let k_col = column(&rows, "k");
    let ks: Vec<&str> = rows[1..].iter().map(|r| r[k_col].as_str()).collect();
    assert_eq!(ks, vec!["1", "2", "3", "4"]);
}

#[test]
fn validate_desk_scale_agrees_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), &[]);
    let out = run(&[
        "validate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--max-gap",
        "0.10",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("max relative rate gap"), "{stdout}");
    let rows = csv_rows(&dir.path().join("validate.csv"));
    let ra: f64 = rows[1][column(&rows, "rate_analytic")].parse().unwrap();
    let rm: f64 = rows[1][column(&rows, "rate_mc")].parse().unwrap();
    assert!((rm - ra).abs() / ra <= 0.10);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // unknown key
    let path = dir.path().join("bad.conf");
    let base = fs::read_to_string(desk_config(dir.path(), &[])).unwrap();
    fs::write(&path, format!("{base}bandwidth = 10\n")).unwrap();
    let out = run(&["analyze", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown keys"));

    // violated invariant: N_o does not divide N
    let cfg = desk_config(dir.path(), &[("N_o", "3")]);
    let out = run(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("N mod N_o"));

    // missing file
    let out = run(&["analyze", "--config", dir.path().join("nope.conf").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    // a sweep point that fails validation is a config error too
    let cfg = desk_config(dir.path(), &[]);
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--sweep",
        "N_o=2,3",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    // K sweep with non-uniform path losses cannot be broadcast
    let cfg = desk_config(dir.path(), &[("beta", "1,0.5,1,1")]);
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--sweep",
        "K=8",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // B > K with zero uplink noise leaves empty training slots: the
    // training covariance is singular
    let cfg = desk_config(dir.path(), &[("B", "6"), ("xi_UL", "0")]);
    let out = run(&[
        "analyze",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn full_power_to_data_reports_unbounded_eavesdropper() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), &[("phi", "1.0"), ("trials", "64")]);
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("phi = 1"));
    let rows = csv_rows(&dir.path().join("simulate.csv"));
    assert_eq!(rows[1][column(&rows, "Ce_mc")], "inf");
    let secrecy: f64 = rows[1][column(&rows, "secrecy_mc")].parse().unwrap();
    assert_eq!(secrecy, 0.0);
}

#[test]
fn phi_sweep_has_interior_maximum() {
    // distributed oscillators: the secrecy-vs-phi curve peaks strictly
    // inside the sweep range (the common-LO peak sits at the far-left edge)
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(
        dir.path(),
        &[("N", "128"), ("N_o", "128"), ("N_E", "4"), ("T", "500")],
    );
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--sweep",
        "phi=0.05,0.2,0.35,0.5,0.65,0.8,0.95",
        "--mode",
        "analytic",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("sweep.csv"));
    let col = column(&rows, "secrecy_analytic");
    let ys: Vec<f64> = rows[1..].iter().map(|r| r[col].parse().unwrap()).collect();
    let best = ys.iter().cloned().fold(f64::MIN, f64::max);
    assert!(best > ys[0] && best > *ys.last().unwrap(), "no interior maximum: {ys:?}");
}

#[test]
fn sweep_plotdata_round_trips_against_csv() {
    let dir = tempfile::tempdir().unwrap();
    let phis = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,0.95";
    for n_o in ["1", "4"] {
        let sub = dir.path().join(format!("no{n_o}"));
        fs::create_dir_all(&sub).unwrap();
        let cfg = desk_config(&sub, &[("N_o", n_o), ("trials", "64")]);
        let out = run(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            sub.to_str().unwrap(),
            "--sweep",
            &format!("phi={phis}"),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let dat_path = sub.join(format!("sweep_No{n_o}_K4.dat"));
        let dat = fs::read_to_string(&dat_path).unwrap();
        let data_lines: Vec<&str> = dat.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data_lines.len(), 10);

        // plot values equal the CSV columns at serialization precision
        let rows = csv_rows(&sub.join("sweep.csv"));
        assert_eq!(rows.len(), 11);
        let (c_phi, c_sec, c_mc) = (
            column(&rows, "sweep_value"),
            column(&rows, "secrecy_analytic"),
            column(&rows, "secrecy_mc"),
        );
        for (line, row) in data_lines.iter().zip(&rows[1..]) {
            let cols: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(cols.len(), 5);
            assert_eq!(cols[0], row[c_phi]);
            assert_eq!(cols[1], row[c_sec]);
            assert_eq!(cols[2], row[c_mc]);
        }
    }
}

#[test]
fn optimize_phi_reports_star_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), &[("N", "128"), ("N_E", "4"), ("T", "500")]);
    let out = run(&[
        "optimize-phi",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--phi-grid",
        "0.05:0.95:0.05",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("optimize_phi.csv"));
    let phi_star: f64 = rows[1][column(&rows, "phi_star")].parse().unwrap();
    assert!(phi_star > 0.0 && phi_star < 1.0);
    let curve = fs::read_to_string(dir.path().join("optimize_phi_curve_No1_K4.dat")).unwrap();
    assert_eq!(curve.lines().filter(|l| !l.starts_with('#')).count(), 19);
    assert!(String::from_utf8_lossy(&out.stdout).contains("phi* ="));
}

#[test]
fn single_point_sweep_emits_single_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), &[("trials", "32")]);
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--sweep",
        "N_E=2",
    ]);
    assert!(out.status.success());
    let dat = fs::read_to_string(dir.path().join("sweep_No1_K4.dat")).unwrap();
    let (comments, data): (Vec<&str>, Vec<&str>) = dat.lines().partition(|l| l.starts_with('#'));
    assert!(!comments.is_empty());
    assert_eq!(data.len(), 1);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = desk_config(dir.path(), &[("trials", "128")]);
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        fs::create_dir_all(&out_dir).unwrap();
        let out = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success());
        outputs.push(fs::read(out_dir.join("simulate.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

use std::path::Path;
use std::process::{Command, Output};

use gle_lab::io::RunConfig;

fn gle_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gle-lab"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .unwrap()
}

fn table(path: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fig1_starts_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = gle_lab(
        dir.path(),
        &["fig1", "--points", "101", "--max-lag-ratio", "10"],
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("fig1.csv")).unwrap();
    assert!(text.starts_with("lag_ratio,lambda1,lambda0\n0.0,1.0,1.0\n"));
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), 102);
    assert_eq!(
        gle_lab(dir.path(), &["fig1", "--points", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn closed_and_laplace_routes_agree() {
    let dir = tempfile::tempdir().unwrap();
    for route in ["closed", "laplace", "volterra"] {
        let out = gle_lab(
            dir.path(),
            &[
                "acf", "--model", "linear", "--route", route, "--step", "0.02", "--lags", "500",
            ],
        );
        assert!(
            out.status.success(),
            "{route}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let closed = table(&dir.path().join("acf_linear_closed.csv"));
    let laplace = table(&dir.path().join("acf_linear_laplace.csv"));
    let worst = closed
        .iter()
        .zip(&laplace)
        .map(|(a, b)| (a[1] - b[1]).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn capability_errors_print_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = gle_lab(
        dir.path(),
        &[
            "acf", "--model", "stock", "--theta", "1.5", "--route", "closed",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Capabilities"));
    let out = gle_lab(
        dir.path(),
        &[
            "acf", "--model", "stock", "--theta", "1.5", "--route", "laplace", "--lags", "50",
        ],
    );
    assert!(out.status.success());
    let out = gle_lab(
        dir.path(),
        &["acf", "--model", "boltzmann", "--route", "laplace"],
    );
    assert_eq!(out.status.code(), Some(3));
    let help = Command::new(env!("CARGO_BIN_EXE_gle-lab"))
        .args(["acf", "--help"])
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&help.stdout).contains("Capabilities"));
}

#[test]
fn boltzmann_volterra_route_starts_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = gle_lab(
        dir.path(),
        &[
            "acf",
            "--model",
            "boltzmann",
            "--route",
            "volterra",
            "--step",
            "0.01",
            "--lags",
            "300",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows = table(&dir.path().join("acf_boltzmann_volterra.csv"));
    assert_eq!(rows[0], vec![0.0, 1.0]);
    assert_eq!(rows.len(), 301);
}

#[test]
fn randomized_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = gle_lab(
        dir.path(),
        &["simulate", "--model", "white", "--steps", "256"],
    );
    assert_eq!(out.status.code(), Some(2));
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "seed = 4\ntime_unit = \"day\"\n").unwrap();
    let out = gle_lab(
        dir.path(),
        &[
            "--config",
            config.to_str().unwrap(),
            "simulate",
            "--model",
            "white",
            "--steps",
            "256",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = std::fs::read_to_string(dir.path().join("simulate_white-noise_summary.csv"))
        .or_else(|_| std::fs::read_to_string(dir.path().join("simulate_white_summary.csv")))
        .unwrap();
    assert!(summary.contains("seed,4\n") && summary.contains("time_unit,day\n"));
    let out = gle_lab(
        dir.path(),
        &[
            "simulate", "--model", "white", "--steps", "1000", "--seed", "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_volatility_gbm_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--model", "gbm", "--sigma", "0", "--mu", "0.05", "--m0", "100", "--steps",
        "256", "--step", "0.01", "--paths", "2", "--seed", "1",
    ];
    let out = gle_lab(dir.path(), &args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for row in table(&dir.path().join("simulate_gbm_prices.csv")) {
        let expected = 100.0 * (0.05 * row[0]).exp();
        assert!((row[1] / expected - 1.0).abs() < 1e-12 && row[1] == row[2]);
    }
}

#[test]
fn estimate_reports_class_and_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = gle_lab(
        dir.path(),
        &[
            "simulate", "--model", "stock", "--theta", "1", "--tau", "1", "--step", "0.1",
            "--steps", "16384", "--paths", "1", "--prices", "--seed", "6",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let wide = std::fs::read_to_string(dir.path().join("simulate_stock_prices.csv")).unwrap();
    let prices: String = wide
        .lines()
        .map(|l| format!("{l}\n"))
        .collect::<String>()
        .replacen("t,path0", "t,price", 1);
    let input = dir.path().join("prices.csv");
    std::fs::write(&input, prices).unwrap();
    let out = gle_lab(
        dir.path(),
        &["estimate", input.to_str().unwrap(), "--window", "15"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(dir.path().join("estimate.csv")).unwrap();
    assert!(report.starts_with("key,value\ntau_r,") && report.contains("\nclass,"));

    let constant = dir.path().join("constant.csv");
    std::fs::write(&constant, "price\n".to_string() + &"5\n".repeat(200)).unwrap();
    let out = gle_lab(
        dir.path(),
        &["estimate", constant.to_str().unwrap(), "--step", "1"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero variance"));

    let trend = dir.path().join("trend.csv");
    let rows: String = (0..200)
        .map(|k| format!("{},{}\n", k, (0.01 * k as f64).exp()))
        .collect();
    std::fs::write(&trend, "t,price\n".to_string() + &rows).unwrap();
    let out = gle_lab(dir.path(), &["estimate", trend.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero variance"));

    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "t,price\n0,1\n1,x\n").unwrap();
    let out = gle_lab(dir.path(), &["estimate", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn audits_pass_for_exact_identities() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["audit", "--model", "linear", "--complex", "--seed", "3"],
        vec![
            "audit",
            "--model",
            "stock",
            "--theta",
            "2.5",
            "--complex",
            "--seed",
            "3",
        ],
        vec!["audit", "--model", "boltzmann"],
        vec![
            "audit",
            "--model",
            "differential",
            "--p-min",
            "0.01",
            "--p-max",
            "100",
        ],
        vec!["audit", "--model", "fractional", "--theta", "0.7"],
    ] {
        let out = gle_lab(dir.path(), &args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
    let text = std::fs::read_to_string(dir.path().join("audit_differential.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains(",ok,")));
    let out = gle_lab(
        dir.path(),
        &["audit", "--model", "boltzmann", "--complex", "--seed", "1"],
    );
    assert_eq!(out.status.code(), Some(3));
    let out = gle_lab(
        dir.path(),
        &["--tolerance", "1e-30", "audit", "--model", "linear"],
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn config_echoes_back() {
    let c = RunConfig {
        seed: Some(11),
        mu: Some(0.05),
        m0: Some(100.0),
        ..RunConfig::default()
    };
    let text = c.to_text().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, &text).unwrap();
    let back = RunConfig::load(&path).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.to_text().unwrap(), text);
}

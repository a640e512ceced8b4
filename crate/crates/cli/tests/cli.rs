use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const ORACLE: &str = include_str!("../../core/tests/fixtures/oracle.json");

fn truncfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_truncfit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn truncfit_env(args: &[&str], var: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_truncfit"))
        .args(args)
        .env(var, value)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<f64>], name: &str) -> Vec<f64> {
    let j = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[j]).collect()
}

/// Composite Simpson over equally spaced samples (odd count).
fn simpson(ys: &[f64], h: f64) -> f64 {
    assert!(ys.len() % 2 == 1 && ys.len() >= 3);
    let n = ys.len() - 1;
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * ys[i]).sum();
    h / 3.0 * (ys[0] + inner + ys[n])
}

fn oracle_row(k: u64) -> Value {
    let o: Value = serde_json::from_str(ORACLE).unwrap();
    o["example_1d"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["degree"] == k)
        .unwrap()
        .clone()
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov critical value at level 0.001.
fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

#[test]
fn population_fit_recovers_a_polynomial_target_on_the_cube() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = truncfit(&[
        "fit",
        "--target",
        "poly:1.5,-2,0.5",
        "--set",
        "interval:0.2,0.6",
        "--degree",
        "3",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = read_json(&dir.path().join("metrics.json"));
    assert_eq!(m["schema_version"], "1");
    let tv_k = m["tv_on_k"].as_f64().unwrap();
    assert!(tv_k <= 1e-4, "tv_on_K = {tv_k}");
    assert!(m["kl_on_s"].as_f64().unwrap() >= -1e-12);
}

#[test]
fn sin10_degree_10_metrics_match_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sin10.toml");
    std::fs::write(
        &cfg,
        "target = \"sin10\"\nset = \"interval:0,1/2\"\nmode = \"population\"\ndegree = 10\nout = \".\"\n",
    )
    .unwrap();
    let o = truncfit(&["fit", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = read_json(&dir.path().join("metrics.json"));
    let want = oracle_row(10);
    for key in ["tv_on_s", "tv_on_k"] {
        let got = m[key].as_f64().unwrap();
        let exp = want[key].as_f64().unwrap();
        assert!((got - exp).abs() <= 1e-3, "{key}: {got} vs {exp}");
    }
    for name in [
        "fit_report.json",
        "density_truth.csv",
        "density_fit.csv",
        "plot_manifest.json",
        "run_info.json",
    ] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    for name in ["fit_report.json", "plot_manifest.json", "run_info.json"] {
        assert_eq!(read_json(&dir.path().join(name))["schema_version"], "1", "{name}");
    }
}

#[test]
fn command_line_overrides_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "target = \"sin10\"\nset = \"interval:0,1/2\"\ndegree = 10\nout = \".\"\n",
    )
    .unwrap();
    let o = truncfit(&["fit", "--config", cfg.to_str().unwrap(), "--degree", "4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = read_json(&dir.path().join("fit_report.json"));
    assert_eq!(report["config"]["degree"], 4);
    assert_eq!(report["result"]["coeffs"]["coeffs"].as_array().unwrap().len(), 4);
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("does-not-exist");
    let o = truncfit(&[
        "fit",
        "--target",
        "sin10",
        "--set",
        "interval:0,0.5",
        "--degree",
        "4",
        "--out",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("does not exist"));
    let o = truncfit(&["example-1d", "--out", missing.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = truncfit(&[
        "sample",
        "--target",
        "uniform",
        "--set",
        "cube",
        "-n",
        "3",
        "--out",
        missing.join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn invalid_inputs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec![
            "fit", "--target", "gauss", "--set", "cube", "--degree", "2", "--out", out,
        ],
        vec![
            "fit",
            "--target",
            "sin10",
            "--set",
            "interval:0.5",
            "--degree",
            "2",
            "--out",
            out,
        ],
        vec![
            "fit",
            "--target",
            "sin10",
            "--set",
            "cube",
            "--degree",
            "2",
            "--curve-resolution",
            "10",
            "--out",
            out,
        ],
        vec![
            "fit", "--target", "uniform", "--set", "cube:2", "--degree", "2", "--out", out,
        ],
    ] {
        let o = truncfit(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
    let o = truncfit_env(&["verify", "--suite", "pinsker"], "TRUNCFIT_THREADS", "zero");
    assert_eq!(code(&o), 2);
}

#[test]
fn negligible_set_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = truncfit(&[
        "sample",
        "--target",
        "uniform",
        "--set",
        "ball:0.5,0.5;0.00001",
        "-n",
        "10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn verify_filter_runs_only_the_named_suite() {
    let o = truncfit(&["verify", "--suite", "pinsker", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["schema_version"], "1");
    assert_eq!(doc["passed"], true);
    let reports = doc["reports"].as_array().unwrap();
    assert!(!reports.is_empty());
    assert!(reports
        .iter()
        .all(|r| r["name"].as_str().unwrap().starts_with("pinsker")));
    assert!(stderr(&o).contains("PASS"));
}

#[test]
fn verify_unknown_suite_lists_the_available_ones() {
    let o = truncfit(&["verify", "--suite", "no-such-suite"]);
    assert_eq!(code(&o), 2);
    let msg = stderr(&o);
    for suite in [
        "taylor",
        "multiindex",
        "carbery_wright",
        "distortion",
        "pinsker",
        "kl_supnorm",
    ] {
        assert!(msg.contains(suite), "{msg}");
    }
}

#[test]
fn sample_with_zero_points_writes_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("none.csv");
    let o = truncfit(&[
        "sample",
        "--target",
        "sin10",
        "--set",
        "interval:0,0.5",
        "-n",
        "0",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "x\n");
    let out2 = dir.path().join("none2.csv");
    truncfit(&[
        "sample",
        "--target",
        "uniform",
        "--set",
        "cube:2",
        "-n",
        "0",
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(std::fs::read_to_string(&out2).unwrap(), "x1,x2\n");
}

#[test]
fn uniform_samples_pass_a_ks_test() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.csv");
    let n = 20_000;
    let o = truncfit(&[
        "sample",
        "--target",
        "uniform",
        "--set",
        "interval:0.2,0.7",
        "-n",
        &n.to_string(),
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (header, rows) = read_table(&out);
    assert_eq!(header, ["x"]);
    let xs = column(&header, &rows, "x");
    assert_eq!(xs.len(), n);
    let d = ks_statistic(xs, |x| ((x - 0.2) / 0.5).clamp(0.0, 1.0));
    assert!(d <= ks_critical(n), "KS {d}");
}

#[test]
fn sin10_samples_pass_a_ks_test_against_the_fixture_cdf() {
    // CDF of e^{sin 10x} on [0, 1/2] by Simpson on a fine grid, anchored to the fixture value at 1/4.
    let m = 200_000;
    let h = 0.5 / m as f64;
    let dens: Vec<f64> = (0..=m).map(|i| (10.0 * i as f64 * h).sin().exp()).collect();
    let mut cum = vec![0.0; m + 1];
    for i in (2..=m).step_by(2) {
        cum[i] = cum[i - 2] + h / 3.0 * (dens[i - 2] + 4.0 * dens[i - 1] + dens[i]);
        cum[i - 1] = cum[i - 2] + h / 2.0 * (dens[i - 2] + dens[i - 1]);
    }
    let total = cum[m];
    let o: Value = serde_json::from_str(ORACLE).unwrap();
    assert!((cum[m / 2] / total - o["cdf_sin10_half_at_quarter"].as_f64().unwrap()).abs() < 1e-9);
    let cdf = |x: f64| {
        let i = ((x / h) as usize).min(m - 1);
        let t = (x - i as f64 * h) / h;
        ((1.0 - t) * cum[i] + t * cum[i + 1]) / total
    };

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let n = 20_000;
    let run = truncfit(&[
        "sample",
        "--target",
        "sin10",
        "--set",
        "interval:0,1/2",
        "-n",
        &n.to_string(),
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let (header, rows) = read_table(&out);
    let d = ks_statistic(column(&header, &rows, "x"), cdf);
    assert!(d <= ks_critical(n), "KS {d}");
    let stats = read_json(&dir.path().join("s.csv.stats.json"));
    assert_eq!(stats["stats"]["accepts"], n);
}

fn files_except_run_info(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().contains("run_info"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn artifacts_are_byte_identical_across_runs_and_thread_counts() {
    let args = |out: &str| {
        vec![
            "fit",
            "--target",
            "exp_scaled:0.8",
            "--set",
            "interval:0.1,0.6",
            "--mode",
            "psgd",
            "--degree",
            "2",
            "--steps",
            "4000",
            "--step-size",
            "0.05",
            "--seed",
            "9",
            "--curve-resolution",
            "129",
            "--out",
        ]
        .into_iter()
        .map(String::from)
        .chain([out.to_string()])
        .collect::<Vec<String>>()
    };
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (i, dir) in dirs.iter().enumerate() {
        let a = args(dir.path().to_str().unwrap());
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        let o = if i == 2 {
            truncfit_env(&a, "TRUNCFIT_THREADS", "1")
        } else {
            truncfit(&a)
        };
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let first = files_except_run_info(dirs[0].path());
    assert_eq!(first.len(), 5);
    for dir in &dirs[1..] {
        assert!(
            first == files_except_run_info(dir.path()),
            "artifacts differ in {}",
            dir.path().display()
        );
    }
    let report = read_json(&dirs[0].path().join("fit_report.json"));
    assert_eq!(report["mode"], "psgd");
    assert_eq!(report["result"]["schema_version"], "1");
    assert_eq!(report["result"]["trajectory"].as_array().unwrap().len(), 10);
}

#[test]
fn fitted_curves_integrate_to_one_on_the_cube_and_on_the_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = truncfit(&[
        "fit",
        "--target",
        "sin10",
        "--set",
        "interval:0,1/2",
        "--degree",
        "8",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for file in ["density_fit.csv", "density_truth.csv"] {
        let (header, rows) = read_table(&dir.path().join(file));
        assert_eq!(header, ["x", "pdf", "logpdf", "pdf_on_s", "logpdf_on_s"]);
        let xs = column(&header, &rows, "x");
        let h = xs[1] - xs[0];
        let pdf = column(&header, &rows, "pdf");
        let on_cube = simpson(&pdf, h);
        assert!((on_cube - 1.0).abs() <= 1e-6, "{file}: {on_cube}");
        let inside: Vec<f64> = xs
            .iter()
            .zip(column(&header, &rows, "pdf_on_s"))
            .filter(|(x, _)| **x <= 0.5)
            .map(|(_, p)| p)
            .collect();
        let on_set = simpson(&inside, h);
        assert!((on_set - 1.0).abs() <= 1e-6, "{file}: {on_set}");
        for (p, lp) in pdf.iter().zip(column(&header, &rows, "logpdf")) {
            assert!((p - lp.exp()).abs() <= 1e-12 * p.max(1.0));
        }
        let outside = column(&header, &rows, "logpdf_on_s");
        assert!(xs
            .iter()
            .zip(&outside)
            .all(|(x, l)| *x <= 0.5 || *l == f64::NEG_INFINITY));
    }
}

#[test]
fn example_1d_writes_the_sweep_and_holds_its_claims() {
    let dir = tempfile::tempdir().unwrap();
    let o = truncfit(&["example-1d", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    for k in [4, 6, 8, 10, 12, 14, 16, 20] {
        assert!(dir.path().join(format!("fit_k{k:02}.csv")).is_file());
    }
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["schema_version"], "1");
    let claims = summary["claims"].as_array().unwrap();
    assert_eq!(claims.len(), 3);
    assert!(claims.iter().all(|c| c["passed"] == true));
    for row in summary["rows"].as_array().unwrap() {
        let got = row["tv_on_k"].as_f64().unwrap();
        let want = row["reference_tv_on_k"].as_f64().unwrap();
        assert!((got - want).abs() <= 1e-3, "degree {}: {got} vs {want}", row["degree"]);
    }
    let (header, rows) = read_table(&dir.path().join("summary.csv"));
    assert_eq!(rows.len(), 8);
    assert_eq!(header[..3], ["degree", "tv_on_s", "tv_on_k"]);
}

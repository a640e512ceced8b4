//! The `sin(10x)` on `[0, 1/2]` degree sweep.
//!
//! Each degree is fitted by the population MLE on the half interval and
//! compared with the target both on the interval and on the whole of
//! `[0,1]`. The sweep checks three claims, with thresholds read from the
//! committed fixture file:
//!
//! * on the interval every fit is about as good as degree 4;
//! * on the cube degree 12 is worse than degree 10;
//! * on the cube every degree from 16 on is accurate.

use std::path::Path;

use serde::{Deserialize, Serialize};
use truncfit_core::density::tv_distance;
use truncfit_core::mle::population_mle_1d;
use truncfit_core::{LogDensity, QuadratureSpec, SurvivalSet, TruncatedDensity, SCHEMA_VERSION};

use crate::artifacts::{write_curve, write_json, Clock, Plot, PlotManifest, Series};
use crate::config::DEFAULT_OPT_TOL;
use crate::error::{CliError, CliResult};

pub const DEGREES: [u32; 8] = [4, 6, 8, 10, 12, 14, 16, 20];
const SET_HI: f64 = 0.5;
const ORACLE: &str = include_str!("../../../core/tests/fixtures/oracle.json");

#[derive(Deserialize)]
struct OracleRow {
    degree: u32,
    tv_on_s: f64,
    tv_on_k: f64,
}

#[derive(Deserialize)]
pub struct Thresholds {
    pub tv_on_s_slack: f64,
    pub overfit_pair: [u32; 2],
    pub settled_from_degree: u32,
    pub tv_on_k_settled_max: f64,
}

#[derive(Deserialize)]
struct Oracle {
    example_1d: Vec<OracleRow>,
    example_1d_claims: Thresholds,
}

fn oracle() -> Oracle {
    serde_json::from_str(ORACLE).expect("committed fixture parses")
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub degree: u32,
    pub tv_on_s: f64,
    pub tv_on_k: f64,
    pub reference_tv_on_s: Option<f64>,
    pub reference_tv_on_k: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Claim {
    pub name: &'static str,
    pub statement: String,
    pub passed: bool,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: &'static str,
    target: &'static str,
    set: [f64; 2],
    rows: &'a [SweepRow],
    claims: &'a [Claim],
}

/// Claims evaluated on a finished sweep.
pub fn evaluate_claims(rows: &[SweepRow], th: &Thresholds) -> Vec<Claim> {
    let tv = |k: u32| rows.iter().find(|r| r.degree == k);
    let mut claims = Vec::new();

    let first = &rows[0];
    let worst = rows
        .iter()
        .max_by(|a, b| a.tv_on_s.total_cmp(&b.tv_on_s))
        .expect("nonempty sweep");
    claims.push(Claim {
        name: "good_on_set",
        statement: format!(
            "tv_on_S(k) <= tv_on_S({}) + {} for every degree (worst: k = {}, {:.3e} vs {:.3e})",
            first.degree, th.tv_on_s_slack, worst.degree, worst.tv_on_s, first.tv_on_s
        ),
        passed: worst.tv_on_s <= first.tv_on_s + th.tv_on_s_slack,
    });

    let [lo, hi] = th.overfit_pair;
    let (a, b) = (
        tv(lo).map_or(f64::NAN, |r| r.tv_on_k),
        tv(hi).map_or(f64::NAN, |r| r.tv_on_k),
    );
    claims.push(Claim {
        name: "not_monotone_on_cube",
        statement: format!("tv_on_K({hi}) > tv_on_K({lo}) ({b:.3e} vs {a:.3e})"),
        passed: b > a,
    });

    let settled: Vec<&SweepRow> = rows.iter().filter(|r| r.degree >= th.settled_from_degree).collect();
    let worst_settled = settled.iter().map(|r| r.tv_on_k).fold(0.0, f64::max);
    claims.push(Claim {
        name: "settles_on_cube",
        statement: format!(
            "tv_on_K(k) <= {} for k >= {} (worst {:.3e})",
            th.tv_on_k_settled_max, th.settled_from_degree, worst_settled
        ),
        passed: !settled.is_empty() && worst_settled <= th.tv_on_k_settled_max,
    });
    claims
}

pub fn run(out: &Path, curve_resolution: usize) -> CliResult<()> {
    let clock = Clock::start();
    if !out.is_dir() {
        return Err(CliError::config(format!(
            "output directory {} does not exist",
            out.display()
        )));
    }
    let oracle = oracle();
    let f = LogDensity::sin10();
    let set = SurvivalSet::interval(0.0, SET_HI)?;
    let cube = SurvivalSet::cube(1)?;

    let truth_spec = QuadratureSpec::for_degree(1, DEGREES[0]);
    write_curve(
        &out.join("truth.csv"),
        &TruncatedDensity::new(f.clone(), cube.clone(), truth_spec)?,
        &TruncatedDensity::new(f.clone(), set.clone(), truth_spec)?,
        curve_resolution,
    )?;

    let mut rows = Vec::new();
    for &k in &DEGREES {
        let spec = QuadratureSpec::for_degree(1, k);
        let fit = population_mle_1d(&f, &set, k, &spec, DEFAULT_OPT_TOL)?;
        let fit_k = TruncatedDensity::new(fit.clone(), cube.clone(), spec)?;
        let fit_s = TruncatedDensity::new(fit, set.clone(), spec)?;
        let truth_k = TruncatedDensity::new(f.clone(), cube.clone(), spec)?;
        let truth_s = TruncatedDensity::new(f.clone(), set.clone(), spec)?;
        write_curve(&out.join(curve_name(k)), &fit_k, &fit_s, curve_resolution)?;
        let reference = oracle.example_1d.iter().find(|r| r.degree == k);
        rows.push(SweepRow {
            degree: k,
            tv_on_s: tv_distance(&truth_s, &fit_s, &spec)?,
            tv_on_k: tv_distance(&truth_k, &fit_k, &spec)?,
            reference_tv_on_s: reference.map(|r| r.tv_on_s),
            reference_tv_on_k: reference.map(|r| r.tv_on_k),
        });
    }

    let claims = evaluate_claims(&rows, &oracle.example_1d_claims);
    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    write_json(
        &out.join("summary.json"),
        &Summary {
            schema_version: SCHEMA_VERSION,
            target: "sin10",
            set: [0.0, SET_HI],
            rows: &rows,
            claims: &claims,
        },
    )?;
    write_json(&out.join("plot_manifest.json"), &manifest())?;
    write_json(&out.join("run_info.json"), &clock.finish())?;

    println!("{:>6}  {:>12}  {:>12}", "degree", "tv_on_S", "tv_on_K");
    for r in &rows {
        println!("{:>6}  {:>12.4e}  {:>12.4e}", r.degree, r.tv_on_s, r.tv_on_k);
    }
    for c in &claims {
        println!(
            "{}  {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.statement
        );
    }
    match claims.iter().find(|c| !c.passed) {
        Some(c) => Err(CliError::Claim(format!("{}: {}", c.name, c.statement))),
        None => Ok(()),
    }
}

fn curve_name(k: u32) -> String {
    format!("fit_k{k:02}.csv")
}

fn manifest() -> PlotManifest {
    let curves = |id: &str, title: &str, column: &str| {
        let mut series = vec![Series {
            file: "truth.csv".into(),
            column: column.into(),
            label: "sin(10x)".into(),
        }];
        series.extend(DEGREES.iter().map(|&k| Series {
            file: curve_name(k),
            column: column.into(),
            label: format!("degree {k}"),
        }));
        Plot {
            id: id.into(),
            title: title.into(),
            kind: "line",
            x_columns: vec!["x".into()],
            y_label: "density".into(),
            series,
        }
    };
    let tv = Plot {
        id: "tv_by_degree".into(),
        title: "Total variation by degree".into(),
        kind: "line",
        x_columns: vec!["degree".into()],
        y_label: "total variation".into(),
        series: ["tv_on_s", "tv_on_k"]
            .iter()
            .map(|c| Series {
                file: "summary.csv".into(),
                column: c.to_string(),
                label: c.replace("tv_on_", "on "),
            })
            .collect(),
    };
    PlotManifest::new(vec![
        curves("on_set", "Fits normalized on [0, 1/2]", "pdf_on_s"),
        curves("on_cube", "Fits normalized on [0, 1]", "pdf"),
        tv,
    ])
}

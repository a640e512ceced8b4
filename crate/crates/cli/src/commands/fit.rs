use std::path::Path;

use serde::Serialize;
use truncfit_core::density::{kl_divergence, tv_distance};
use truncfit_core::mle::{population_mle_1d_detailed, psgd_fit};
use truncfit_core::sampler::sample_target;
use truncfit_core::{FitConfig, FitReport, Point, PolyCoeffs, SurvivalSet, TruncatedDensity, SCHEMA_VERSION};

use crate::artifacts::{coordinate_names, plot_kind, write_curve, write_json, Clock, Plot, PlotManifest, Series};
use crate::config::{ExperimentSpec, Mode};
use crate::error::{CliError, CliResult};

#[derive(Serialize)]
struct PopulationSummary {
    coeffs: PolyCoeffs,
    iterations: usize,
    gradient_norm: f64,
    objective_trace: Vec<f64>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum Solver {
    Psgd(Box<FitReport>),
    Population(PopulationSummary),
}

#[derive(Serialize)]
struct FitArtifact<'a> {
    schema_version: &'static str,
    mode: Mode,
    target: &'a str,
    set: &'a str,
    config: &'a FitConfig,
    /// Where the data came from in psgd mode: a file name or `sampled`.
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<String>,
    result: Solver,
}

#[derive(Serialize)]
pub struct Metrics {
    pub schema_version: &'static str,
    pub mode: Mode,
    pub degree: u32,
    /// `KL(P(f,S) ‖ P(fit,S))`.
    pub kl_on_s: f64,
    /// `TV(P(f,S), P(fit,S))`.
    pub tv_on_s: f64,
    /// `TV(P(f,K), P(fit,K))` on the whole cube.
    pub tv_on_k: f64,
}

pub fn run(spec: &ExperimentSpec) -> CliResult<()> {
    let clock = Clock::start();
    let f = spec.target.log_density()?;
    let quad = spec.fit.quadrature;
    let d = spec.set.dim();

    let (coeffs, result, data_source) = match spec.mode {
        Mode::Population => {
            let fit = population_mle_1d_detailed(&f, &spec.set, spec.fit.degree, &quad, spec.opt_tol)?;
            let coeffs = fit.coeffs.clone();
            let summary = PopulationSummary {
                coeffs: fit.coeffs,
                iterations: fit.iterations,
                gradient_norm: fit.gradient_norm,
                objective_trace: fit.objective_trace,
            };
            (coeffs, Solver::Population(summary), None)
        }
        Mode::Psgd => {
            let (data, source) = match &spec.data {
                Some(path) => (read_points(path, d)?, path.display().to_string()),
                None => (
                    sample_target(&f, &spec.set, spec.n_samples, spec.fit.seed)?.0,
                    "sampled".to_string(),
                ),
            };
            let report = psgd_fit(&data, &spec.set, &spec.fit, Some(&f))?;
            (report.coeffs.clone(), Solver::Psgd(Box::new(report)), Some(source))
        }
    };

    let cube = SurvivalSet::cube(d)?;
    let truth_k = TruncatedDensity::new(f.clone(), cube.clone(), quad)?;
    let truth_s = TruncatedDensity::new(f, spec.set.clone(), quad)?;
    let fit_k = TruncatedDensity::new(coeffs.clone(), cube, quad)?;
    let fit_s = TruncatedDensity::new(coeffs, spec.set.clone(), quad)?;
    let metrics = Metrics {
        schema_version: SCHEMA_VERSION,
        mode: spec.mode,
        degree: spec.fit.degree,
        kl_on_s: kl_divergence(&truth_s, &fit_s, &quad)?,
        tv_on_s: tv_distance(&truth_s, &fit_s, &quad)?,
        tv_on_k: tv_distance(&truth_k, &fit_k, &quad)?,
    };

    let out = &spec.out;
    write_json(
        &out.join("fit_report.json"),
        &FitArtifact {
            schema_version: SCHEMA_VERSION,
            mode: spec.mode,
            target: &spec.target_text,
            set: &spec.set_text,
            config: &spec.fit,
            data: data_source,
            result,
        },
    )?;
    write_curve(
        &out.join("density_truth.csv"),
        &truth_k,
        &truth_s,
        spec.curve_resolution,
    )?;
    write_curve(&out.join("density_fit.csv"), &fit_k, &fit_s, spec.curve_resolution)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    write_json(&out.join("plot_manifest.json"), &manifest(d, spec.fit.degree))?;
    write_json(&out.join("run_info.json"), &clock.finish())?;
    println!(
        "degree {}  kl_on_S {:.6e}  tv_on_S {:.6e}  tv_on_K {:.6e}",
        metrics.degree, metrics.kl_on_s, metrics.tv_on_s, metrics.tv_on_k
    );
    Ok(())
}

fn manifest(d: usize, degree: u32) -> PlotManifest {
    let plot = |id: &str, title: &str, column: &str| Plot {
        id: id.into(),
        title: title.into(),
        kind: plot_kind(d),
        x_columns: coordinate_names(d),
        y_label: "density".into(),
        series: vec![
            Series {
                file: "density_truth.csv".into(),
                column: column.into(),
                label: "target".into(),
            },
            Series {
                file: "density_fit.csv".into(),
                column: column.into(),
                label: format!("fit, degree {degree}"),
            },
        ],
    };
    PlotManifest::new(vec![
        plot("on_set", "Normalized on the survival set", "pdf_on_s"),
        plot("on_cube", "Normalized on the unit cube", "pdf"),
    ])
}

/// Reads a CSV of points with a header row and `d` numeric columns.
pub fn read_points(path: &Path, d: usize) -> CliResult<Vec<Point>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != d {
            return Err(CliError::config(format!(
                "{} row {}: expected {d} columns, found {}",
                path.display(),
                i + 1,
                rec.len()
            )));
        }
        let p = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Point, _>>()
            .map_err(|e| CliError::config(format!("{} row {}: {e}", path.display(), i + 1)))?;
        out.push(p);
    }
    Ok(out)
}

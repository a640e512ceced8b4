//! Experiment configuration: a TOML file merged with command-line flags.
//!
//! Keys (all optional in the file; a flag of the same name wins):
//!
//! ```toml
//! target = "sin10"              # see `targets` for the grammar
//! set = "interval:0,0.5"
//! mode = "population"           # or "psgd"
//! out = "runs/sin10"            # relative to the config file
//! curve_resolution = 16385      # grid points per axis, at least 64 (default 16385 / 257 / 65 for d = 1 / 2 / 3)
//! data = "samples.csv"          # psgd only; sampled from the target when absent
//! n_samples = 10000             # psgd only; defaults to `steps`
//! opt_tol = 1e-9                # population only
//!
//! degree = 10
//! bound_C = 3.0                 # defaults to 3·sup|f| (1 for the uniform target)
//! steps = 10000
//! step_size = 0.01              # defaults to R/(ρ√T)
//! seed = 0
//! averaging = "uniform_average" # or "final"
//!
//! [quadrature]
//! mode = "gauss_legendre_1d"    # or "tensor_grid", "monte_carlo"
//! resolution = 2048
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use truncfit_core::{Averaging, FitConfig, QuadMode, QuadratureSpec, SurvivalSet};

use crate::error::{CliError, CliResult};
use crate::targets::{parse_set, Target};

pub const MIN_CURVE_RESOLUTION: usize = 64;
/// Default grid points per axis in 1D, fine enough for Simpson's rule on
/// the written curve to integrate sharply peaked extrapolations to 1 within 1e-6.
pub const DEFAULT_CURVE_RESOLUTION: usize = 16_385;

pub fn default_curve_resolution(d: usize) -> usize {
    match d {
        1 => DEFAULT_CURVE_RESOLUTION,
        2 => 257,
        _ => MIN_CURVE_RESOLUTION + 1,
    }
}

pub const DEFAULT_STEPS: usize = 10_000;
pub const DEFAULT_OPT_TOL: f64 = 1e-9;
/// Curves are written on a full grid, which limits them to low dimension.
pub const MAX_CURVE_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Psgd,
    Population,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadratureFile {
    mode: Option<QuadMode>,
    resolution: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    target: Option<String>,
    set: Option<String>,
    mode: Option<Mode>,
    out: Option<PathBuf>,
    curve_resolution: Option<usize>,
    data: Option<PathBuf>,
    n_samples: Option<usize>,
    opt_tol: Option<f64>,
    degree: Option<u32>,
    #[serde(rename = "bound_C")]
    bound_c: Option<f64>,
    steps: Option<usize>,
    step_size: Option<f64>,
    seed: Option<u64>,
    averaging: Option<Averaging>,
    quadrature: Option<QuadratureFile>,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Flags of `truncfit fit`.
#[derive(Debug, Default, Args)]
pub struct FitArgs {
    /// TOML experiment file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Existing directory that receives the artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub curve_resolution: Option<usize>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub opt_tol: Option<f64>,
    #[arg(long)]
    pub degree: Option<u32>,
    #[arg(long = "bound-c", alias = "bound_C")]
    pub bound_c: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_enum::<Averaging>)]
    pub averaging: Option<Averaging>,
    #[arg(long, value_parser = parse_enum::<QuadMode>)]
    pub quadrature_mode: Option<QuadMode>,
    #[arg(long)]
    pub quadrature_resolution: Option<usize>,
    #[arg(long)]
    pub quadrature_seed: Option<u64>,
}

/// A fully resolved `fit` run.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub target_text: String,
    pub target: Target,
    pub set_text: String,
    pub set: SurvivalSet,
    pub mode: Mode,
    pub fit: FitConfig,
    pub out: PathBuf,
    pub curve_resolution: usize,
    pub data: Option<PathBuf>,
    pub n_samples: usize,
    pub opt_tol: f64,
}

fn relative_to(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

fn required<T>(v: Option<T>, key: &str) -> CliResult<T> {
    v.ok_or_else(|| {
        CliError::config(format!(
            "`{key}` is required (config key or --{})",
            key.replace('_', "-")
        ))
    })
}

impl ExperimentSpec {
    pub fn resolve(args: &FitArgs) -> CliResult<Self> {
        let (file, base) = match &args.config {
            Some(path) => {
                let body = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
                let file: ConfigFile =
                    toml::from_str(&body).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                (file, path.parent().map(Path::to_path_buf))
            }
            None => (ConfigFile::default(), None),
        };
        let base = base.as_deref();
        let quad_file = file.quadrature.unwrap_or_default();

        let set_text = required(args.set.clone().or(file.set), "set")?;
        let set = parse_set(&set_text)?;
        let d = set.dim();
        let target_text = required(args.target.clone().or(file.target), "target")?;
        let target = Target::parse(&target_text, d)?;
        let mode = args.mode.or(file.mode).unwrap_or(Mode::Population);
        let degree = required(args.degree.or(file.degree), "degree")?;
        if degree == 0 {
            return Err(CliError::config("degree must be at least 1"));
        }

        let out = match (&args.out, file.out) {
            (Some(p), _) => p.clone(),
            (None, Some(p)) => relative_to(base, p),
            (None, None) => PathBuf::from("."),
        };
        if !out.is_dir() {
            return Err(CliError::config(format!(
                "output directory {} does not exist",
                out.display()
            )));
        }
        let curve_resolution = args
            .curve_resolution
            .or(file.curve_resolution)
            .unwrap_or_else(|| default_curve_resolution(d));
        if curve_resolution < MIN_CURVE_RESOLUTION {
            return Err(CliError::config(format!(
                "curve_resolution must be at least {MIN_CURVE_RESOLUTION}"
            )));
        }
        if d > MAX_CURVE_DIM {
            return Err(CliError::config(format!(
                "density curves support d <= {MAX_CURVE_DIM}, the set has d = {d}"
            )));
        }

        let bound_c = match args.bound_c.or(file.bound_c) {
            Some(c) => c,
            None => {
                let b = target.log_density()?.bound();
                if b > 0.0 {
                    3.0 * b
                } else {
                    1.0
                }
            }
        };
        let steps = args.steps.or(file.steps).unwrap_or(DEFAULT_STEPS);
        let default_quad = QuadratureSpec::for_degree(d, degree);
        let quadrature = QuadratureSpec {
            mode: args.quadrature_mode.or(quad_file.mode).unwrap_or(default_quad.mode),
            resolution: args
                .quadrature_resolution
                .or(quad_file.resolution)
                .unwrap_or(default_quad.resolution),
            seed: args.quadrature_seed.or(quad_file.seed).unwrap_or(default_quad.seed),
        };
        quadrature.validate(d)?;
        let fit = FitConfig {
            degree,
            bound_c,
            steps,
            step_size: args.step_size.or(file.step_size),
            seed: args.seed.or(file.seed).unwrap_or(0),
            averaging: args.averaging.or(file.averaging).unwrap_or_default(),
            quadrature,
        };
        fit.validate()?;

        let data = match (&args.data, file.data) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(p)) => Some(relative_to(base, p)),
            (None, None) => None,
        };
        if data.is_some() && mode == Mode::Population {
            return Err(CliError::config("`data` only applies to mode = \"psgd\""));
        }
        let opt_tol = args.opt_tol.or(file.opt_tol).unwrap_or(DEFAULT_OPT_TOL);
        if opt_tol.is_nan() || opt_tol <= 0.0 {
            return Err(CliError::config("opt_tol must be positive"));
        }
        Ok(ExperimentSpec {
            target_text,
            target,
            set_text,
            set,
            mode,
            n_samples: args.n_samples.or(file.n_samples).unwrap_or(fit.steps),
            fit,
            out,
            curve_resolution,
            data,
            opt_tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let p = dir.join("exp.toml");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn file_values_and_flag_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            r#"
target = "sin10"
set = "interval:0,0.5"
degree = 6
bound_C = 4.5
seed = 7
averaging = "final"
out = "."

[quadrature]
mode = "gauss_legendre_1d"
resolution = 512
"#,
        );
        let mut args = FitArgs {
            config: Some(cfg),
            ..FitArgs::default()
        };
        let spec = ExperimentSpec::resolve(&args).unwrap();
        assert_eq!(spec.fit.degree, 6);
        assert_eq!(spec.fit.bound_c, 4.5);
        assert_eq!(spec.fit.seed, 7);
        assert_eq!(spec.fit.averaging, Averaging::Final);
        assert_eq!(spec.fit.quadrature.resolution, 512);
        assert_eq!(spec.out, dir.path().join("."));
        assert_eq!(spec.mode, Mode::Population);

        args.degree = Some(8);
        args.seed = Some(1);
        args.quadrature_resolution = Some(1024);
        let spec = ExperimentSpec::resolve(&args).unwrap();
        assert_eq!(
            (spec.fit.degree, spec.fit.seed, spec.fit.quadrature.resolution),
            (8, 1, 1024)
        );
    }

    #[test]
    fn defaults_follow_the_target() {
        let dir = tempfile::tempdir().unwrap();
        let args = FitArgs {
            target: Some("sin10".into()),
            set: Some("interval:0,0.5".into()),
            degree: Some(4),
            out: Some(dir.path().to_path_buf()),
            ..FitArgs::default()
        };
        let spec = ExperimentSpec::resolve(&args).unwrap();
        assert_eq!(spec.fit.bound_c, 3.0);
        assert_eq!(spec.fit.quadrature, QuadratureSpec::for_degree(1, 4));
        assert_eq!(spec.curve_resolution, DEFAULT_CURVE_RESOLUTION);
        assert_eq!(spec.n_samples, DEFAULT_STEPS);
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let base = || FitArgs {
            target: Some("sin10".into()),
            set: Some("interval:0,0.5".into()),
            degree: Some(4),
            out: Some(dir.path().to_path_buf()),
            ..FitArgs::default()
        };
        let err = |a: FitArgs| matches!(ExperimentSpec::resolve(&a), Err(CliError::Config(_)));
        assert!(err(FitArgs {
            out: Some(dir.path().join("missing")),
            ..base()
        }));
        assert!(err(FitArgs {
            curve_resolution: Some(10),
            ..base()
        }));
        assert!(err(FitArgs { degree: None, ..base() }));
        assert!(err(FitArgs {
            bound_c: Some(-1.0),
            ..base()
        }));
        assert!(err(FitArgs {
            quadrature_mode: Some(QuadMode::TensorGrid),
            set: Some("cube:4".into()),
            target: Some("uniform".into()),
            ..base()
        }));
        let cfg = write_config(dir.path(), "degre = 3\n");
        assert!(err(FitArgs {
            config: Some(cfg),
            ..base()
        }));
    }
}

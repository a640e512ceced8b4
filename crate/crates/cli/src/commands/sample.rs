use std::path::Path;

use serde::Serialize;
use truncfit_core::sampler::{sample_target, sample_uniform_set};
use truncfit_core::{Point, SamplerStats, SCHEMA_VERSION};

use crate::artifacts::{coordinate_names, fmt_num, write_json, Clock};
use crate::error::{CliError, CliResult};
use crate::targets::{parse_set, Target};

#[derive(Serialize)]
struct SampleInfo<'a> {
    schema_version: &'static str,
    target: &'a str,
    set: &'a str,
    n: usize,
    seed: u64,
    stats: SamplerStats,
}

/// Draws `n` points from the target restricted to the set and writes them as CSV.
/// Sampler statistics go to `<out>.stats.json`, wall-clock data to `<out>.run_info.json`.
pub fn run(target_text: &str, set_text: &str, n: usize, seed: u64, out: &Path) -> CliResult<()> {
    let clock = Clock::start();
    match out.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            return Err(CliError::config(format!(
                "output directory {} does not exist",
                dir.display()
            )))
        }
        _ => {}
    }
    let set = parse_set(set_text)?;
    let target = Target::parse(target_text, set.dim())?;
    let (points, stats) = if n == 0 {
        (Vec::new(), SamplerStats::default())
    } else if target.is_uniform() {
        sample_uniform_set(&set, n, seed)?
    } else {
        sample_target(&target.log_density()?, &set, n, seed)?
    };
    write_points(out, set.dim(), &points)?;
    let sidecar = |suffix: &str| {
        let mut name = out.as_os_str().to_owned();
        name.push(suffix);
        std::path::PathBuf::from(name)
    };
    write_json(
        &sidecar(".stats.json"),
        &SampleInfo {
            schema_version: SCHEMA_VERSION,
            target: target_text,
            set: set_text,
            n,
            seed,
            stats,
        },
    )?;
    write_json(&sidecar(".run_info.json"), &clock.finish())?;
    eprintln!(
        "{n} points, {} proposals, acceptance {:.4}",
        stats.proposals, stats.acceptance_rate
    );
    Ok(())
}

fn write_points(path: &Path, d: usize, points: &[Point]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(coordinate_names(d))?;
    for p in points {
        w.write_record(p.iter().map(|&v| fmt_num(v)))?;
    }
    w.flush()?;
    Ok(())
}

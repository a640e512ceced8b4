use serde::Serialize;
use truncfit_core::verify::{run_suite, Direction, SUITES};
use truncfit_core::{CheckReport, SCHEMA_VERSION};

use crate::error::{CliError, CliResult};

#[derive(Serialize)]
struct VerifyOutput<'a> {
    schema_version: &'static str,
    filter: Option<&'a str>,
    passed: bool,
    reports: &'a [CheckReport],
}

fn status(r: &CheckReport) -> &'static str {
    match (r.asserted, r.passed) {
        (false, _) => "INFO",
        (true, true) => "PASS",
        (true, false) => "FAIL",
    }
}

fn table(reports: &[CheckReport]) -> String {
    let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(4).max(5);
    let mut s = format!(
        "{:<width$}  {:<6}  {:>13}  {:>2}  {:>13}  {:>13}\n",
        "check", "status", "observed", "", "bound", "margin"
    );
    for r in reports {
        let rel = match r.direction {
            Direction::AtMost => "<=",
            Direction::AtLeast => ">=",
        };
        s += &format!(
            "{:<width$}  {:<6}  {:>13.6e}  {:>2}  {:>13.6e}  {:>13.6e}\n",
            r.name,
            status(r),
            r.observed,
            rel,
            r.bound,
            r.margin
        );
    }
    s
}

/// Runs the suites matching `filter`; with `json` the JSON document goes to
/// stdout and the table to stderr.
pub fn run(filter: Option<&str>, json: bool) -> CliResult<()> {
    if let Some(f) = filter {
        if !SUITES.iter().any(|s| s.contains(f)) {
            return Err(CliError::config(format!(
                "unknown suite {f:?}; available suites: {}",
                SUITES.join(", ")
            )));
        }
    }
    let reports = run_suite(filter)?;
    let failed = reports.iter().filter(|r| !r.ok()).count();
    if json {
        let doc = VerifyOutput {
            schema_version: SCHEMA_VERSION,
            filter,
            passed: failed == 0,
            reports: &reports,
        };
        println!("{}", serde_json::to_string_pretty(&doc).expect("reports serialize"));
        eprint!("{}", table(&reports));
    } else {
        print!("{}", table(&reports));
    }
    if failed > 0 {
        Err(CliError::ChecksFailed(failed))
    } else {
        Ok(())
    }
}

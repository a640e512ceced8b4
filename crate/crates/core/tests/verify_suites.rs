use truncfit_core::verify::{run_suite, SUITES};

#[test]
fn every_suite_passes() {
    let reports = run_suite(None).unwrap();
    for r in &reports {
        println!("{:<40} {:>12.4e} {:>12.4e} {}", r.name, r.observed, r.bound, r.ok());
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.ok()).map(|r| r.name.as_str()).collect();
    assert!(failed.is_empty(), "failed checks: {failed:?}");
    for suite in SUITES {
        let prefix = suite
            .replace("multiindex", "multiindex_sum")
            .replace("taylor", "taylor_remainder");
        assert!(
            reports.iter().any(|r| r.name.starts_with(&prefix)),
            "{suite} produced no report"
        );
    }
}

#[test]
fn suites_are_bit_identical_across_runs() {
    let a = run_suite(Some("carbery")).unwrap();
    let b = run_suite(Some("carbery")).unwrap();
    assert_eq!(a, b);
}

//! Full acceptance battery at scale 1. Tolerances are the constants in
//! `jot_core::acceptance`; each criterion prints one PASS/FAIL line.

use std::io::Write;

use jot_core::acceptance::{run_suite, AcceptOptions, TITLES};

#[test]
fn acceptance_criteria_1_to_11() {
    let opts = AcceptOptions::default();
    assert_eq!(opts.scale, 1.0);
    let report = run_suite(&opts).expect("acceptance suite ran");
    assert_eq!(report.criteria.len(), TITLES.len());
    // written past the test harness capture so the lines show on success
    let mut err = std::io::stderr().lock();
    writeln!(err).unwrap();
    for line in report.lines() {
        writeln!(err, "{line}").unwrap();
    }
    drop(err);
    let failed: Vec<String> = report
        .criteria
        .iter()
        .filter(|c| !c.pass)
        .flat_map(|c| {
            c.checks
                .iter()
                .filter(|k| !k.pass)
                .map(move |k| format!("criterion {}: {} (statistic {}, p {:?})", c.id, k.name, k.statistic, k.p_value))
        })
        .collect();
    assert!(failed.is_empty(), "failed checks:\n{}", failed.join("\n"));
    assert!(report.pass);
}

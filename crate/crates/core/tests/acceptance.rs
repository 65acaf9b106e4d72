//! Runs every acceptance criterion at its pinned tolerance and prints one
//! PASS/FAIL line per criterion. Takes tens of minutes on one core.

use vsbbm_core::acceptance::run_suite;

#[test]
fn acceptance_suite() {
    let report = run_suite("all", 1, None).expect("acceptance suite runs");
    println!("{report}");
    let failures: Vec<String> = report.failures().map(|r| r.to_string()).collect();
    assert!(failures.is_empty(), "failed criteria:\n{}", failures.join("\n"));
}

//! Runs every acceptance criterion and prints one PASS or FAIL line per criterion.
//!
//! A criterion listed in `KNOWN_FAILURES` is expected to fail on exactly the named checks
//! and to pass all of its other checks; any other failure makes this target fail.

use std::process::ExitCode;

use magspec::verify::{self, CriterionReport, ALL, DEFAULT_SEEDS};

/// Expected wall-clock budget in seconds per criterion.
const BUDGET: [f64; 11] = [30.0, 1.0, 60.0, 180.0, 5.0, 120.0, 30.0, 30.0, 120.0, 60.0, 180.0];

/// The sampled sphere bundle curve has a local maximum at B = 7/8 (the rising branch
/// ½(B² + ¼) meets the falling branch ½(1 + (1 − B)²) there), so no local minimum is found
/// near 7/8. The value 65/128 is attained at that point.
const KNOWN_FAILURES: [(u32, &[&str]); 1] = [(4, &["local_minimum_location", "local_minimum_value"])];

fn failing(report: &CriterionReport) -> Vec<&str> {
    report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
}

fn main() -> ExitCode {
    let mut unexpected = 0;
    for id in ALL {
        let report = verify::run(id, &DEFAULT_SEEDS);
        let budget = BUDGET[id as usize - 1];
        let in_time = report.seconds <= budget;
        let verdict = if report.pass && in_time { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {id:>2}: {} ({:.1} s of {budget} s)", report.title, report.seconds);
        for c in report.checks.iter().filter(|c| !c.pass) {
            match &c.error {
                Some(e) => println!("     {}: error {e}", c.name),
                None => println!("     {}: measured {} target {} tolerance {}", c.name, c.measured, c.target, c.tolerance),
            }
        }
        let expected: &[&str] = KNOWN_FAILURES.iter().find(|(k, _)| *k == id).map_or(&[], |(_, names)| names);
        if !in_time || failing(&report) != expected {
            unexpected += 1;
        } else if !expected.is_empty() {
            println!("     known failure: the curve has a local maximum at 7/8, not a minimum");
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria did not match their expected outcome");
        ExitCode::FAILURE
    }
}

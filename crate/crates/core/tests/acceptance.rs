//! One line per acceptance criterion, every check at its stated tolerance.
//!
//! Run with `cargo test -p stackcomm --release --test acceptance -- --nocapture`
//! to see the report.

use std::collections::BTreeMap;

use stackcomm::verify::{run, Bound, Check, Suite};

use stackcomm::verify::DEFAULT_SEED as SEED;

fn describe(c: &Check) -> String {
    let op = match c.bound {
        Bound::AtMost => "<=",
        Bound::Above => ">",
    };
    format!("{}={:.3e} (need {} {:.1e})", c.name, c.measured, op, c.tolerance)
}

#[test]
fn acceptance_report() {
    let summary = run(Suite::Full, SEED);
    let mut by_criterion: BTreeMap<u8, Vec<&Check>> = BTreeMap::new();
    for c in &summary.checks {
        by_criterion.entry(c.criterion).or_default().push(c);
    }
    assert_eq!(by_criterion.keys().copied().collect::<Vec<_>>(), (1..=11).collect::<Vec<u8>>());

    let mut unexpected = Vec::new();
    for (k, checks) in &by_criterion {
        let failed: Vec<&&Check> = checks.iter().filter(|c| !c.passed).collect();
        if failed.is_empty() {
            println!("criterion {k:>2}: PASS ({} checks)", checks.len());
        } else {
            let detail: Vec<String> = failed.iter().map(|c| describe(c)).collect();
            println!("criterion {k:>2}: FAIL {}", detail.join("; "));
        }
        unexpected.extend(failed.iter().filter(|c| !c.known_unattainable).map(|c| describe(c)));
    }
    assert!(unexpected.is_empty(), "failing checks: {unexpected:?}");
}

/// β(R) does not move with the rate for a correlated side-information model,
/// so the rate-dependence requirement cannot be met. Kept as a live check: if
/// this ever starts passing the flag in the battery must be removed.
#[test]
fn si_rate_dependence_still_fails() {
    let s = stackcomm::verify::summarize(Suite::Quick, SEED, run(Suite::Quick, SEED).checks);
    let c = s.checks.iter().find(|c| c.name == "si.beta_rate_dependence").unwrap();
    assert!(c.known_unattainable);
    assert!(!c.passed, "{}", describe(c));
    assert!(c.measured < 1e-8, "{}", describe(c));
}

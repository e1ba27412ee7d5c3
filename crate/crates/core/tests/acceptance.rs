//! One PASS/FAIL line per acceptance criterion.

use std::io::Write;

use padiclab::suite::{run_criteria, SuiteConfig, CRITERIA};

// Straight to the stderr handle: the harness captures println!, and these
// lines belong in the log whether or not the run passes.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stderr(), $($t)*);
    }};
}

#[test]
fn acceptance() {
    let ids: Vec<u8> = CRITERIA.iter().map(|c| c.0).collect();
    let outcomes = run_criteria(&ids, &SuiteConfig::default());
    let mut failed = Vec::new();
    for o in &outcomes {
        say!("{}", o.summary_line());
        if !o.passed() {
            for c in o.checks.iter().filter(|c| !c.passed()) {
                say!("    {}: {}", c.name, c.detail);
            }
            failed.push(o.id);
        }
    }
    let mut signs = padiclab::report::SignLedger::default();
    for o in &outcomes {
        signs.merge(&o.signs);
    }
    for e in &signs.entries {
        say!(
            "sign {} = {:+} ({} observations)",
            e.name,
            e.value,
            e.evidence.len()
        );
    }
    assert!(
        signs.is_consistent(),
        "sign conflicts: {:?}",
        signs.conflicts
    );
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}

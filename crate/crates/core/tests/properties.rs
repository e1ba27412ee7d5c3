//! The property suites on their own, over several seeds.

use padiclab::suite::{run_criterion, SuiteConfig};

#[test]
fn property_suites_across_seeds() {
    for seed in [1u64, 7, 20240601] {
        let o = run_criterion(10, &SuiteConfig { seed, jobs: 1 });
        for c in &o.checks {
            assert!(c.passed(), "seed {seed}: {} — {}", c.name, c.detail);
        }
        assert!(o.passed());
    }
}

#[test]
fn gamma_p_suite_across_seeds() {
    for seed in [3u64, 99] {
        let o = run_criterion(8, &SuiteConfig { seed, jobs: 1 });
        assert!(o.passed(), "{}", o.summary_line());
    }
}

#[test]
fn parallel_run_matches_serial() {
    let ids = [8u8, 9, 10];
    let a = padiclab::suite::run_criteria(&ids, &SuiteConfig { seed: 5, jobs: 1 });
    let b = padiclab::suite::run_criteria(&ids, &SuiteConfig { seed: 5, jobs: 3 });
    let strip = |v: &[padiclab::suite::CriterionOutcome]| {
        v.iter()
            .map(|o| (o.id, o.checks.clone(), o.signs.clone()))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
}

use qnets::suite::{run_criterion, run_suite, Suite, SuiteConfig};

fn small(seed: u64) -> SuiteConfig {
    SuiteConfig { seed, trials: Some(3) }
}

#[test]
fn suite_names_map_to_criteria() {
    assert_eq!(Suite::parse("thm11").unwrap().criteria(), vec![1]);
    assert_eq!(Suite::parse("extend").unwrap().criteria(), vec![3, 4]);
    assert_eq!(Suite::parse("envelope").unwrap().criteria(), vec![5, 6]);
    assert_eq!(Suite::parse("all").unwrap().criteria(), (1..=8).collect::<Vec<_>>());
    assert!(Suite::parse("thm").is_none());
}

#[test]
fn reports_are_reproducible() {
    for id in [2, 7, 8] {
        assert_eq!(run_criterion(id, &small(9)), run_criterion(id, &small(9)));
    }
    assert_ne!(run_criterion(8, &small(9)), run_criterion(8, &small(10)));
}

#[test]
fn trial_override_sets_sample_counts() {
    let r = run_criterion(2, &small(1));
    assert!(r.checks.iter().all(|c| c.samples <= 3 * 8), "{r:?}");
    assert!(r.checks.iter().all(|c| c.samples > 0));
}

#[test]
fn unknown_criterion_fails() {
    let r = run_criterion(12, &SuiteConfig::new(0));
    assert!(!r.pass);
    assert_eq!(r.errors, 1);
}

#[test]
fn suite_passes_only_if_every_criterion_passes() {
    let s = run_suite(Suite::Cyclide, &small(4));
    assert_eq!(s.criteria.len(), 1);
    assert_eq!(s.pass, s.criteria[0].pass);
    assert!(s.criteria[0].checks.iter().all(|c| c.pass == c.worst.is_some_and(|w| match c.bound {
        "below" => w < c.threshold,
        _ => w > c.threshold,
    })));
}

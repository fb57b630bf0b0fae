use super::*;
use crate::minilang::parse_program;

const MATH94: &str = include_str!("../../../../corpus/programs/math94.mini");

const TOY: &str = "class T { fn f(x: int) -> int { if (x == 4711) { return 1; } return 0; } }";

const NESTED: &str = "class N {
    fn deep(a: int, b: int) {
        if (a > 100) {
            if (b < -50) {
                if (a - b == 400) { trap \"nested-hit\"; }
            }
        }
    }
    fn side(c: int) -> int { if (c % 7 == 3) { return 1; } return 0; }
}";

fn config(seed: u64, evals: u64) -> SearchConfig {
    SearchConfig {
        seed,
        budget: Budget::evaluations(evals),
        ..SearchConfig::default()
    }
}

#[test]
fn active_targets_follow_dependencies() {
    let p = parse_program(NESTED).unwrap();
    let (ids, cdg) = class_targets(&p, 0);
    assert_eq!(ids.len(), 8);
    let roots = update_active_targets(&BTreeSet::new(), &cdg);
    assert_eq!(roots, vec![0, 1, 6, 7]);
    let after = update_active_targets(&BTreeSet::from([0]), &cdg);
    assert_eq!(after, vec![1, 2, 3, 6, 7]);
    let all: BTreeSet<TargetId> = ids.iter().copied().collect();
    assert!(update_active_targets(&all, &cdg).is_empty());
}

#[test]
fn toy_branch_is_covered_reliably() {
    let p = parse_program(TOY).unwrap();
    let full = (0..20)
        .filter(|&s| generate_tests(&p, 0, &config(s, 2000), None).unwrap().1.coverage() == 1.0)
        .count();
    assert!(full >= 19, "full coverage in {full}/20 runs");
}

#[test]
fn archive_entries_cover_their_targets() {
    let p = parse_program(NESTED).unwrap();
    let (suite, stats) = generate_tests(&p, 0, &config(3, 3000), None).unwrap();
    let labels: BTreeMap<String, TargetId> = enumerate_targets(&p).into_iter().map(|t| (t.label, t.id)).collect();
    let mut covered = 0;
    for e in &suite.entries {
        let trace = execute(&p, &e.test, &Limits::default()).unwrap();
        for l in &e.covered {
            assert!(trace.covered.contains(&labels[l]), "{l}");
            covered += 1;
        }
        for t in &e.traps {
            assert!(trace.traps_hit.contains(t));
        }
    }
    assert_eq!(covered, stats.covered);
    assert!(stats.coverage_history.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn fixed_seed_is_bit_identical() {
    let p = parse_program(NESTED).unwrap();
    let a = generate_tests(&p, 0, &config(17, 1500), None).unwrap();
    let b = generate_tests(&p, 0, &config(17, 1500), None).unwrap();
    assert_eq!(a, b);
    let mut da = config(17, 1500);
    da.guidance = Guidance::DefectAware;
    let scores = BTreeMap::from([("deep".to_string(), 0.9), ("side".to_string(), 0.1)]);
    assert_eq!(
        generate_tests(&p, 0, &da, Some(&scores)).unwrap(),
        generate_tests(&p, 0, &da, Some(&scores)).unwrap()
    );
}

#[test]
fn larger_budget_extends_smaller_run() {
    let p = parse_program(NESTED).unwrap();
    let (_, small) = generate_tests(&p, 0, &config(5, 400), None).unwrap();
    let (_, large) = generate_tests(&p, 0, &config(5, 1200), None).unwrap();
    assert_eq!(small.evaluations, 400);
    let early: BTreeMap<String, u64> = large.traps_hit.into_iter().filter(|(_, e)| *e <= 400).collect();
    assert_eq!(early, small.traps_hit);
}

#[test]
fn budget_below_population_size() {
    let p = parse_program(TOY).unwrap();
    let (_, stats) = generate_tests(&p, 0, &config(1, 7), None).unwrap();
    assert_eq!((stats.evaluations, stats.generations), (7, 0));
}

#[test]
fn configuration_errors() {
    let p = parse_program(TOY).unwrap();
    let mut c = config(0, 100);
    c.population_size = 5;
    assert!(matches!(generate_tests(&p, 0, &c, None), Err(SearchError::Config(_))));
    let mut c = config(0, 100);
    c.guidance = Guidance::DefectAware;
    assert_eq!(generate_tests(&p, 0, &c, None), Err(SearchError::MissingScores));
    assert_eq!(generate_tests(&p, 3, &config(0, 100), None), Err(SearchError::UnknownClass(3)));
    let empty = parse_program("class E { }").unwrap();
    assert!(matches!(generate_tests(&empty, 0, &config(0, 100), None), Err(SearchError::NoMethods(_))));
}

#[test]
fn fixed_seed_initial_population() {
    let p = parse_program(NESTED).unwrap();
    let mut r1 = ChaCha8Rng::seed_from_u64(8);
    let mut r2 = ChaCha8Rng::seed_from_u64(8);
    let a: Vec<TestCase> = (0..8).map(|_| random_test(&p, 0, &mut r1)).collect();
    let b: Vec<TestCase> = (0..8).map(|_| random_test(&p, 0, &mut r2)).collect();
    assert_eq!(a, b);
    assert_eq!(a.len(), 8);
}

#[test]
fn math94_guidance_never_hurts() {
    let p = parse_program(MATH94).unwrap();
    let scores = BTreeMap::from([("gcd".to_string(), 1.0)]);
    let (mut plain, mut guided) = (0, 0);
    for seed in 0..20 {
        let c = config(seed, 300);
        plain += generate_tests(&p, 0, &c, None).unwrap().1.traps_hit.len();
        let g = SearchConfig {
            guidance: Guidance::DefectAware,
            ..c
        };
        guided += generate_tests(&p, 0, &g, Some(&scores)).unwrap().1.traps_hit.len();
    }
    assert!(guided >= plain, "guided {guided} vs plain {plain}");
}

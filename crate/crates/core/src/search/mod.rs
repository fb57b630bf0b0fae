//! Many-objective test generation for one class: each branch target is an
//! objective, targets are activated along control dependencies, and the
//! best test per covered target is kept in an archive.

mod sort;
mod variation;

pub use sort::{crowding_distance, defect_aware_preference_sort, dominates, non_dominated_fronts, preference_sort};
pub use variation::{
    apply_delta, crossover, mutate, mutate_value, random_int, random_test, random_value, tournament, vary,
    BOUNDARY_INTS,
};

use crate::allocate::BudgetUnit;
use crate::executor::{execute, fitness_along, ExecutionTrace, Limits, TestCase};
use crate::minilang::{build_cdg, enumerate_targets, ControlDependencyGraph, MethodRef, Program, TargetId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::Instant;
use thiserror::Error;

/// Share of mutated offspring replaced by a fresh random test.
const RESAMPLE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("class index {0} out of range")]
    UnknownClass(usize),
    #[error("class `{0}` has no methods")]
    NoMethods(String),
    #[error("defect-aware guidance requires method scores")]
    MissingScores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Guidance {
    #[default]
    None,
    DefectAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub amount: f64,
    pub unit: BudgetUnit,
}

impl Budget {
    pub fn evaluations(n: u64) -> Budget {
        Budget {
            amount: n as f64,
            unit: BudgetUnit::Evaluations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub population_size: usize,
    pub crossover_rate: f64,
    /// Per-argument mutation probability.
    pub mutation_rate: f64,
    pub budget: Budget,
    pub seed: u64,
    pub guidance: Guidance,
    /// Methods scoring at least this are treated as buggy.
    pub buggy_threshold: f64,
    #[serde(skip)]
    pub limits: Limits,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            population_size: 20,
            crossover_rate: 0.75,
            mutation_rate: 0.5,
            budget: Budget::evaluations(1000),
            seed: 0,
            guidance: Guidance::None,
            buggy_threshold: 0.5,
            limits: Limits::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.to_string()));
        if self.population_size < 4 || !self.population_size.is_multiple_of(2) {
            return bad("population size must be even and at least 4");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("rates must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.buggy_threshold) {
            return bad("buggy threshold must lie in [0, 1]");
        }
        if self.budget.amount.is_nan() || self.budget.amount <= 0.0 || !self.budget.amount.is_finite() {
            return bad("budget must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Individual {
    pub test: TestCase,
    pub trace: ExecutionTrace,
    /// Fitness per active target, in the active-set order of the generation.
    pub fitness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub test: TestCase,
    pub size: u128,
    /// 1-based evaluation at which this test was executed.
    pub evaluation: u64,
}

/// Best test per covered target; replaced only by a strictly smaller test.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub best: BTreeMap<TargetId, ArchiveEntry>,
}

impl Archive {
    pub fn offer(&mut self, target: TargetId, test: &TestCase, evaluation: u64) {
        let size = test.size();
        match self.best.get(&target) {
            Some(e) if e.size <= size => {}
            _ => {
                self.best.insert(
                    target,
                    ArchiveEntry {
                        test: test.clone(),
                        size,
                        evaluation,
                    },
                );
            }
        }
    }

    pub fn covered(&self) -> BTreeSet<TargetId> {
        self.best.keys().copied().collect()
    }
}

/// Uncovered targets whose control-dependency parent is absent or covered.
pub fn update_active_targets(covered: &BTreeSet<TargetId>, cdg: &ControlDependencyGraph) -> Vec<TargetId> {
    let mut active: Vec<TargetId> = cdg
        .nodes
        .iter()
        .copied()
        .filter(|t| !covered.contains(t) && cdg.parent(*t).is_none_or(|p| covered.contains(&p)))
        .collect();
    active.sort_unstable();
    active
}

/// Targets of `class` together with the class-wide control-dependency graph.
pub fn class_targets(program: &Program, class: usize) -> (Vec<TargetId>, ControlDependencyGraph) {
    let graphs: Vec<ControlDependencyGraph> = (0..program.classes[class].methods.len())
        .map(|method| build_cdg(program, MethodRef { class, method }))
        .collect();
    let cdg = ControlDependencyGraph::union(&graphs);
    let mut ids = cdg.nodes.clone();
    ids.sort_unstable();
    (ids, cdg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    /// `Class.method`
    pub method: String,
    pub test: TestCase,
    pub covered: Vec<String>,
    pub traps: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub class: String,
    pub entries: Vec<SuiteEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub class: String,
    pub evaluations: u64,
    pub generations: u64,
    pub targets: usize,
    pub covered: usize,
    /// Traps hit by any evaluated test, with the first evaluation that hit each.
    pub traps_hit: BTreeMap<String, u64>,
    /// Covered-target count after initialization and after each generation.
    pub coverage_history: Vec<usize>,
}

impl SearchStats {
    pub fn coverage(&self) -> f64 {
        if self.targets == 0 {
            1.0
        } else {
            self.covered as f64 / self.targets as f64
        }
    }

    pub const CSV_HEADER: &'static str = "class,evaluations,generations,targets,covered,coverage,traps_hit";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.4},{}",
            self.class,
            self.evaluations,
            self.generations,
            self.targets,
            self.covered,
            self.coverage(),
            self.traps_hit.keys().cloned().collect::<Vec<_>>().join(";")
        )
    }
}

struct Run<'a> {
    program: &'a Program,
    config: &'a SearchConfig,
    chains: BTreeMap<TargetId, Vec<TargetId>>,
    archive: Archive,
    trap_witnesses: BTreeMap<String, (TestCase, u64)>,
    evaluations: u64,
    started: Instant,
}

impl Run<'_> {
    fn budget_left(&self) -> bool {
        match self.config.budget.unit {
            BudgetUnit::Evaluations => (self.evaluations as f64) < self.config.budget.amount,
            BudgetUnit::Seconds => self.started.elapsed().as_secs_f64() < self.config.budget.amount,
        }
    }

    /// Execute tests while budget remains.
    fn evaluate(&mut self, tests: Vec<TestCase>) -> Vec<Individual> {
        let mut out = Vec::with_capacity(tests.len());
        for test in tests {
            if !self.budget_left() {
                break;
            }
            let trace = execute(self.program, &test, &self.config.limits).expect("generated tests are well-typed");
            self.evaluations += 1;
            for t in &trace.covered {
                if self.chains.contains_key(t) {
                    self.archive.offer(*t, &test, self.evaluations);
                }
            }
            for trap in &trace.traps_hit {
                self.trap_witnesses
                    .entry(trap.clone())
                    .or_insert_with(|| (test.clone(), self.evaluations));
            }
            out.push(Individual {
                test,
                trace,
                fitness: Vec::new(),
            });
        }
        out
    }

    fn score(&self, pop: &mut [Individual], active: &[TargetId]) {
        for ind in pop.iter_mut() {
            ind.fitness = active.iter().map(|t| fitness_along(&ind.trace, &self.chains[t])).collect();
        }
    }
}

/// Run the search on one class until the budget is spent.
pub fn generate_tests(
    program: &Program,
    class: usize,
    config: &SearchConfig,
    method_scores: Option<&BTreeMap<String, f64>>,
) -> Result<(TestSuite, SearchStats), SearchError> {
    config.validate()?;
    let cls = program.classes.get(class).ok_or(SearchError::UnknownClass(class))?;
    if cls.methods.is_empty() {
        return Err(SearchError::NoMethods(cls.name.clone()));
    }
    let buggy_methods: BTreeSet<usize> = match (config.guidance, method_scores) {
        (Guidance::None, _) => BTreeSet::new(),
        (Guidance::DefectAware, None) => return Err(SearchError::MissingScores),
        (Guidance::DefectAware, Some(scores)) => cls
            .methods
            .iter()
            .enumerate()
            .filter(|(_, m)| scores.get(&m.name).is_some_and(|s| *s >= config.buggy_threshold))
            .map(|(i, _)| i)
            .collect(),
    };

    let all_targets = enumerate_targets(program);
    let (target_ids, cdg) = class_targets(program, class);
    let chains = target_ids.iter().map(|&t| (t, cdg.chain(t))).collect();
    let mut run = Run {
        program,
        config,
        chains,
        archive: Archive::default(),
        trap_witnesses: BTreeMap::new(),
        evaluations: 0,
        started: Instant::now(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.population_size;

    let initial: Vec<TestCase> = (0..n).map(|_| random_test(program, class, &mut rng)).collect();
    let mut population = run.evaluate(initial);
    let mut coverage_history = vec![run.archive.best.len()];
    let mut generations = 0u64;
    let mut rank = vec![0usize; population.len()];
    let mut crowd = vec![0.0f64; population.len()];

    if population.len() == n {
        let active = update_active_targets(&run.archive.covered(), &cdg);
        run.score(&mut population, &active);
        let (r, c) = rank_population(&population, &active, &all_targets, &buggy_methods, config.guidance);
        rank = r;
        crowd = c;
    }

    while run.budget_left() && population.len() == n {
        let parents: Vec<TestCase> = population.iter().map(|i| i.test.clone()).collect();
        let mut kids = vary(&parents, &rank, &crowd, n, config.crossover_rate, config.mutation_rate, &mut rng);
        // Mutation never changes the called method, so without fresh tests a
        // method can drop out of the population for good.
        for kid in kids.iter_mut() {
            if rng.random_bool(config.mutation_rate * RESAMPLE_FRACTION) {
                *kid = random_test(program, class, &mut rng);
            }
        }
        let offspring = run.evaluate(kids);
        generations += 1;
        coverage_history.push(run.archive.best.len());

        let active = update_active_targets(&run.archive.covered(), &cdg);
        let mut union = population;
        union.extend(offspring);
        if active.is_empty() {
            // Everything is covered: keep exploring from the newest tests.
            let start = union.len().saturating_sub(n);
            union.drain(..start);
            population = union;
            rank = vec![0; population.len()];
            crowd = vec![0.0; population.len()];
            continue;
        }
        run.score(&mut union, &active);
        let objectives: Vec<Vec<f64>> = union.iter().map(|i| i.fitness.clone()).collect();
        let fronts = sort_fronts(&union, &objectives, &active, &all_targets, &buggy_methods, config.guidance);
        let mut chosen: Vec<(usize, usize, f64)> = Vec::with_capacity(n);
        for (r, front) in fronts.iter().enumerate() {
            let dist = crowding_distance(&objectives, front);
            if chosen.len() + front.len() <= n {
                chosen.extend(front.iter().zip(&dist).map(|(&i, &d)| (i, r, d)));
            } else {
                let mut order: Vec<usize> = (0..front.len()).collect();
                order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
                for k in order.into_iter().take(n - chosen.len()) {
                    chosen.push((front[k], r, dist[k]));
                }
            }
            if chosen.len() == n {
                break;
            }
        }
        let mut slots: Vec<Option<Individual>> = union.into_iter().map(Some).collect();
        population = Vec::with_capacity(n);
        rank = Vec::with_capacity(n);
        crowd = Vec::with_capacity(n);
        for (i, r, d) in chosen {
            population.push(slots[i].take().expect("each individual chosen once"));
            rank.push(r);
            crowd.push(d);
        }
    }

    let covered = run.archive.covered();
    let stats = SearchStats {
        class: cls.name.clone(),
        evaluations: run.evaluations,
        generations,
        targets: target_ids.len(),
        covered: covered.len(),
        traps_hit: run.trap_witnesses.iter().map(|(k, (_, e))| (k.clone(), *e)).collect(),
        coverage_history,
    };
    Ok((build_suite(program, class, &run, &all_targets), stats))
}

fn sort_fronts(
    pop: &[Individual],
    objectives: &[Vec<f64>],
    active: &[TargetId],
    all_targets: &[crate::minilang::BranchTarget],
    buggy_methods: &BTreeSet<usize>,
    guidance: Guidance,
) -> Vec<Vec<usize>> {
    let sizes: Vec<u128> = pop.iter().map(|i| i.test.size()).collect();
    match guidance {
        Guidance::None => preference_sort(objectives, &sizes),
        Guidance::DefectAware => {
            let buggy: Vec<bool> = active
                .iter()
                .map(|t| buggy_methods.contains(&all_targets[*t].method.method))
                .collect();
            defect_aware_preference_sort(objectives, &sizes, &buggy)
        }
    }
}

fn rank_population(
    pop: &[Individual],
    active: &[TargetId],
    all_targets: &[crate::minilang::BranchTarget],
    buggy_methods: &BTreeSet<usize>,
    guidance: Guidance,
) -> (Vec<usize>, Vec<f64>) {
    let objectives: Vec<Vec<f64>> = pop.iter().map(|i| i.fitness.clone()).collect();
    let mut rank = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, front) in sort_fronts(pop, &objectives, active, all_targets, buggy_methods, guidance)
        .iter()
        .enumerate()
    {
        for (&i, d) in front.iter().zip(crowding_distance(&objectives, front)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

fn build_suite(program: &Program, class: usize, run: &Run<'_>, all_targets: &[crate::minilang::BranchTarget]) -> TestSuite {
    let mut tests: Vec<(u64, TestCase)> = run
        .archive
        .best
        .values()
        .map(|e| (e.evaluation, e.test.clone()))
        .chain(run.trap_witnesses.values().map(|(t, e)| (*e, t.clone())))
        .collect();
    tests.sort_by_key(|(e, _)| *e);
    let mut seen = HashSet::new();
    tests.retain(|(_, t)| seen.insert(t.clone()));
    let cls = &program.classes[class];
    let entries = tests
        .into_iter()
        .map(|(_, test)| {
            let covered = run
                .archive
                .best
                .iter()
                .filter(|(_, e)| e.test == test)
                .map(|(t, _)| all_targets[*t].label.clone())
                .collect();
            let traps = run
                .trap_witnesses
                .iter()
                .filter(|(_, (t, _))| *t == test)
                .map(|(k, _)| k.clone())
                .collect();
            SuiteEntry {
                method: format!("{}.{}", cls.name, cls.methods[test.method.method].name),
                test,
                covered,
                traps,
            }
        })
        .collect();
    TestSuite {
        class: cls.name.clone(),
        entries,
    }
}

#[cfg(test)]
mod tests;

//! Experiment orchestration: predictors feed the allocator and the search
//! for every (program, approach, run) cell, and detections are collected
//! into per-approach run matrices.

mod config;
mod report;

pub use config::{ApproachConfig, ApproachKind, ExperimentConfig, PredictorSpec};
pub use report::{emit_report, load_result, summary_text, RESULT_FILE};

use crate::allocate::{allocate_budget, uniform_plan, AllocError, BudgetPlan};
use crate::corpus::{load_corpus, validate_corpus, Corpus, CorpusError, SubjectProgram};
use crate::predict::{ideal_predictor, simulate_predictor, twr_scores, Level, PredictError, PredictorOutput};
use crate::search::{generate_tests, Budget, Guidance, SearchConfig, SearchError, SearchStats};
use crate::seed::derive_seed;
use crate::stats::{a12, mann_whitney_u, success_rate, unique_bugs, RunMatrix, StatsError, UniqueBugs};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use thiserror::Error;

/// Environment variable bounding the worker pool.
pub const WORKERS_ENV: &str = "SBST_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible budget for `{program}`: {source}")]
    Infeasible {
        program: String,
        #[source]
        source: AllocError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("corpus validation failed for: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("search failed: {0}")]
    Search(#[from] SearchError),
    #[error("predictor failed: {0}")]
    Predict(#[from] PredictError),
    #[error("statistics failed: {0}")]
    Stats(#[from] StatsError),
    #[error("malformed result file: {0}")]
    Result(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub approach: String,
    pub program: String,
    pub run: usize,
    pub plan: BudgetPlan,
    /// Realized class-level MCC when a class predictor was used.
    pub class_mcc: Option<f64>,
    pub stats: Vec<SearchStats>,
    pub detected: BTreeSet<String>,
}

impl CellResult {
    pub fn consumed(&self) -> u64 {
        self.stats.iter().map(|s| s.evaluations).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SkipEntry {
    pub approach: String,
    pub program: String,
    pub bugs: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugComparison {
    pub bug_id: String,
    pub rate_a: f64,
    pub rate_b: f64,
    pub p: f64,
    pub a12: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairwise {
    pub a: String,
    pub b: String,
    /// Bugs both approaches were run on.
    pub bugs: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub u: f64,
    pub p: f64,
    pub a12: f64,
    pub unique: UniqueBugs,
    pub per_bug: Vec<BugComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Bug id to program name, for every bug in the selected programs.
    pub bug_programs: BTreeMap<String, String>,
    pub matrices: Vec<RunMatrix>,
    pub cells: Vec<CellResult>,
    pub skipped: Vec<SkipEntry>,
    pub pairwise: Vec<Pairwise>,
}

impl ExperimentResult {
    pub fn matrix(&self, approach: &str) -> Option<&RunMatrix> {
        self.matrices.iter().find(|m| m.approach == approach)
    }

    pub fn pair(&self, a: &str, b: &str) -> Option<&Pairwise> {
        self.pairwise.iter().find(|p| p.a == a && p.b == b)
    }
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|n| *n > 0)
}

struct ProgramInfo<'a> {
    subject: &'a SubjectProgram,
    classes: Vec<String>,
    defective_classes: BTreeSet<String>,
    bugs: Vec<String>,
    total: f64,
    lower_bound: f64,
}

enum Outcome {
    Done(Box<CellResult>),
    Skipped(SkipEntry),
}

/// Per-class scores plus the realized MCC.
type ClassScores = (Vec<(String, f64)>, Option<f64>);

fn class_scores(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    info: &ProgramInfo<'_>,
    spec: &PredictorSpec,
    run: usize,
) -> Result<Result<ClassScores, String>, HarnessError> {
    let seed = derive_seed(cfg.base_seed, &[&info.subject.name, "class-predictor", &run.to_string()]);
    let out: PredictorOutput = match spec {
        PredictorSpec::Ideal => ideal_predictor(Level::Class, &info.classes, &info.defective_classes, seed),
        PredictorSpec::Simulated { mcc } => {
            match simulate_predictor(Level::Class, &info.classes, &info.defective_classes, *mcc, seed) {
                Ok(o) => o,
                Err(PredictError::Degenerate { units, defective }) => {
                    return Ok(Err(format!(
                        "class predictor undefined with {defective} defective of {units} classes"
                    )))
                }
                Err(e) => return Err(e.into()),
            }
        }
        PredictorSpec::Twr { weights } => {
            let history = corpus.history(&info.subject.name);
            let now = history.iter().map(|h| h.ts).max().unwrap_or(0);
            let scores = twr_scores(&info.classes, history, now, weights.unwrap_or_default())?;
            PredictorOutput::from_scores(Level::Class, &info.classes, scores, &info.defective_classes, None, seed)
        }
    };
    let mcc = out.realized_mcc();
    let scores = info.classes.iter().map(|c| (c.clone(), out.scores[c])).collect();
    Ok(Ok((scores, Some(mcc))))
}

fn method_scores(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    info: &ProgramInfo<'_>,
    class: &str,
    spec: &PredictorSpec,
    run: usize,
) -> Result<BTreeMap<String, f64>, HarnessError> {
    let program = &info.subject.program;
    let (_, cls) = program.class(class).expect("class of this program");
    let methods: Vec<String> = cls.methods.iter().map(|m| m.name.clone()).collect();
    let defective = corpus.defective_methods(info.subject, class);
    let seed = derive_seed(cfg.base_seed, &[&info.subject.name, class, "method-predictor", &run.to_string()]);
    let out = match spec {
        PredictorSpec::Simulated { mcc } if !defective.is_empty() && defective.len() < methods.len() => {
            simulate_predictor(Level::Method, &methods, &defective, *mcc, seed)?
        }
        // Degenerate classes cannot be mislabeled at a target MCC; ground
        // truth leaves them all-clean or all-buggy either way.
        _ => ideal_predictor(Level::Method, &methods, &defective, seed),
    };
    Ok(out.scores)
}

fn run_cell(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    info: &ProgramInfo<'_>,
    approach: &ApproachConfig,
    run: usize,
) -> Result<Outcome, HarnessError> {
    let name = &info.subject.name;
    let skip = |reason: String| {
        Outcome::Skipped(SkipEntry {
            approach: approach.name.clone(),
            program: name.clone(),
            bugs: info.bugs.clone(),
            reason,
        })
    };
    let infeasible = |source| HarnessError::Infeasible {
        program: name.clone(),
        source,
    };

    let (plan, class_mcc) = match (&approach.class_predictor, approach.kind.uses_class_scores()) {
        (Some(spec), true) => match class_scores(cfg, corpus, info, spec, run)? {
            Ok((scores, mcc)) => (
                allocate_budget(&scores, info.total, info.lower_bound, cfg.sharpness, cfg.unit).map_err(infeasible)?,
                mcc,
            ),
            Err(reason) => return Ok(skip(reason)),
        },
        _ => (uniform_plan(&info.classes, info.total, cfg.unit).map_err(infeasible)?, None),
    };

    let mut stats = Vec::with_capacity(info.classes.len());
    let mut detected = BTreeSet::new();
    for (ci, class) in info.classes.iter().enumerate() {
        let budget = plan.per_class[ci].budget;
        if budget <= 0.0 || info.subject.program.classes[ci].methods.is_empty() {
            stats.push(SearchStats {
                class: class.clone(),
                ..SearchStats::default()
            });
            continue;
        }
        let scores = match (&approach.method_predictor, approach.kind.uses_method_scores()) {
            (Some(spec), true) => Some(method_scores(cfg, corpus, info, class, spec, run)?),
            _ => None,
        };
        let search = SearchConfig {
            population_size: cfg.population_size,
            budget: Budget {
                amount: budget,
                unit: cfg.unit,
            },
            // Shared across approaches so comparisons are paired per run.
            seed: derive_seed(cfg.base_seed, &[name, class, &run.to_string()]),
            guidance: if scores.is_some() {
                Guidance::DefectAware
            } else {
                Guidance::None
            },
            buggy_threshold: cfg.buggy_threshold,
            ..SearchConfig::default()
        };
        let (_, s) = generate_tests(&info.subject.program, ci, &search, scores.as_ref())?;
        detected.extend(s.traps_hit.keys().filter(|t| info.bugs.contains(t)).cloned());
        stats.push(s);
    }
    Ok(Outcome::Done(Box::new(CellResult {
        approach: approach.name.clone(),
        program: name.clone(),
        run,
        plan,
        class_mcc,
        stats,
        detected,
    })))
}

/// Load and validate the configured corpus.
pub fn prepare_corpus(cfg: &ExperimentConfig) -> Result<Corpus, HarnessError> {
    let corpus = load_corpus(&cfg.corpus)?;
    let report = validate_corpus(&corpus);
    if !report.all_passed() {
        let names: Vec<String> = report.failures().map(|f| f.bug_id.clone()).collect();
        return Err(HarnessError::Validation(names.join(", ")));
    }
    Ok(corpus)
}

/// Run every configured cell on a pool of `workers` threads (defaults to
/// the `SBST_WORKERS` variable, then the number of CPUs).
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let corpus = prepare_corpus(cfg)?;
    run_on_corpus(cfg, &corpus, workers)
}

pub fn run_on_corpus(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    workers: Option<usize>,
) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    if let Some(filter) = &cfg.programs {
        if let Some(missing) = filter.iter().find(|p| corpus.program(p).is_none()) {
            return Err(HarnessError::Config(format!("unknown program `{missing}`")));
        }
    }
    let mut infos = Vec::new();
    for subject in &corpus.programs {
        if cfg.programs.as_ref().is_some_and(|f| !f.contains(&subject.name)) {
            continue;
        }
        let classes: Vec<String> = subject.program.classes.iter().map(|c| c.name.clone()).collect();
        if classes.is_empty() {
            continue;
        }
        let total = cfg.total_budget(classes.len());
        let lower_bound = cfg.lower_bound_for(classes.len());
        if total < classes.len() as f64 * lower_bound {
            return Err(HarnessError::Infeasible {
                program: subject.name.clone(),
                source: AllocError::Infeasible {
                    total,
                    classes: classes.len(),
                    lower_bound,
                },
            });
        }
        infos.push(ProgramInfo {
            subject,
            defective_classes: corpus.defective_classes(subject),
            bugs: corpus.bugs_of(subject).map(|m| m.bug_id.clone()).collect(),
            classes,
            total,
            lower_bound,
        });
    }

    let jobs: Vec<(usize, usize, usize)> = (0..cfg.approaches.len())
        .flat_map(|a| (0..infos.len()).flat_map(move |p| (0..cfg.runs).map(move |r| (a, p, r))))
        .collect();
    let threads = workers.or_else(workers_from_env).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    log::info!("running {} cells on {} workers", jobs.len(), pool.current_num_threads());
    let outcomes: Vec<Result<Outcome, HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(a, p, r)| run_cell(cfg, corpus, &infos[p], &cfg.approaches[a], r))
            .collect()
    });

    let mut cells = Vec::new();
    let mut skipped: BTreeSet<SkipEntry> = BTreeSet::new();
    for o in outcomes {
        match o? {
            Outcome::Done(c) => cells.push(*c),
            Outcome::Skipped(s) => {
                log::warn!("skipping {} for {}: {}", s.program, s.approach, s.reason);
                skipped.insert(s);
            }
        }
    }
    let order: BTreeMap<&str, usize> = cfg.approaches.iter().enumerate().map(|(i, a)| (a.name.as_str(), i)).collect();
    cells.sort_by(|x, y| {
        (order[x.approach.as_str()], &x.program, x.run).cmp(&(order[y.approach.as_str()], &y.program, y.run))
    });

    let bug_programs: BTreeMap<String, String> = infos
        .iter()
        .flat_map(|i| i.bugs.iter().map(move |b| (b.clone(), i.subject.name.clone())))
        .collect();
    let mut matrices = Vec::new();
    for approach in &cfg.approaches {
        let mut m = RunMatrix::new(&approach.name, cfg.runs);
        for info in &infos {
            if skipped.iter().any(|s| s.approach == approach.name && s.program == info.subject.name) {
                continue;
            }
            let mine: Vec<&CellResult> = cells
                .iter()
                .filter(|c| c.approach == approach.name && c.program == info.subject.name)
                .collect();
            for bug in &info.bugs {
                m.insert(bug.clone(), mine.iter().map(|c| c.detected.contains(bug)).collect())?;
            }
        }
        matrices.push(m);
    }
    let pairwise = compare_all(&matrices)?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        bug_programs,
        matrices,
        cells,
        skipped: skipped.into_iter().collect(),
        pairwise,
    })
}

/// Restrict a matrix to a bug subset.
fn restrict(m: &RunMatrix, bugs: &BTreeSet<String>) -> RunMatrix {
    RunMatrix {
        approach: m.approach.clone(),
        runs: m.runs,
        detections: m
            .detections
            .iter()
            .filter(|(b, _)| bugs.contains(*b))
            .map(|(b, d)| (b.clone(), d.clone()))
            .collect(),
    }
}

pub fn compare(a: &RunMatrix, b: &RunMatrix) -> Result<Pairwise, StatsError> {
    let common: BTreeSet<String> = a
        .detections
        .keys()
        .filter(|k| b.detections.contains_key(*k))
        .cloned()
        .collect();
    let (ra, rb) = (restrict(a, &common), restrict(b, &common));
    let (sa, sb) = (ra.bugs_per_run(), rb.bugs_per_run());
    let mean = |s: &[f64]| if s.is_empty() { 0.0 } else { s.iter().sum::<f64>() / s.len() as f64 };
    let (u, p, effect) = if sa.is_empty() || sb.is_empty() {
        (0.0, 1.0, 0.5)
    } else {
        let t = mann_whitney_u(&sa, &sb)?;
        (t.u, t.p, a12(&sa, &sb)?)
    };
    let rates_a = success_rate(&ra);
    let rates_b = success_rate(&rb);
    let mut per_bug = Vec::new();
    for bug in &common {
        let (xa, xb) = (ra.bug_sample(bug).unwrap_or_default(), rb.bug_sample(bug).unwrap_or_default());
        let (p, e) = if xa.is_empty() || xb.is_empty() {
            (1.0, 0.5)
        } else {
            (mann_whitney_u(&xa, &xb)?.p, a12(&xa, &xb)?)
        };
        per_bug.push(BugComparison {
            bug_id: bug.clone(),
            rate_a: rates_a[bug],
            rate_b: rates_b[bug],
            p,
            a12: e,
        });
    }
    Ok(Pairwise {
        a: a.approach.clone(),
        b: b.approach.clone(),
        bugs: common.len(),
        mean_a: mean(&sa),
        mean_b: mean(&sb),
        u,
        p,
        a12: effect,
        unique: unique_bugs(&ra, &rb)?,
        per_bug,
    })
}

fn compare_all(matrices: &[RunMatrix]) -> Result<Vec<Pairwise>, StatsError> {
    let mut out = Vec::new();
    for i in 0..matrices.len() {
        for j in (i + 1)..matrices.len() {
            out.push(compare(&matrices[i], &matrices[j])?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;

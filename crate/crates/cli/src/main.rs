use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sbst_core::corpus::{load_corpus, validate_corpus};
use sbst_core::harness::{emit_report, load_result, run_experiment, summary_text, ExperimentConfig, HarnessError};
use sbst_core::minilang::parse_program;
use sbst_core::predict::{simulate_predictor, Level, PredictError};
use sbst_core::search::{generate_tests, Budget, Guidance, SearchConfig};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sbst", version, about = "Defect-prediction-guided search-based test generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that every bug manifest's witness hits exactly its own trap.
    Validate { corpus: PathBuf },
    /// Generate a test suite for one class of a MiniLang program.
    Gen {
        program: PathBuf,
        #[arg(long)]
        class: String,
        /// Fitness evaluations.
        #[arg(long)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        population: usize,
        #[arg(long, value_enum, default_value_t = GuidanceArg::None)]
        guidance: GuidanceArg,
        /// JSON object mapping method names to defect scores.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Write the suite as JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Produce labels and scores that reach a target MCC against ground truth.
    SimulatePredictor {
        #[arg(long, allow_hyphen_values = true)]
        mcc: f64,
        #[arg(long)]
        seed: u64,
        /// Number of synthetic units (ignored with --corpus).
        #[arg(long, default_value_t = 10)]
        units: usize,
        /// Defective synthetic units; defaults to ceil(0.2 * units).
        #[arg(long)]
        defective: Option<usize>,
        /// Use the classes of a corpus program as units.
        #[arg(long, requires = "program")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        program: Option<String>,
    },
    /// Run an experiment described by a TOML config and write its report.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Report directory; defaults to results/<config name>.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the summary of a finished experiment and rewrite its report files.
    Report { dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum GuidanceArg {
    None,
    DefectAware,
}

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<HarnessError>(), Some(HarnessError::Infeasible { .. })));
            ExitCode::from(if infeasible { EXIT_INFEASIBLE } else { EXIT_FAILURE })
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { corpus } => validate(&corpus),
        Command::Gen {
            program,
            class,
            budget,
            seed,
            population,
            guidance,
            scores,
            out,
        } => gen(&program, &class, budget, seed, population, guidance, scores.as_deref(), out.as_deref()),
        Command::SimulatePredictor {
            mcc,
            seed,
            units,
            defective,
            corpus,
            program,
        } => simulate(mcc, seed, units, defective, corpus.as_deref(), program.as_deref()),
        Command::Experiment { config, out, workers } => experiment(&config, out, workers),
        Command::Report { dir } => report(&dir),
    }
}

fn validate(root: &Path) -> Result<ExitCode> {
    let corpus = load_corpus(root).with_context(|| format!("loading corpus {}", root.display()))?;
    let report = validate_corpus(&corpus);
    for e in &report.entries {
        println!("{} {} {}", if e.passed { "ok  " } else { "FAIL" }, e.bug_id, e.detail);
    }
    let failed = report.failures().count();
    println!(
        "{} programs, {} manifests, {} failed",
        corpus.programs.len(),
        report.entries.len(),
        failed
    );
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILURE) })
}

#[allow(clippy::too_many_arguments)]
fn gen(
    path: &Path,
    class: &str,
    budget: u64,
    seed: u64,
    population: usize,
    guidance: GuidanceArg,
    scores: Option<&Path>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let program = parse_program(&text).with_context(|| format!("parsing {}", path.display()))?;
    let (ci, _) = program
        .class(class)
        .with_context(|| format!("no class `{class}` in {}", path.display()))?;
    let scores: Option<BTreeMap<String, f64>> = match scores {
        Some(p) => {
            let raw = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str(&raw).with_context(|| format!("parsing scores in {}", p.display()))?)
        }
        None => None,
    };
    let config = SearchConfig {
        population_size: population,
        budget: Budget::evaluations(budget),
        seed,
        guidance: match guidance {
            GuidanceArg::None => Guidance::None,
            GuidanceArg::DefectAware => Guidance::DefectAware,
        },
        ..SearchConfig::default()
    };
    let (suite, stats) = generate_tests(&program, ci, &config, scores.as_ref())?;
    let json = serde_json::to_string_pretty(&suite)?;
    match out {
        Some(p) => std::fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{json}"),
    }
    eprintln!(
        "{}: {} evaluations, {} generations, coverage {}/{} ({:.1}%), traps [{}]",
        stats.class,
        stats.evaluations,
        stats.generations,
        stats.covered,
        stats.targets,
        stats.coverage() * 100.0,
        stats.traps_hit.keys().cloned().collect::<Vec<_>>().join(", ")
    );
    Ok(ExitCode::SUCCESS)
}

fn simulate(
    mcc: f64,
    seed: u64,
    units: usize,
    defective: Option<usize>,
    corpus: Option<&Path>,
    program: Option<&str>,
) -> Result<ExitCode> {
    let (names, buggy): (Vec<String>, BTreeSet<String>) = match (corpus, program) {
        (Some(root), Some(name)) => {
            let corpus = load_corpus(root)?;
            let subject = corpus
                .program(name)
                .with_context(|| format!("no program `{name}` in {}", root.display()))?;
            let names = subject.program.classes.iter().map(|c| c.name.clone()).collect();
            (names, corpus.defective_classes(subject))
        }
        _ => {
            let d = defective.unwrap_or_else(|| (units as f64 * 0.2).ceil() as usize);
            if d > units {
                bail!("{d} defective units out of {units}");
            }
            let names: Vec<String> = (0..units).map(|i| format!("u{i}")).collect();
            let buggy = names[..d].iter().cloned().collect();
            (names, buggy)
        }
    };
    let out = match simulate_predictor(Level::Class, &names, &buggy, mcc, seed) {
        Err(e @ PredictError::Degenerate { .. }) => bail!("{e}"),
        other => other?,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    eprintln!(
        "target MCC {mcc}, realized {:.6} (tp {} fp {} tn {} fn {})",
        out.realized_mcc(),
        out.realized.tp,
        out.realized.fp,
        out.realized.tn,
        out.realized.fn_
    );
    Ok(ExitCode::SUCCESS)
}

fn experiment(path: &Path, out: Option<PathBuf>, workers: Option<usize>) -> Result<ExitCode> {
    let cfg = ExperimentConfig::from_file(path)?;
    let out = out.unwrap_or_else(|| {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
        PathBuf::from("results").join(stem)
    });
    log::info!("running {} with corpus {}", path.display(), cfg.corpus.display());
    let started = std::time::Instant::now();
    let result = run_experiment(&cfg, workers)?;
    let files = emit_report(&result, &out)?;
    print!("{}", summary_text(&result));
    println!();
    println!(
        "wrote {} files to {} in {:.1}s",
        files.len(),
        out.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(ExitCode::SUCCESS)
}

fn report(dir: &Path) -> Result<ExitCode> {
    let result = load_result(dir)?;
    emit_report(&result, dir)?;
    print!("{}", summary_text(&result));
    Ok(ExitCode::SUCCESS)
}

use super::*;
use std::fs;
use std::path::Path;

const SHOP: &str = "program shop;
class Cart {
    fn total(n: int, price: int) -> int {
        if (n > 0) {
            if (n * price > 1000) { trap \"shop-1\" if (n == 7); return 1; }
        }
        return 0;
    }
}
class Tax { fn rate(x: int) -> int { if (x < 0) { return 0; } return x / 10; } }
class Log { fn level(v: int) -> int { if (v == 3) { return 1; } return 2; } }
";

const PLAIN: &str = "class Only { fn f(a: int) -> int { if (a > 5) { return 1; } return 0; } }";

fn write(root: &Path, rel: &str, text: &str) {
    let path = root.join(rel);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, text).unwrap();
}

fn corpus_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "programs/shop.mini", SHOP);
    write(dir.path(), "programs/plain.mini", PLAIN);
    write(
        dir.path(),
        "manifests/shop-1.json",
        r#"{"bug_id":"shop-1","program":"programs/shop.mini","defective_class":"Cart",
            "defective_methods":["total"],"witness":{"method":"total","args":[7,200]},"description":"x"}"#,
    );
    dir
}

fn config(root: &Path, approaches: &str) -> ExperimentConfig {
    let text = format!(
        "corpus = {:?}\nruns = 4\nbase_seed = 11\nper_class_factor = 60\npopulation_size = 8\n{approaches}",
        root.display().to_string()
    );
    ExperimentConfig::from_toml(&text, Path::new("/")).unwrap()
}

const BASE_CL: &str = "
[[approach]]
name = \"baseline\"
kind = \"baseline\"

[[approach]]
name = \"cl\"
kind = \"sbst_cl\"
class_predictor = { kind = \"ideal\" }
";

#[test]
fn smoke_single_approach_single_run() {
    let dir = corpus_dir();
    let mut cfg = config(dir.path(), "[[approach]]\nname = \"baseline\"\nkind = \"baseline\"\n");
    cfg.runs = 1;
    cfg.programs = Some(vec!["shop".into()]);
    let r = run_experiment(&cfg, Some(1)).unwrap();
    assert_eq!(r.matrices.len(), 1);
    assert_eq!(r.matrices[0].detections["shop-1"].len(), 1);
    assert!(r.pairwise.is_empty());
}

#[test]
fn reproducible_across_worker_counts() {
    let dir = corpus_dir();
    let cfg = config(dir.path(), BASE_CL);
    let a = run_experiment(&cfg, Some(1)).unwrap();
    let b = run_experiment(&cfg, Some(4)).unwrap();
    assert_eq!(a, b);
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&a, da.path()).unwrap();
    emit_report(&b, db.path()).unwrap();
    for f in ["detections.csv", "summary.txt", "result.json", "pairwise.csv"] {
        assert_eq!(fs::read(da.path().join(f)).unwrap(), fs::read(db.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(load_result(da.path()).unwrap(), a);
}

#[test]
fn budget_accounting_and_plans() {
    let dir = corpus_dir();
    let cfg = config(dir.path(), BASE_CL);
    let r = run_experiment(&cfg, None).unwrap();
    for c in &r.cells {
        let total = cfg.total_budget(c.plan.per_class.len());
        assert_eq!(c.plan.sum(), total);
        assert!(c.consumed() as f64 <= total);
        if c.approach == "cl" && c.program == "shop" {
            let cart = c.plan.get("Cart").unwrap();
            assert!(cart > c.plan.get("Tax").unwrap());
        }
    }
    let pair = r.pair("baseline", "cl").unwrap();
    assert_eq!(pair.bugs, 1);
}

#[test]
fn constant_scores_reproduce_baseline() {
    let dir = corpus_dir();
    // No history file: TWR scores every class 0.
    let cfg = config(
        dir.path(),
        "[[approach]]\nname = \"baseline\"\nkind = \"baseline\"\n[[approach]]\nname = \"flat\"\nkind = \"sbst_cl\"\nclass_predictor = { kind = \"twr\" }\n",
    );
    let r = run_experiment(&cfg, None).unwrap();
    let base: Vec<_> = r.cells.iter().filter(|c| c.approach == "baseline").collect();
    let flat: Vec<_> = r.cells.iter().filter(|c| c.approach == "flat").collect();
    for (b, f) in base.iter().zip(&flat) {
        assert_eq!(b.plan.per_class, f.plan.per_class);
        assert_eq!(b.stats, f.stats);
        assert_eq!(b.detected, f.detected);
    }
    assert_eq!(r.matrices[0].detections, r.matrices[1].detections);
}

#[test]
fn degenerate_programs_are_logged() {
    let dir = corpus_dir();
    let cfg = config(
        dir.path(),
        "[[approach]]\nname = \"sim\"\nkind = \"sbst_cl\"\nclass_predictor = { kind = \"simulated\", mcc = 0.0 }\n",
    );
    let r = run_experiment(&cfg, None).unwrap();
    // `plain` has a single clean class, so no MCC can be targeted.
    assert_eq!(r.skipped.len(), 1);
    assert_eq!(r.skipped[0].program, "plain");
    let m = r.matrix("sim").unwrap();
    for bug in r.bug_programs.keys() {
        assert!(m.detections.contains_key(bug) || r.skipped.iter().any(|s| s.bugs.contains(bug)));
    }
}

#[test]
fn infeasible_lower_bound() {
    let dir = corpus_dir();
    let mut cfg = config(dir.path(), BASE_CL);
    cfg.lower_bound = Some(1000.0);
    assert!(matches!(run_experiment(&cfg, None), Err(HarnessError::Infeasible { .. })));
}

#[test]
fn config_errors() {
    let dir = corpus_dir();
    let mut cfg = config(dir.path(), "[[approach]]\nname = \"cl\"\nkind = \"sbst_cl\"\n");
    assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    cfg = config(dir.path(), BASE_CL);
    cfg.runs = 0;
    assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))));
    assert!(ExperimentConfig::from_toml("corpus = 3", Path::new(".")).is_err());
}

#[test]
fn empty_result_reports_headers_only() {
    let cfg = config(Path::new("/nonexistent"), BASE_CL);
    let r = ExperimentResult {
        config: cfg,
        bug_programs: BTreeMap::new(),
        matrices: Vec::new(),
        cells: Vec::new(),
        skipped: Vec::new(),
        pairwise: Vec::new(),
    };
    let out = tempfile::tempdir().unwrap();
    emit_report(&r, out.path()).unwrap();
    let det = fs::read_to_string(out.path().join("detections.csv")).unwrap();
    assert_eq!(det.lines().count(), 1);
    let first = fs::read(out.path().join("summary.txt")).unwrap();
    emit_report(&r, out.path()).unwrap();
    assert_eq!(first, fs::read(out.path().join("summary.txt")).unwrap());
}

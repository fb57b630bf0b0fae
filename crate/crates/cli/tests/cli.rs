use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sbst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sbst"))
        .args(args)
        .env("SBST_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const TOY: &str = "class Gate {
    fn open(code: int, level: int) -> int {
        if (code == 4242) {
            trap \"gate-1\" if (level > 3);
            return 1;
        }
        return 0;
    }
    fn close(x: int) -> int { if (x < 0) { return 0; } return 1; }
}
";

fn toy_corpus(witness_args: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("programs")).unwrap();
    fs::create_dir_all(dir.path().join("manifests")).unwrap();
    fs::write(dir.path().join("programs/gate.mini"), TOY).unwrap();
    fs::write(
        dir.path().join("manifests/gate-1.json"),
        format!(
            r#"{{"bug_id":"gate-1","program":"programs/gate.mini","defective_class":"Gate",
                "defective_methods":["open"],"witness":{{"method":"open","args":{witness_args}}}}}"#
        ),
    )
    .unwrap();
    dir
}

#[test]
fn validate_shipped_corpus() {
    let out = sbst(&["validate", corpus().to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stdout));
    assert!(text(&out.stdout).contains("ok   math94-overflow"));
}

#[test]
fn validate_reports_a_bad_witness() {
    let dir = toy_corpus("[4242, 1]");
    let out = sbst(&["validate", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stdout).contains("FAIL gate-1"));
    let dir = toy_corpus("[4242, 9]");
    assert!(sbst(&["validate", dir.path().to_str().unwrap()]).status.success());
}

#[test]
fn gen_writes_a_suite() {
    let dir = toy_corpus("[4242, 9]");
    let program = dir.path().join("programs/gate.mini");
    let suite = dir.path().join("suite.json");
    let out = sbst(&[
        "gen",
        program.to_str().unwrap(),
        "--class",
        "Gate",
        "--budget",
        "2000",
        "--seed",
        "3",
        "--out",
        suite.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&suite).unwrap()).unwrap();
    assert_eq!(json["class"], "Gate");
    assert!(!json["entries"].as_array().unwrap().is_empty());
    assert!(text(&out.stderr).contains("2000 evaluations"));
}

#[test]
fn gen_with_defect_aware_guidance() {
    let dir = toy_corpus("[4242, 9]");
    let program = dir.path().join("programs/gate.mini");
    let scores = dir.path().join("scores.json");
    fs::write(&scores, r#"{"open": 0.9, "close": 0.1}"#).unwrap();
    let args = |extra: &[&str]| {
        let mut v = vec!["gen", program.to_str().unwrap(), "--class", "Gate", "--budget", "300", "--guidance", "defect-aware"];
        v.extend_from_slice(extra);
        sbst(&v)
    };
    assert!(args(&["--scores", scores.to_str().unwrap()]).status.success());
    // Defect-aware guidance without scores is rejected.
    assert_eq!(args(&[]).status.code(), Some(1));
}

#[test]
fn gen_unknown_class_fails() {
    let dir = toy_corpus("[4242, 9]");
    let program = dir.path().join("programs/gate.mini");
    let out = sbst(&["gen", program.to_str().unwrap(), "--class", "Nope", "--budget", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("no class `Nope`"));
}

#[test]
fn simulate_predictor_hits_target() {
    let out = sbst(&["simulate-predictor", "--mcc", "0.5", "--seed", "1", "--units", "100", "--defective", "20"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["realized"]["tp"], 8);
    assert_eq!(json["realized"]["fn"], 12);
    let negative = sbst(&["simulate-predictor", "--mcc", "-0.4", "--seed", "1"]);
    assert!(negative.status.success(), "{}", text(&negative.stderr));
}

#[test]
fn simulate_predictor_on_corpus_program() {
    let out = sbst(&[
        "simulate-predictor",
        "--mcc",
        "1.0",
        "--seed",
        "5",
        "--corpus",
        corpus().to_str().unwrap(),
        "--program",
        "bank",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["labels"]["Account"], "defective");
    assert_eq!(json["labels"]["Ledger"], "clean");
}

#[test]
fn simulate_predictor_degenerate() {
    let out = sbst(&["simulate-predictor", "--mcc", "0.3", "--seed", "1", "--units", "4", "--defective", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

fn write_config(dir: &Path, corpus: &Path, extra: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    fs::write(
        &path,
        format!(
            "corpus = {:?}\nruns = 3\nbase_seed = 5\nper_class_factor = 100\n{extra}\n[[approach]]\nname = \"baseline\"\nkind = \"baseline\"\n\n[[approach]]\nname = \"cl\"\nkind = \"sbst_cl\"\nclass_predictor = {{ kind = \"ideal\" }}\n",
            corpus.display().to_string()
        ),
    )
    .unwrap();
    path
}

#[test]
fn experiment_and_report_round_trip() {
    let corpus = toy_corpus("[4242, 9]");
    let work = tempfile::tempdir().unwrap();
    let cfg = write_config(work.path(), corpus.path(), "");
    let out_dir = work.path().join("out");
    let out = sbst(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("baseline vs cl"));
    let detections = fs::read_to_string(out_dir.join("detections.csv")).unwrap();
    assert_eq!(detections.lines().count(), 1 + 2 * 3);

    let before = fs::read(out_dir.join("summary.txt")).unwrap();
    let report = sbst(&["report", out_dir.to_str().unwrap()]);
    assert!(report.status.success());
    assert_eq!(report.stdout, before);
    assert_eq!(fs::read(out_dir.join("summary.txt")).unwrap(), before);
}

#[test]
fn infeasible_config_exits_with_two() {
    let corpus = toy_corpus("[4242, 9]");
    let work = tempfile::tempdir().unwrap();
    let cfg = write_config(work.path(), corpus.path(), "lower_bound = 150.0");
    let out = sbst(&["experiment", "--config", cfg.to_str().unwrap(), "--out", work.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
}

#[test]
fn invalid_corpus_blocks_experiment() {
    let corpus = toy_corpus("[1, 1]");
    let work = tempfile::tempdir().unwrap();
    let cfg = write_config(work.path(), corpus.path(), "");
    let out = sbst(&["experiment", "--config", cfg.to_str().unwrap(), "--out", work.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("gate-1"));
}

#[test]
fn report_on_missing_directory_fails() {
    let work = tempfile::tempdir().unwrap();
    let out = sbst(&["report", work.path().join("nothing").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

use super::{ExperimentResult, HarnessError};
use crate::search::SearchStats;
use crate::stats::{success_rate, ALPHA};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const RESULT_FILE: &str = "result.json";

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn join(items: impl IntoIterator<Item = impl AsRef<str>>) -> String {
    items.into_iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>().join(";")
}

fn detections_csv(r: &ExperimentResult) -> String {
    let mut s = String::from("approach,bug_id,program,run,detected\n");
    for m in &r.matrices {
        for (bug, runs) in &m.detections {
            let program = r.bug_programs.get(bug).map(String::as_str).unwrap_or("");
            for (i, d) in runs.iter().enumerate() {
                let _ = writeln!(s, "{},{bug},{program},{},{}", m.approach, i + 1, *d as u8);
            }
        }
    }
    s
}

fn bug_stats_csv(r: &ExperimentResult) -> String {
    let mut s = String::from("approach,bug_id,program,detections,runs,success_rate\n");
    for m in &r.matrices {
        let rates = success_rate(m);
        for (bug, runs) in &m.detections {
            let program = r.bug_programs.get(bug).map(String::as_str).unwrap_or("");
            let hits = runs.iter().filter(|d| **d).count();
            let _ = writeln!(s, "{},{bug},{program},{hits},{},{:.4}", m.approach, m.runs, rates[bug]);
        }
    }
    s
}

fn pairwise_csv(r: &ExperimentResult) -> String {
    let mut s = String::from("granularity,approach_a,approach_b,bug_id,value_a,value_b,p_value,a12,significant\n");
    for p in &r.pairwise {
        let _ = writeln!(
            s,
            "project,{},{},,{:.4},{:.4},{:.6},{:.4},{}",
            p.a,
            p.b,
            p.mean_a,
            p.mean_b,
            p.p,
            p.a12,
            p.p < ALPHA
        );
        for b in &p.per_bug {
            let _ = writeln!(
                s,
                "bug,{},{},{},{:.4},{:.4},{:.6},{:.4},{}",
                p.a,
                p.b,
                b.bug_id,
                b.rate_a,
                b.rate_b,
                b.p,
                b.a12,
                b.p < ALPHA
            );
        }
    }
    s
}

fn plans_csv(r: &ExperimentResult) -> String {
    let mut s = String::from("approach,program,run,class,budget,consumed\n");
    for c in &r.cells {
        for (entry, stats) in c.plan.per_class.iter().zip(&c.stats) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                c.approach,
                c.program,
                c.run + 1,
                entry.class,
                entry.budget,
                stats.evaluations
            );
        }
    }
    s
}

fn search_stats_csv(r: &ExperimentResult) -> String {
    let mut s = format!("approach,program,run,{}\n", SearchStats::CSV_HEADER);
    for c in &r.cells {
        for st in &c.stats {
            let _ = writeln!(s, "{},{},{},{}", c.approach, c.program, c.run + 1, st.csv_row());
        }
    }
    s
}

fn skipped_csv(r: &ExperimentResult) -> String {
    let mut s = String::from("approach,program,bug_id,reason\n");
    for k in &r.skipped {
        for bug in &k.bugs {
            let _ = writeln!(s, "{},{},{bug},\"{}\"", k.approach, k.program, k.reason.replace('"', "'"));
        }
    }
    s
}

/// Human-readable overview: totals, pairwise tests and success rates.
pub fn summary_text(r: &ExperimentResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Experiment summary");
    let _ = writeln!(s, "runs: {}  unit: {:?}  per-class factor: {}", r.config.runs, r.config.unit, r.config.per_class_factor);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<24} {:>6} {:>12} {:>12} {:>10}", "approach", "bugs", "detections", "mean/run", "distinct");
    for m in &r.matrices {
        let per_run = m.bugs_per_run();
        let mean = if per_run.is_empty() { 0.0 } else { per_run.iter().sum::<f64>() / per_run.len() as f64 };
        let _ = writeln!(
            s,
            "{:<24} {:>6} {:>12} {:>12.3} {:>10}",
            m.approach,
            m.detections.len(),
            m.total_detections(),
            mean,
            m.detected_ever().len()
        );
    }
    if !r.pairwise.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Pairwise comparisons (bugs found per run, two-tailed U test, alpha {ALPHA})");
        for p in &r.pairwise {
            let _ = writeln!(
                s,
                "  {} vs {}: bugs {}  mean {:.3} vs {:.3}  U {:.1}  p {:.6}  A12 {:.4}{}",
                p.a,
                p.b,
                p.bugs,
                p.mean_a,
                p.mean_b,
                p.u,
                p.p,
                p.a12,
                if p.p < ALPHA { "  *" } else { "" }
            );
            let _ = writeln!(s, "    only {}: [{}]", p.a, join(&p.unique.only_a));
            let _ = writeln!(s, "    only {}: [{}]", p.b, join(&p.unique.only_b));
        }
    }
    if !r.matrices.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Success rates");
        let mut header = format!("  {:<28}", "bug");
        for m in &r.matrices {
            let _ = write!(header, " {:>12}", truncate(&m.approach, 12));
        }
        let _ = writeln!(s, "{header}");
        let rates: Vec<_> = r.matrices.iter().map(success_rate).collect();
        for bug in r.bug_programs.keys() {
            let mut line = format!("  {bug:<28}");
            for rate in &rates {
                match rate.get(bug) {
                    Some(v) => {
                        let _ = write!(line, " {v:>12.2}");
                    }
                    None => {
                        let _ = write!(line, " {:>12}", "-");
                    }
                }
            }
            let _ = writeln!(s, "{line}");
        }
    }
    if !r.skipped.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Skipped");
        for k in &r.skipped {
            let _ = writeln!(s, "  {} / {}: {} ({} bugs)", k.approach, k.program, k.reason, k.bugs.len());
        }
    }
    s
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Write all report files into `out`, creating it if needed.
pub fn emit_report(r: &ExperimentResult, out: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out).map_err(io(out))?;
    let json = serde_json::to_string_pretty(r).map_err(|e| HarnessError::Result(e.to_string()))?;
    let files = [
        ("detections.csv", detections_csv(r)),
        ("bug_stats.csv", bug_stats_csv(r)),
        ("pairwise.csv", pairwise_csv(r)),
        ("plans.csv", plans_csv(r)),
        ("search_stats.csv", search_stats_csv(r)),
        ("skipped.csv", skipped_csv(r)),
        ("summary.txt", summary_text(r)),
        (RESULT_FILE, json + "\n"),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = out.join(name);
        fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_result(dir: &Path) -> Result<ExperimentResult, HarnessError> {
    let path = dir.join(RESULT_FILE);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Result(e.to_string()))
}

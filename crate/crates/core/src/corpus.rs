//! Subject programs with seeded bugs, their manifests and commit histories.
//!
//! Layout under a corpus root:
//!
//! ```text
//! programs/<name>.mini     MiniLang sources
//! manifests/<bug>.json     one BugManifest per file
//! history/<name>.jsonl     one HistoryRecord per line, keyed by program file stem
//! ```

use crate::executor::{execute, Limits, TestCase};
use crate::minilang::{parse_program, MethodRef, ParseError, Program, Stmt, Value};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("manifest `{bug_id}`: {message}")]
    Manifest { bug_id: String, message: String },
    #[error("{path}:{line}: {message}")]
    History { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub method: String,
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugManifest {
    pub bug_id: String,
    /// Program source path relative to the corpus root.
    pub program: String,
    pub defective_class: String,
    pub defective_methods: Vec<String>,
    /// A call on a method of the defective class that reaches the trap.
    pub witness: Witness,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub class: String,
    /// Seconds since the epoch.
    pub ts: i64,
    pub author: String,
    pub fix: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProgram {
    /// File stem, used as the program's key everywhere.
    pub name: String,
    pub path: String,
    pub program: Program,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    pub programs: Vec<SubjectProgram>,
    pub manifests: Vec<BugManifest>,
    pub histories: BTreeMap<String, Vec<HistoryRecord>>,
}

impl Corpus {
    pub fn program(&self, name: &str) -> Option<&SubjectProgram> {
        self.programs.iter().find(|p| p.name == name)
    }

    pub fn program_of(&self, manifest: &BugManifest) -> Option<&SubjectProgram> {
        self.programs.iter().find(|p| p.path == manifest.program)
    }

    pub fn bugs_of<'a>(&'a self, program: &'a SubjectProgram) -> impl Iterator<Item = &'a BugManifest> + 'a {
        self.manifests.iter().filter(move |m| m.program == program.path)
    }

    pub fn defective_classes(&self, program: &SubjectProgram) -> BTreeSet<String> {
        self.bugs_of(program).map(|m| m.defective_class.clone()).collect()
    }

    /// Defective methods of one class of `program`.
    pub fn defective_methods(&self, program: &SubjectProgram, class: &str) -> BTreeSet<String> {
        self.bugs_of(program)
            .filter(|m| m.defective_class == class)
            .flat_map(|m| m.defective_methods.iter().cloned())
            .collect()
    }

    pub fn history(&self, program: &str) -> &[HistoryRecord] {
        self.histories.get(program).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn sorted_entries(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, CorpusError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let read = fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in read {
        let entry = entry.map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string()
}

/// Build the witness test case, checking it names a method of the
/// defective class with well-typed arguments.
pub fn witness_test(program: &Program, manifest: &BugManifest) -> Result<TestCase, String> {
    let (class, c) = program
        .class(&manifest.defective_class)
        .ok_or_else(|| format!("unknown class `{}`", manifest.defective_class))?;
    let method = c
        .method_index(&manifest.witness.method)
        .ok_or_else(|| format!("witness method `{}` not in `{}`", manifest.witness.method, c.name))?;
    let test = TestCase {
        method: MethodRef { class, method },
        args: manifest.witness.args.clone(),
    };
    crate::executor::check_test(program, &test).map_err(|e| format!("witness: {e}"))?;
    Ok(test)
}

fn check_manifest(program: &Program, m: &BugManifest) -> Result<(), String> {
    let (_, class) = program
        .class(&m.defective_class)
        .ok_or_else(|| format!("unknown class `{}`", m.defective_class))?;
    if m.defective_methods.is_empty() {
        return Err("no defective methods listed".into());
    }
    if let Some(bad) = m.defective_methods.iter().find(|n| class.method_index(n).is_none()) {
        return Err(format!("unknown method `{}.{bad}`", class.name));
    }
    witness_test(program, m).map(|_| ())
}

pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus {
        root: root.to_path_buf(),
        ..Corpus::default()
    };
    for path in sorted_entries(&root.join("programs"), "mini")? {
        let program = parse_program(&read(&path)?).map_err(|source| CorpusError::Parse {
            path: path.clone(),
            source,
        })?;
        corpus.programs.push(SubjectProgram {
            name: stem(&path),
            path: format!("programs/{}", path.file_name().unwrap_or_default().to_string_lossy()),
            program,
        });
    }

    let mut seen = BTreeSet::new();
    for path in sorted_entries(&root.join("manifests"), "json")? {
        let m: BugManifest = serde_json::from_str(&read(&path)?).map_err(|source| CorpusError::Json {
            path: path.clone(),
            source,
        })?;
        let err = |message: String| CorpusError::Manifest {
            bug_id: m.bug_id.clone(),
            message,
        };
        if !seen.insert(m.bug_id.clone()) {
            return Err(err("duplicate bug id".into()));
        }
        let program = corpus
            .program_of(&m)
            .ok_or_else(|| err(format!("program `{}` not found", m.program)))?;
        check_manifest(&program.program, &m).map_err(err)?;
        corpus.manifests.push(m);
    }

    for path in sorted_entries(&root.join("history"), "jsonl")? {
        let name = stem(&path);
        let program = corpus.program(&name).ok_or_else(|| CorpusError::History {
            path: path.clone(),
            line: 0,
            message: format!("no program named `{name}`"),
        })?;
        let mut records = Vec::new();
        for (i, line) in read(&path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: HistoryRecord = serde_json::from_str(line).map_err(|e| CorpusError::History {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if program.program.class(&rec.class).is_none() {
                return Err(CorpusError::History {
                    path: path.clone(),
                    line: i + 1,
                    message: format!("unknown class `{}`", rec.class),
                });
            }
            records.push(rec);
        }
        corpus.histories.insert(name, records);
    }
    Ok(corpus)
}

/// The method whose body contains `trap <id>`.
pub fn trap_owner(program: &Program, id: &str) -> Option<MethodRef> {
    fn has(block: &[Stmt], id: &str) -> bool {
        block.iter().any(|s| match s {
            Stmt::Trap { id: t, .. } => t == id,
            Stmt::If {
                then_block, else_block, ..
            } => has(then_block, id) || else_block.as_deref().is_some_and(|b| has(b, id)),
            Stmt::While { body, .. } => has(body, id),
            _ => false,
        })
    }
    program.classes.iter().enumerate().find_map(|(ci, c)| {
        c.methods
            .iter()
            .position(|m| has(&m.body, id))
            .map(|mi| MethodRef { class: ci, method: mi })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub bug_id: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

fn validate_one(corpus: &Corpus, m: &BugManifest) -> Result<(), String> {
    let program = &corpus
        .program_of(m)
        .ok_or_else(|| format!("program `{}` not loaded", m.program))?
        .program;
    let owner = trap_owner(program, &m.bug_id).ok_or("no trap with this id")?;
    let owner_class = &program.classes[owner.class];
    let owner_method = &owner_class.methods[owner.method].name;
    if owner_class.name != m.defective_class || !m.defective_methods.contains(owner_method) {
        return Err(format!("trap sits in `{}.{owner_method}`, not a listed defective method", owner_class.name));
    }
    let test = witness_test(program, m)?;
    let trace = execute(program, &test, &Limits::default()).map_err(|e| e.to_string())?;
    let expected = BTreeSet::from([m.bug_id.clone()]);
    if trace.traps_hit != expected {
        return Err(format!("witness hit traps {:?}", trace.traps_hit));
    }
    Ok(())
}

/// Execute every manifest's witness and check it hits exactly its own trap.
pub fn validate_corpus(corpus: &Corpus) -> ValidationReport {
    ValidationReport {
        entries: corpus
            .manifests
            .iter()
            .map(|m| match validate_one(corpus, m) {
                Ok(()) => ValidationEntry {
                    bug_id: m.bug_id.clone(),
                    passed: true,
                    detail: "witness hits trap".into(),
                },
                Err(detail) => ValidationEntry {
                    bug_id: m.bug_id.clone(),
                    passed: false,
                    detail,
                },
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROGRAM: &str = "program toy; class A { fn f(x: int) { if (x == 3) { trap \"toy-1\"; } } } class B { fn g() { } }";

    fn write(root: &Path, rel: &str, text: &str) {
        let path = root.join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }

    fn manifest(method: &str, arg: i64) -> String {
        serde_json::json!({
            "bug_id": "toy-1",
            "program": "programs/toy.mini",
            "defective_class": "A",
            "defective_methods": [method],
            "witness": {"method": "f", "args": [arg]},
            "description": "equality guard"
        })
        .to_string()
    }

    #[test]
    fn empty_directory_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let c = load_corpus(dir.path()).unwrap();
        assert!(c.programs.is_empty() && c.manifests.is_empty());
        assert!(validate_corpus(&c).entries.is_empty());
    }

    #[test]
    fn loads_and_validates_toy_corpus() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "programs/toy.mini", PROGRAM);
        write(dir.path(), "manifests/toy-1.json", &manifest("f", 3));
        write(
            dir.path(),
            "history/toy.jsonl",
            "{\"class\":\"A\",\"ts\":10,\"author\":\"x\",\"fix\":true}\n\n{\"class\":\"B\",\"ts\":5,\"author\":\"y\",\"fix\":false}\n",
        );
        let c = load_corpus(dir.path()).unwrap();
        assert_eq!(c.history("toy").len(), 2);
        let report = validate_corpus(&c);
        assert!(report.all_passed(), "{report:?}");
        let p = c.program("toy").unwrap();
        assert_eq!(c.defective_classes(p), BTreeSet::from(["A".to_string()]));
    }

    #[test]
    fn missing_trap_is_a_failed_entry() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "programs/toy.mini", PROGRAM);
        write(dir.path(), "manifests/toy-1.json", &manifest("f", 4));
        let c = load_corpus(dir.path()).unwrap();
        let report = validate_corpus(&c);
        assert!(!report.all_passed());
        assert_eq!(report.failures().next().unwrap().bug_id, "toy-1");
    }

    #[test]
    fn unknown_method_names_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "programs/toy.mini", PROGRAM);
        write(dir.path(), "manifests/toy-1.json", &manifest("nope", 3));
        let err = load_corpus(dir.path()).unwrap_err();
        assert!(err.to_string().contains("toy-1"), "{err}");
    }

    #[test]
    fn history_with_unknown_class_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "programs/toy.mini", PROGRAM);
        write(dir.path(), "history/toy.jsonl", "{\"class\":\"Z\",\"ts\":1,\"author\":\"x\",\"fix\":false}\n");
        assert!(matches!(load_corpus(dir.path()), Err(CorpusError::History { line: 1, .. })));
    }
}

use super::HarnessError;
use crate::allocate::BudgetUnit;
use crate::predict::TwrWeights;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApproachKind {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "sbst_cl")]
    SbstCl,
    #[serde(rename = "sbst_ml")]
    SbstMl,
    #[serde(rename = "sbst_cl+ml")]
    SbstClMl,
}

impl ApproachKind {
    pub fn uses_class_scores(self) -> bool {
        matches!(self, ApproachKind::SbstCl | ApproachKind::SbstClMl)
    }

    pub fn uses_method_scores(self) -> bool {
        matches!(self, ApproachKind::SbstMl | ApproachKind::SbstClMl)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PredictorSpec {
    /// Ground-truth labels.
    Ideal,
    /// Labels reaching the given MCC against ground truth.
    Simulated { mcc: f64 },
    /// Time-weighted risk over the program's commit history (classes only).
    Twr {
        #[serde(default)]
        weights: Option<TwrWeights>,
    },
}

impl PredictorSpec {
    pub fn describe(&self) -> String {
        match self {
            PredictorSpec::Ideal => "ideal".into(),
            PredictorSpec::Simulated { mcc } => format!("simulated(mcc={mcc})"),
            PredictorSpec::Twr { .. } => "twr".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproachConfig {
    pub name: String,
    pub kind: ApproachKind,
    #[serde(default)]
    pub class_predictor: Option<PredictorSpec>,
    #[serde(default)]
    pub method_predictor: Option<PredictorSpec>,
}

fn default_runs() -> usize {
    20
}
fn default_sharpness() -> f64 {
    crate::allocate::DEFAULT_SHARPNESS
}
fn default_lower_fraction() -> f64 {
    crate::allocate::DEFAULT_LOWER_BOUND_FRACTION
}
fn default_threshold() -> f64 {
    0.5
}
fn default_population() -> usize {
    20
}
fn default_unit() -> BudgetUnit {
    BudgetUnit::Evaluations
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Corpus root; relative paths resolve against the config file's directory.
    pub corpus: PathBuf,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_unit")]
    pub unit: BudgetUnit,
    /// Total budget per program is this factor times its class count.
    pub per_class_factor: f64,
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
    #[serde(default = "default_lower_fraction")]
    pub lower_bound_fraction: f64,
    /// Absolute per-class lower bound; overrides the fraction when set.
    #[serde(default)]
    pub lower_bound: Option<f64>,
    #[serde(default = "default_threshold")]
    pub buggy_threshold: f64,
    #[serde(default = "default_population")]
    pub population_size: usize,
    /// Restrict the experiment to these program names.
    #[serde(default)]
    pub programs: Option<Vec<String>>,
    #[serde(rename = "approach")]
    pub approaches: Vec<ApproachConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if cfg.corpus.is_relative() {
            cfg.corpus = base_dir.join(&cfg.corpus);
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn approach(&self, name: &str) -> Option<&ApproachConfig> {
        self.approaches.iter().find(|a| a.name == name)
    }

    /// Structural checks; budget feasibility is checked per program.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !(self.per_class_factor > 0.0 && self.per_class_factor.is_finite()) {
            return bad("per_class_factor must be positive".into());
        }
        if self.approaches.is_empty() {
            return bad("no approaches configured".into());
        }
        if !(0.0..=1.0).contains(&self.buggy_threshold) {
            return bad("buggy_threshold must lie in [0, 1]".into());
        }
        if self.lower_bound_fraction < 0.0 || self.lower_bound.is_some_and(|b| b < 0.0) {
            return bad("lower bound must be non-negative".into());
        }
        let mut names = BTreeSet::new();
        for a in &self.approaches {
            if !names.insert(&a.name) {
                return bad(format!("duplicate approach name `{}`", a.name));
            }
            if a.name.contains([',', '\n', '"']) {
                return bad(format!("approach name `{}` contains a reserved character", a.name));
            }
            if a.kind.uses_class_scores() && a.class_predictor.is_none() {
                return bad(format!("approach `{}` needs a class_predictor", a.name));
            }
            if a.kind.uses_method_scores() && a.method_predictor.is_none() {
                return bad(format!("approach `{}` needs a method_predictor", a.name));
            }
            if matches!(a.method_predictor, Some(PredictorSpec::Twr { .. })) {
                return bad(format!("approach `{}`: TWR scores classes, not methods", a.name));
            }
            for p in [&a.class_predictor, &a.method_predictor].into_iter().flatten() {
                if let PredictorSpec::Simulated { mcc } = p {
                    if !(-1.0..=1.0).contains(mcc) {
                        return bad(format!("approach `{}`: MCC {mcc} outside [-1, 1]", a.name));
                    }
                }
            }
        }
        Ok(())
    }

    /// Total budget `T` for a program with `classes` classes.
    pub fn total_budget(&self, classes: usize) -> f64 {
        let t = self.per_class_factor * classes as f64;
        match self.unit {
            BudgetUnit::Evaluations => t.floor(),
            BudgetUnit::Seconds => t,
        }
    }

    pub fn lower_bound_for(&self, classes: usize) -> f64 {
        self.lower_bound.unwrap_or_else(|| {
            crate::allocate::default_lower_bound(
                self.unit,
                self.total_budget(classes),
                classes,
                self.lower_bound_fraction,
            )
        })
    }
}

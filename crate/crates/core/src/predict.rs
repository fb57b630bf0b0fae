//! Defect predictors: MCC-targeted simulation, time-weighted risk over
//! commit histories, and the score/label conventions shared by both.

use crate::corpus::HistoryRecord;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Units with a score at or above this are labeled defective.
pub const LABEL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("cannot simulate a predictor with {defective} defective of {units} units")]
    Degenerate { units: usize, defective: usize },
    #[error("target MCC {0} outside [-1, 1]")]
    InvalidTarget(f64),
    #[error("ground truth names unknown unit `{0}`")]
    UnknownUnit(String),
    #[error("TWR weights must be non-negative and sum to 1")]
    InvalidWeights,
    #[error("history event for `{class}` at {ts} is later than now ({now})")]
    FutureEvent { class: String, ts: i64, now: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(m: &ConfusionMatrix) -> Result<f64, PredictError> {
    if m.total() == 0 {
        return Err(PredictError::EmptyMatrix);
    }
    let (tp, fp, tn, fn_) = (m.tp as f64, m.fp as f64, m.tn as f64, m.fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((tp * tn - fp * fn_) / denom.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Class,
    Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Defective,
    Clean,
}

impl Label {
    pub fn of_score(score: f64) -> Label {
        if score >= LABEL_THRESHOLD {
            Label::Defective
        } else {
            Label::Clean
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorOutput {
    pub level: Level,
    /// Units in ground-truth order.
    pub units: Vec<String>,
    pub scores: BTreeMap<String, f64>,
    pub labels: BTreeMap<String, Label>,
    pub realized: ConfusionMatrix,
    /// `None` for predictors that are not MCC-targeted (ideal, TWR).
    pub target_mcc: Option<f64>,
    pub seed: u64,
}

impl PredictorOutput {
    pub fn realized_mcc(&self) -> f64 {
        mcc(&self.realized).unwrap_or(0.0)
    }

    /// Build an output from raw scores, deriving labels by threshold and the
    /// confusion matrix against the given ground truth.
    pub fn from_scores(
        level: Level,
        units: &[String],
        scores: BTreeMap<String, f64>,
        defective: &BTreeSet<String>,
        target_mcc: Option<f64>,
        seed: u64,
    ) -> PredictorOutput {
        let labels: BTreeMap<String, Label> = units
            .iter()
            .map(|u| (u.clone(), Label::of_score(scores.get(u).copied().unwrap_or(0.0))))
            .collect();
        let realized = confusion(units, &labels, defective);
        PredictorOutput {
            level,
            units: units.to_vec(),
            scores,
            labels,
            realized,
            target_mcc,
            seed,
        }
    }
}

fn confusion(units: &[String], labels: &BTreeMap<String, Label>, defective: &BTreeSet<String>) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for u in units {
        match (defective.contains(u), labels[u]) {
            (true, Label::Defective) => m.tp += 1,
            (true, Label::Clean) => m.fn_ += 1,
            (false, Label::Defective) => m.fp += 1,
            (false, Label::Clean) => m.tn += 1,
        }
    }
    m
}

/// The (fp, fn) pair whose confusion matrix has MCC closest to `target`,
/// for `units` units of which `defective` are truly defective. Ties prefer
/// fewer mislabels, then a balanced split, then fewer false positives.
pub fn closest_confusion(units: usize, defective: usize, target: f64) -> ConfusionMatrix {
    let (n, d) = (units as u64, defective as u64);
    let mut best: Option<(f64, ConfusionMatrix)> = None;
    for fp in 0..=(n - d) {
        for fn_ in 0..=d {
            let m = ConfusionMatrix {
                tp: d - fn_,
                fp,
                tn: n - d - fp,
                fn_,
            };
            let err = (mcc(&m).unwrap_or(0.0) - target).abs();
            let better = match &best {
                None => true,
                Some((best_err, b)) => {
                    if (err - best_err).abs() > 1e-12 {
                        err < *best_err
                    } else {
                        let key = |m: &ConfusionMatrix| (m.fp + m.fn_, m.fp.abs_diff(m.fn_), m.fp);
                        key(&m) < key(b)
                    }
                }
            };
            if better {
                best = Some((err, m));
            }
        }
    }
    best.expect("scan covers at least one matrix").1
}

/// Simulate a predictor whose labels reach (as closely as an integer
/// confusion matrix allows) the target MCC against `defective`.
pub fn simulate_predictor(
    level: Level,
    units: &[String],
    defective: &BTreeSet<String>,
    target_mcc: f64,
    seed: u64,
) -> Result<PredictorOutput, PredictError> {
    if !(-1.0..=1.0).contains(&target_mcc) {
        return Err(PredictError::InvalidTarget(target_mcc));
    }
    if let Some(u) = defective.iter().find(|u| !units.contains(u)) {
        return Err(PredictError::UnknownUnit(u.clone()));
    }
    let d = defective.len();
    if d == 0 || d == units.len() {
        return Err(PredictError::Degenerate {
            units: units.len(),
            defective: d,
        });
    }
    let m = closest_confusion(units.len(), d, target_mcc);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<&String> = units.iter().filter(|u| defective.contains(*u)).collect();
    let mut neg: Vec<&String> = units.iter().filter(|u| !defective.contains(*u)).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let flipped: BTreeSet<&String> = pos[..m.fn_ as usize]
        .iter()
        .chain(&neg[..m.fp as usize])
        .copied()
        .collect();

    let labels: Vec<(String, Label)> = units
        .iter()
        .map(|u| {
            let truth = defective.contains(u);
            let predicted = truth != flipped.contains(u);
            (u.clone(), if predicted { Label::Defective } else { Label::Clean })
        })
        .collect();
    let scores = assign_scores(&labels, seed ^ 0x5c0e_5eed);
    let out = PredictorOutput::from_scores(level, units, scores, defective, Some(target_mcc), seed);
    debug_assert_eq!(out.realized, m);
    Ok(out)
}

/// Perfect predictor: labels equal ground truth, scores follow the usual
/// label-conditioned ranges. Valid for any number of defective units.
pub fn ideal_predictor(level: Level, units: &[String], defective: &BTreeSet<String>, seed: u64) -> PredictorOutput {
    let labels: Vec<(String, Label)> = units
        .iter()
        .map(|u| {
            let l = if defective.contains(u) {
                Label::Defective
            } else {
                Label::Clean
            };
            (u.clone(), l)
        })
        .collect();
    let scores = assign_scores(&labels, seed ^ 0x5c0e_5eed);
    PredictorOutput::from_scores(level, units, scores, defective, None, seed)
}

/// Defective units draw from [0.5, 1.0], clean units from [0.0, 0.5).
pub fn assign_scores(labels: &[(String, Label)], seed: u64) -> BTreeMap<String, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .map(|(u, l)| {
            let s = match l {
                Label::Defective => rng.random_range(0.5..=1.0),
                Label::Clean => rng.random_range(0.0..0.5),
            };
            (u.clone(), s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwrWeights {
    pub revisions: f64,
    pub fixes: f64,
    pub authors: f64,
}

impl Default for TwrWeights {
    fn default() -> Self {
        TwrWeights {
            revisions: 0.25,
            fixes: 0.5,
            authors: 0.25,
        }
    }
}

/// Logistic recency weight of an event at normalized time `t` (1 = now).
pub fn twr_weight(t: f64) -> f64 {
    1.0 / (1.0 + (-12.0 * t + 12.0).exp())
}

/// Weighted time-weighted-risk sum per class before project normalization.
pub fn twr_raw(
    classes: &[String],
    history: &[HistoryRecord],
    now: i64,
    weights: TwrWeights,
) -> Result<BTreeMap<String, f64>, PredictError> {
    let w = [weights.revisions, weights.fixes, weights.authors];
    if w.iter().any(|x| *x < 0.0 || !x.is_finite()) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(PredictError::InvalidWeights);
    }
    if let Some(e) = history.iter().find(|e| e.ts > now) {
        return Err(PredictError::FutureEvent {
            class: e.class.clone(),
            ts: e.ts,
            now,
        });
    }
    let mut raw: BTreeMap<String, f64> = classes.iter().map(|c| (c.clone(), 0.0)).collect();
    let Some(start) = history.iter().map(|e| e.ts).min() else {
        return Ok(raw);
    };
    let span = (now - start) as f64;
    let t_norm = |ts: i64| if span > 0.0 { (ts - start) as f64 / span } else { 1.0 };

    // Latest event per (class, author) stands for that author's activity.
    let mut latest_by_author: BTreeMap<(&str, &str), i64> = BTreeMap::new();
    for e in history {
        let weight = twr_weight(t_norm(e.ts));
        if let Some(score) = raw.get_mut(&e.class) {
            *score += weights.revisions * weight;
            if e.fix {
                *score += weights.fixes * weight;
            }
        }
        let slot = latest_by_author.entry((&e.class, &e.author)).or_insert(e.ts);
        *slot = (*slot).max(e.ts);
    }
    for ((class, _), ts) in latest_by_author {
        if let Some(score) = raw.get_mut(class) {
            *score += weights.authors * twr_weight(t_norm(ts));
        }
    }
    Ok(raw)
}

/// Per-class defect scores in [0, 1]: the time-weighted risk sums divided
/// by the project maximum. An empty history scores every class 0.
pub fn twr_scores(
    classes: &[String],
    history: &[HistoryRecord],
    now: i64,
    weights: TwrWeights,
) -> Result<BTreeMap<String, f64>, PredictError> {
    let raw = twr_raw(classes, history, now, weights)?;
    let max = raw.values().copied().fold(0.0, f64::max);
    Ok(raw
        .into_iter()
        .map(|(c, v)| (c, if max > 0.0 { v / max } else { 0.0 }))
        .collect())
}

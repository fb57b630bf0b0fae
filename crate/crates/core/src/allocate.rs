//! Budget allocation over classes from defect scores: every class receives a
//! floor, and the surplus is split by a softmax of the scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SHARPNESS: f64 = 6.0;
pub const DEFAULT_LOWER_BOUND_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocError {
    #[error("no classes to allocate to")]
    Empty,
    #[error("total budget {total} is below {classes} x lower bound {lower_bound}")]
    Infeasible {
        total: f64,
        classes: usize,
        lower_bound: f64,
    },
    #[error("sharpness must be positive and finite, got {0}")]
    Sharpness(f64),
    #[error("score for `{0}` is not in [0, 1]")]
    Score(String),
    #[error("evaluation budgets must be whole numbers (total {total}, lower bound {lower_bound})")]
    Fractional { total: f64, lower_bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetUnit {
    /// Fitness evaluations (one per executed test); deterministic.
    Evaluations,
    /// Wall-clock seconds.
    Seconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassBudget {
    pub class: String,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub unit: BudgetUnit,
    pub total: f64,
    pub lower_bound: f64,
    pub sharpness: f64,
    /// One entry per class, in the order the scores were given.
    pub per_class: Vec<ClassBudget>,
}

impl BudgetPlan {
    pub fn get(&self, class: &str) -> Option<f64> {
        self.per_class.iter().find(|c| c.class == class).map(|c| c.budget)
    }

    pub fn sum(&self) -> f64 {
        self.per_class.iter().map(|c| c.budget).sum()
    }
}

/// `floor(fraction * total / n)` for evaluations, the unrounded value for seconds.
pub fn default_lower_bound(unit: BudgetUnit, total: f64, classes: usize, fraction: f64) -> f64 {
    let b = fraction * total / classes.max(1) as f64;
    match unit {
        BudgetUnit::Evaluations => b.floor(),
        BudgetUnit::Seconds => b,
    }
}

fn check(scores: &[(String, f64)], total: f64, lower_bound: f64, sharpness: f64) -> Result<(), AllocError> {
    if scores.is_empty() {
        return Err(AllocError::Empty);
    }
    if !(sharpness > 0.0 && sharpness.is_finite()) {
        return Err(AllocError::Sharpness(sharpness));
    }
    if let Some((c, _)) = scores.iter().find(|(_, s)| !(0.0..=1.0).contains(s)) {
        return Err(AllocError::Score(c.clone()));
    }
    if lower_bound < 0.0 || total < scores.len() as f64 * lower_bound {
        return Err(AllocError::Infeasible {
            total,
            classes: scores.len(),
            lower_bound,
        });
    }
    Ok(())
}

/// Real-valued shares `b_min + (T - N b_min) * softmax(k s)_i`.
pub fn allocate_shares(
    scores: &[(String, f64)],
    total: f64,
    lower_bound: f64,
    sharpness: f64,
) -> Result<Vec<f64>, AllocError> {
    check(scores, total, lower_bound, sharpness)?;
    let surplus = total - scores.len() as f64 * lower_bound;
    let max = scores.iter().map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|(_, s)| (sharpness * (s - max)).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.iter().map(|e| lower_bound + surplus * e / z).collect())
}

/// Allocate `total` budget units over the scored classes. In evaluation
/// units each share is floored and the leftover units go one at a time to
/// the highest-scoring classes (earlier classes first on equal scores).
pub fn allocate_budget(
    scores: &[(String, f64)],
    total: f64,
    lower_bound: f64,
    sharpness: f64,
    unit: BudgetUnit,
) -> Result<BudgetPlan, AllocError> {
    if unit == BudgetUnit::Evaluations && (total.fract() != 0.0 || lower_bound.fract() != 0.0) {
        return Err(AllocError::Fractional { total, lower_bound });
    }
    let shares = allocate_shares(scores, total, lower_bound, sharpness)?;
    let budgets = match unit {
        BudgetUnit::Seconds => shares,
        BudgetUnit::Evaluations => round_shares(scores, &shares, total as i64, lower_bound as i64),
    };
    Ok(BudgetPlan {
        unit,
        total,
        lower_bound,
        sharpness,
        per_class: scores
            .iter()
            .zip(budgets)
            .map(|((class, _), budget)| ClassBudget {
                class: class.clone(),
                budget,
            })
            .collect(),
    })
}

fn round_shares(scores: &[(String, f64)], shares: &[f64], total: i64, lower_bound: i64) -> Vec<f64> {
    let mut units: Vec<i64> = shares.iter().map(|s| (s.floor() as i64).max(lower_bound)).collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].1.total_cmp(&scores[a].1).then(a.cmp(&b)));
    let mut left = total - units.iter().sum::<i64>();
    // Floating error can overshoot by a unit; take it back from the lowest.
    while left < 0 {
        for &i in order.iter().rev() {
            if left < 0 && units[i] > lower_bound {
                units[i] -= 1;
                left += 1;
            }
        }
    }
    let mut cursor = order.iter().cycle();
    while left > 0 {
        units[*cursor.next().expect("non-empty")] += 1;
        left -= 1;
    }
    units.into_iter().map(|u| u as f64).collect()
}

/// Fixed allocation: every class gets the same share of `total`.
pub fn uniform_plan(classes: &[String], total: f64, unit: BudgetUnit) -> Result<BudgetPlan, AllocError> {
    let scores: Vec<(String, f64)> = classes.iter().map(|c| (c.clone(), 0.0)).collect();
    allocate_budget(&scores, total, 0.0, DEFAULT_SHARPNESS, unit)
}

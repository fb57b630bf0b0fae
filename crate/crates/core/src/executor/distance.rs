use crate::minilang::Comparator;

/// Constant added when a predicate misses its desired outcome by "one step".
pub const K: f64 = 1.0;

/// Distance from `lhs cmp rhs` evaluating to `desired`. Operands are widened
/// so the distance reflects numeric proximity rather than wrapped values.
pub fn branch_distance(cmp: Comparator, lhs: i64, rhs: i64, desired: bool) -> f64 {
    let (a, b) = (lhs as i128, rhs as i128);
    let d: i128 = match (cmp, desired) {
        (Comparator::Eq, true) | (Comparator::Ne, false) => (a - b).abs(),
        (Comparator::Eq, false) | (Comparator::Ne, true) => {
            return if a == b { K } else { 0.0 };
        }
        (Comparator::Lt, true) | (Comparator::Ge, false) => {
            return if a < b { 0.0 } else { (a - b) as f64 + K };
        }
        (Comparator::Le, true) | (Comparator::Gt, false) => (a - b).max(0),
        (Comparator::Gt, true) | (Comparator::Le, false) => {
            return if a > b { 0.0 } else { (b - a) as f64 + K };
        }
        (Comparator::Ge, true) | (Comparator::Lt, false) => (b - a).max(0),
    };
    d as f64
}

/// Map a raw distance into `[0, 1)`.
pub fn normalize(d: f64) -> f64 {
    d / (d + 1.0)
}

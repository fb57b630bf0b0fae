//! Rank statistics for comparing stochastic approaches.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const ALPHA: f64 = 0.05;

/// Largest combined sample size for which exact p-values are computed.
pub const EXACT_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("run matrices cover different bugs")]
    MismatchedUniverse,
    #[error("bug `{bug}` has {got} runs, expected {expected}")]
    RunCount { bug: String, got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-tailed p-value.
    pub p: f64,
    pub exact: bool,
}

/// Mid-ranks (1-based) of the pooled sample, plus the tie groups' sizes.
fn pooled_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut pooled: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for item in &pooled[i..=j] {
            ranks[item.1] = mid;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of arrangements of `na` + `nb` distinct values giving each U.
fn u_counts(na: usize, nb: usize) -> Vec<u128> {
    // c[m][n][u] built incrementally over m (first sample size) and n.
    let max_u = na * nb;
    let mut table = vec![vec![Vec::<u128>::new(); nb + 1]; na + 1];
    for m in 0..=na {
        for n in 0..=nb {
            let mut row = vec![0u128; m * n + 1];
            if m == 0 || n == 0 {
                row[0] = 1;
            } else {
                // Largest value belongs to the first sample (adds n) or the second.
                for (u, slot) in row.iter_mut().enumerate() {
                    let from_a = if u >= n { table[m - 1][n].get(u - n).copied().unwrap_or(0) } else { 0 };
                    let from_b = table[m][n - 1].get(u).copied().unwrap_or(0);
                    *slot = from_a + from_b;
                }
            }
            table[m][n] = row;
        }
    }
    let out = std::mem::take(&mut table[na][nb]);
    debug_assert_eq!(out.len(), max_u + 1);
    out
}

/// Two-tailed Mann-Whitney U test. Exact for small tie-free samples,
/// otherwise the tie- and continuity-corrected normal approximation.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let (na, nb) = (a.len(), b.len());
    let (ranks, ties) = pooled_ranks(a, b);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let tie_free = ties.iter().all(|t| *t == 1);

    if tie_free && na + nb <= EXACT_LIMIT {
        let counts = u_counts(na, nb);
        let total: u128 = counts.iter().sum();
        let u_int = u as usize;
        let lower: u128 = counts[..=u_int].iter().sum();
        let upper: u128 = counts[u_int..].iter().sum();
        let p = (2.0 * lower.min(upper) as f64 / total as f64).min(1.0);
        return Ok(MannWhitney { u, p, exact: true });
    }

    let n = (na + nb) as f64;
    let mu = (na * nb) as f64 / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term);
    if var <= 0.0 {
        return Ok(MannWhitney { u, p: 1.0, exact: false });
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    let p = (2.0 * normal.sf(z)).clamp(0.0, 1.0);
    Ok(MannWhitney { u, p, exact: false })
}

/// Vargha-Delaney effect size: probability that a draw from `a` exceeds
/// one from `b`, counting ties as half.
pub fn a12(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut wins = 0.0;
    for x in a {
        for y in b {
            if x > y {
                wins += 1.0;
            } else if x == y {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (a.len() * b.len()) as f64)
}

/// Per-run bug detections of one approach.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMatrix {
    pub approach: String,
    pub runs: usize,
    pub detections: BTreeMap<String, Vec<bool>>,
}

impl RunMatrix {
    pub fn new(approach: impl Into<String>, runs: usize) -> Self {
        RunMatrix {
            approach: approach.into(),
            runs,
            detections: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, bug: impl Into<String>, runs: Vec<bool>) -> Result<(), StatsError> {
        let bug = bug.into();
        if runs.len() != self.runs {
            return Err(StatsError::RunCount {
                bug,
                got: runs.len(),
                expected: self.runs,
            });
        }
        self.detections.insert(bug, runs);
        Ok(())
    }

    /// Number of bugs detected in each run.
    pub fn bugs_per_run(&self) -> Vec<f64> {
        (0..self.runs)
            .map(|r| self.detections.values().filter(|d| d[r]).count() as f64)
            .collect()
    }

    pub fn detected_ever(&self) -> BTreeSet<String> {
        self.detections
            .iter()
            .filter(|(_, d)| d.iter().any(|x| *x))
            .map(|(b, _)| b.clone())
            .collect()
    }

    /// Per-run detection of one bug as a 0/1 sample.
    pub fn bug_sample(&self, bug: &str) -> Option<Vec<f64>> {
        self.detections
            .get(bug)
            .map(|d| d.iter().map(|x| if *x { 1.0 } else { 0.0 }).collect())
    }

    pub fn total_detections(&self) -> usize {
        self.detections.values().flatten().filter(|x| **x).count()
    }
}

pub fn success_rate(m: &RunMatrix) -> BTreeMap<String, f64> {
    m.detections
        .iter()
        .map(|(bug, d)| {
            let hits = d.iter().filter(|x| **x).count();
            (bug.clone(), if m.runs == 0 { 0.0 } else { hits as f64 / m.runs as f64 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UniqueBugs {
    pub only_a: BTreeSet<String>,
    pub only_b: BTreeSet<String>,
    pub both: BTreeSet<String>,
}

pub fn unique_bugs(a: &RunMatrix, b: &RunMatrix) -> Result<UniqueBugs, StatsError> {
    if !a.detections.keys().eq(b.detections.keys()) {
        return Err(StatsError::MismatchedUniverse);
    }
    let (da, db) = (a.detected_ever(), b.detected_ever());
    Ok(UniqueBugs {
        only_a: da.difference(&db).cloned().collect(),
        only_b: db.difference(&da).cloned().collect(),
        both: da.intersection(&db).cloned().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerate every split of the pooled values into groups of |a| and |b|
    /// and count those with a U at least as extreme as observed.
    fn enumeration_p(a: &[f64], b: &[f64]) -> f64 {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let (n, na) = (pooled.len(), a.len());
        let u_of = |mask: u32| {
            let mut u = 0.0;
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    for j in 0..n {
                        if mask & (1 << j) == 0 && pooled[i] > pooled[j] {
                            u += 1.0;
                        }
                    }
                }
            }
            u
        };
        let observed = u_of((1u32 << na) - 1);
        let mu = (na * (n - na)) as f64 / 2.0;
        let (mut total, mut extreme) = (0u64, 0u64);
        let (mut lo, mut hi) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != na {
                continue;
            }
            total += 1;
            let u = u_of(mask);
            if (u - mu).abs() >= (observed - mu).abs() - 1e-9 {
                extreme += 1;
            }
            if u <= observed {
                lo += 1;
            }
            if u >= observed {
                hi += 1;
            }
        }
        // The null distribution is symmetric, so both readings agree.
        let via_tails = (2.0 * lo.min(hi) as f64 / total as f64).min(1.0);
        assert!((via_tails - extreme as f64 / total as f64).abs() < 1e-12);
        via_tails
    }

    #[test]
    fn separated_triples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.exact);
        assert!((r.p - 0.1).abs() < 1e-12);
        assert!((enumeration_p(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_constant_samples() {
        let r = mann_whitney_u(&[3.0; 5], &[3.0; 5]).unwrap();
        assert_eq!(r.p, 1.0);
        assert_eq!(a12(&[3.0; 5], &[3.0; 5]).unwrap(), 0.5);
    }

    #[test]
    fn disjoint_twenties_are_significant() {
        let a: Vec<f64> = (0..20).map(f64::from).collect();
        let b: Vec<f64> = (100..120).map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!(!r.exact);
        assert!(r.p < 0.05);
        // Subsamples small enough to enumerate agree on the direction.
        let r8 = mann_whitney_u(&a[..4], &b[..4]).unwrap();
        assert!((r8.p - enumeration_p(&a[..4], &b[..4])).abs() < 1e-12);
        assert!(r8.p < 0.05);
    }

    #[test]
    fn approximation_tracks_enumeration_near_cutoff() {
        let a = [1.0, 4.0, 5.0, 9.0, 10.0, 12.0, 13.0, 15.0];
        let b = [2.0, 3.0, 6.0, 7.0, 8.0, 11.0, 14.0, 16.0, 17.0];
        let exact = enumeration_p(&a, &b);
        // Introduce a harmless tie to force the approximate path.
        let mut b2 = b;
        b2[0] = 1.0;
        let approx = mann_whitney_u(&a, &b2).unwrap();
        assert!(!approx.exact);
        assert!((approx.p - exact).abs() < 0.1, "{} vs {exact}", approx.p);
    }

    #[test]
    fn empty_samples_error() {
        assert_eq!(mann_whitney_u(&[], &[1.0]), Err(StatsError::EmptySample));
        assert_eq!(a12(&[1.0], &[]), Err(StatsError::EmptySample));
    }

    #[test]
    fn a12_reference_values() {
        assert_eq!(a12(&[5.0, 6.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(a12(&[1.0, 2.0], &[1.0, 3.0]).unwrap(), 0.375);
    }

    fn matrix(name: &str, rows: &[(&str, &[bool])]) -> RunMatrix {
        let mut m = RunMatrix::new(name, rows[0].1.len());
        for (bug, d) in rows {
            m.insert(*bug, d.to_vec()).unwrap();
        }
        m
    }

    #[test]
    fn unique_bug_sets() {
        let a = matrix("a", &[("x", &[false, true]), ("y", &[false, false]), ("z", &[true, true])]);
        let b = matrix("b", &[("x", &[false, false]), ("y", &[true, false]), ("z", &[true, false])]);
        let u = unique_bugs(&a, &b).unwrap();
        assert_eq!(u.only_a, BTreeSet::from(["x".to_string()]));
        assert_eq!(u.only_b, BTreeSet::from(["y".to_string()]));
        assert_eq!(u.both, BTreeSet::from(["z".to_string()]));
        let same = unique_bugs(&a, &a).unwrap();
        assert!(same.only_a.is_empty() && same.only_b.is_empty());

        let c = matrix("c", &[("x", &[true]), ("y", &[false])]);
        let d = matrix("d", &[("x", &[false]), ("y", &[true])]);
        assert!(unique_bugs(&c, &d).unwrap().both.is_empty());
        let e = matrix("e", &[("x", &[true])]);
        assert_eq!(unique_bugs(&c, &e), Err(StatsError::MismatchedUniverse));
    }

    #[test]
    fn success_rates_and_counts() {
        let thirteen: Vec<bool> = (0..20).map(|i| i < 13).collect();
        let mut m = RunMatrix::new("a", 20);
        m.insert("always", vec![true; 20]).unwrap();
        m.insert("never", vec![false; 20]).unwrap();
        m.insert("some", thirteen).unwrap();
        let r = success_rate(&m);
        assert_eq!((r["always"], r["never"], r["some"]), (1.0, 0.0, 0.65));
        assert_eq!(m.bugs_per_run()[0], 2.0);
        assert_eq!(m.bugs_per_run()[19], 1.0);
        assert!(matches!(m.insert("bad", vec![true]), Err(StatsError::RunCount { .. })));
    }

    fn distinct_split() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..=10)
            .prop_flat_map(|n| {
                let v: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - 3.0).collect();
                (Just(v).prop_shuffle(), 1..n)
            })
            .prop_map(|(v, na)| (v[..na].to_vec(), v[na..].to_vec()))
    }

    proptest! {
        #[test]
        fn exact_path_matches_enumeration((a, b) in distinct_split()) {
            let r = mann_whitney_u(&a, &b).unwrap();
            prop_assert!(r.exact);
            prop_assert!((r.p - enumeration_p(&a, &b)).abs() < 1e-12);
            let rev = mann_whitney_u(&b, &a).unwrap();
            prop_assert!((r.p - rev.p).abs() < 1e-12);
        }

        #[test]
        fn a12_identities(
            a in proptest::collection::vec(-5i32..5, 1..15),
            b in proptest::collection::vec(-5i32..5, 1..15),
        ) {
            let fa: Vec<f64> = a.iter().map(|x| *x as f64).collect();
            let fb: Vec<f64> = b.iter().map(|x| *x as f64).collect();
            let ab = a12(&fa, &fb).unwrap();
            prop_assert!((ab + a12(&fb, &fa).unwrap() - 1.0).abs() < 1e-12);
            prop_assert_eq!(a12(&fa, &fa).unwrap(), 0.5);
            let ta: Vec<f64> = fa.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            let tb: Vec<f64> = fb.iter().map(|x| x.powi(3) + 2.0 * x).collect();
            prop_assert_eq!(a12(&ta, &tb).unwrap(), ab);
            let p1 = mann_whitney_u(&fa, &fb).unwrap().p;
            let p2 = mann_whitney_u(&fb, &fa).unwrap().p;
            prop_assert!((p1 - p2).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&p1));
        }
    }
}

//! Preference sorting over per-target objective vectors (lower is better).
//!
//! Inputs are one objective vector per individual, all of equal length, plus
//! a size per individual used to break ties between equally fit candidates.

/// `a` dominates `b`: no worse everywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Index of the best individual for objective `j` among `pool`: lowest
/// value, then smallest size, then earliest index.
fn best_for(objectives: &[Vec<f64>], sizes: &[u128], pool: &[usize], j: usize) -> Option<usize> {
    pool.iter().copied().min_by(|&a, &b| {
        objectives[a][j]
            .total_cmp(&objectives[b][j])
            .then(sizes[a].cmp(&sizes[b]))
            .then(a.cmp(&b))
    })
}

/// Fast non-dominated sorting of `pool`; fronts list indices ascending.
pub fn non_dominated_fronts(objectives: &[Vec<f64>], pool: &[usize]) -> Vec<Vec<usize>> {
    let n = pool.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&objectives[pool[i]], &objectives[pool[j]]);
            if dominates(a, b) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(b, a) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        let mut front: Vec<usize> = current.iter().map(|&i| pool[i]).collect();
        front.sort_unstable();
        fronts.push(front);
        next.sort_unstable();
        current = next;
    }
    fronts
}

fn minima_front(objectives: &[Vec<f64>], sizes: &[u128], pool: &[usize], targets: &[usize]) -> Vec<usize> {
    let mut front: Vec<usize> = targets.iter().filter_map(|&j| best_for(objectives, sizes, pool, j)).collect();
    front.sort_unstable();
    front.dedup();
    front
}

fn assemble(objectives: &[Vec<f64>], n: usize, head: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let mut placed = vec![false; n];
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    for f in head.into_iter().filter(|f| !f.is_empty()) {
        for &i in &f {
            placed[i] = true;
        }
        fronts.push(f);
    }
    let rest: Vec<usize> = (0..n).filter(|&i| !placed[i]).collect();
    fronts.extend(non_dominated_fronts(objectives, &rest));
    fronts
}

/// First front: for each objective, the individual minimizing it. The
/// remaining individuals are ranked by non-dominated sorting. With no
/// objectives the whole population forms a single front in index order.
pub fn preference_sort(objectives: &[Vec<f64>], sizes: &[u128]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let m = objectives.first().map_or(0, Vec::len);
    if n == 0 {
        return Vec::new();
    }
    if m == 0 {
        return vec![(0..n).collect()];
    }
    let all: Vec<usize> = (0..n).collect();
    let head = minima_front(objectives, sizes, &all, &(0..m).collect::<Vec<_>>());
    assemble(objectives, n, vec![head])
}

/// Like [`preference_sort`], but the minima for objectives flagged in
/// `buggy` form the first front and the minima for the other objectives
/// (among individuals not yet placed) the second.
pub fn defect_aware_preference_sort(objectives: &[Vec<f64>], sizes: &[u128], buggy: &[bool]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let m = objectives.first().map_or(0, Vec::len);
    if n == 0 {
        return Vec::new();
    }
    if m == 0 {
        return vec![(0..n).collect()];
    }
    let all: Vec<usize> = (0..n).collect();
    let (hot, cold): (Vec<usize>, Vec<usize>) = (0..m).partition(|&j| buggy.get(j).copied().unwrap_or(false));
    let first = minima_front(objectives, sizes, &all, &hot);
    let remaining: Vec<usize> = all.iter().copied().filter(|i| !first.contains(i)).collect();
    let second = minima_front(objectives, sizes, &remaining, &cold);
    assemble(objectives, n, vec![first, second])
}

/// Crowding distance of each member of `front` (same order), normalizing
/// every objective by its range within the front.
#[allow(clippy::needless_range_loop)]
pub fn crowding_distance(objectives: &[Vec<f64>], front: &[usize]) -> Vec<f64> {
    let k = front.len();
    let mut dist = vec![0.0; k];
    if k <= 2 {
        return vec![f64::INFINITY; k];
    }
    let m = objectives[front[0]].len();
    let mut order: Vec<usize> = (0..k).collect();
    for j in 0..m {
        order.sort_by(|&a, &b| objectives[front[a]][j].total_cmp(&objectives[front[b]][j]).then(a.cmp(&b)));
        let lo = objectives[front[order[0]]][j];
        let hi = objectives[front[order[k - 1]]][j];
        dist[order[0]] = f64::INFINITY;
        dist[order[k - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..k - 1 {
                let gap = objectives[front[order[w + 1]]][j] - objectives[front[order[w - 1]]][j];
                dist[order[w]] += gap / (hi - lo);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_built_four() {
        let obj = vec![vec![0.2, 0.9], vec![0.9, 0.2], vec![0.5, 0.5], vec![0.6, 0.6]];
        let fronts = preference_sort(&obj, &[0; 4]);
        assert_eq!(fronts, vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn single_target_unique_minimum() {
        let obj = vec![vec![0.4], vec![0.1], vec![0.3]];
        assert_eq!(preference_sort(&obj, &[0; 3])[0], vec![1]);
    }

    #[test]
    fn ties_prefer_smaller_then_older() {
        let obj = vec![vec![0.1], vec![0.1], vec![0.1]];
        assert_eq!(preference_sort(&obj, &[5, 2, 2])[0], vec![1]);
    }

    #[test]
    fn no_objectives_single_front() {
        let obj = vec![vec![], vec![], vec![]];
        assert_eq!(preference_sort(&obj, &[0; 3]), vec![vec![0, 1, 2]]);
        assert_eq!(defect_aware_preference_sort(&obj, &[0; 3], &[]), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn buggy_minimum_comes_first() {
        let obj = vec![vec![0.9, 0.1], vec![0.1, 0.9], vec![0.5, 0.5]];
        let f = defect_aware_preference_sort(&obj, &[0; 3], &[true, false]);
        assert_eq!(f, vec![vec![1], vec![0], vec![2]]);
        assert_eq!(preference_sort(&obj, &[0; 3]), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn crowding_extremes_are_infinite() {
        let obj = vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0], vec![0.25, 0.75]];
        let d = crowding_distance(&obj, &[0, 1, 2, 3]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - 1.5).abs() < 1e-12, "{d:?}");
        assert!((d[3] - 1.0).abs() < 1e-12, "{d:?}");
    }

    fn population() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u128>, Vec<bool>)> {
        (1usize..=30, 1usize..=6).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(0u8..6, m), n)
                    .prop_map(|v| v.into_iter().map(|r| r.into_iter().map(|x| x as f64 / 4.0).collect()).collect()),
                proptest::collection::vec(0u128..4, n),
                proptest::collection::vec(any::<bool>(), m),
            )
        })
    }

    proptest! {
        #[test]
        fn fronts_partition_and_respect_dominance((obj, sizes, _b) in population()) {
            let fronts = preference_sort(&obj, &sizes);
            let mut seen: Vec<usize> = fronts.iter().flatten().copied().collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..obj.len()).collect::<Vec<_>>());
            for j in 0..obj[0].len() {
                let min = obj.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min);
                prop_assert!(fronts[0].iter().any(|&i| obj[i][j] == min));
            }
            for f in &fronts[1..] {
                for &a in f {
                    for &b in f {
                        prop_assert!(!dominates(&obj[a], &obj[b]));
                    }
                }
            }
        }

        #[test]
        fn defect_aware_reductions((obj, sizes, buggy) in population()) {
            let base = preference_sort(&obj, &sizes);
            let m = obj[0].len();
            prop_assert_eq!(&defect_aware_preference_sort(&obj, &sizes, &vec![false; m]), &base);
            prop_assert_eq!(&defect_aware_preference_sort(&obj, &sizes, &vec![true; m]), &base);
            let mixed = defect_aware_preference_sort(&obj, &sizes, &buggy);
            let count: usize = mixed.iter().map(Vec::len).sum();
            prop_assert_eq!(count, obj.len());
        }
    }
}

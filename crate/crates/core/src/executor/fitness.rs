use super::distance::normalize;
use super::interp::ExecutionTrace;
use crate::minilang::{BranchTarget, ControlDependencyGraph, Polarity, SiteId, TargetId};

pub(crate) fn split(target: TargetId) -> (SiteId, Polarity) {
    let polarity = if target.is_multiple_of(2) {
        Polarity::True
    } else {
        Polarity::False
    };
    ((target / 2) as SiteId, polarity)
}

/// Approach level plus normalized branch distance at the nearest executed
/// predicate on the target's control-dependency chain. Zero iff covered.
pub fn target_fitness(trace: &ExecutionTrace, target: &BranchTarget, cdg: &ControlDependencyGraph) -> f64 {
    fitness_along(trace, &cdg.chain(target.id))
}

/// Same as [`target_fitness`] with the chain (target first, then its
/// ancestors) precomputed.
pub fn fitness_along(trace: &ExecutionTrace, chain: &[TargetId]) -> f64 {
    if trace.covered.contains(&chain[0]) {
        return 0.0;
    }
    for (level, &t) in chain.iter().enumerate() {
        let (site, polarity) = split(t);
        if let Some(rec) = trace.predicates.get(&site) {
            let d = if trace.covered.contains(&t) {
                0.0
            } else {
                rec.distance(polarity)
            };
            return level as f64 + normalize(d);
        }
    }
    chain.len() as f64
}

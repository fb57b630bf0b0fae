//! Branch coverage targets and the control-dependency forest over them.

use super::ast::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type TargetId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    True,
    False,
}

impl Polarity {
    pub fn of(outcome: bool) -> Polarity {
        if outcome {
            Polarity::True
        } else {
            Polarity::False
        }
    }

    pub fn as_bool(self) -> bool {
        self == Polarity::True
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchTarget {
    pub id: TargetId,
    pub method: MethodRef,
    pub site: SiteId,
    pub polarity: Polarity,
    pub parent: Option<TargetId>,
    /// Human-readable key, e.g. `MathUtils.gcd:s0:T`.
    pub label: String,
}

impl BranchTarget {
    /// Targets are numbered so that each site owns two consecutive ids.
    pub fn id_for(site: SiteId, polarity: Polarity) -> TargetId {
        2 * site as usize + (polarity == Polarity::False) as usize
    }
}

/// All branch targets of a program in source order, true-side first.
pub fn enumerate_targets(program: &Program) -> Vec<BranchTarget> {
    let mut out = Vec::new();
    for (ci, class) in program.classes.iter().enumerate() {
        for (mi, method) in class.methods.iter().enumerate() {
            let mref = MethodRef { class: ci, method: mi };
            let prefix = format!("{}.{}", class.name, method.name);
            walk(&method.body, None, mref, &prefix, &mut out);
        }
    }
    debug_assert!(out.iter().enumerate().all(|(i, t)| t.id == i));
    out
}

fn walk(
    block: &[Stmt],
    parent: Option<TargetId>,
    method: MethodRef,
    prefix: &str,
    out: &mut Vec<BranchTarget>,
) {
    for s in block {
        let (site, children): (SiteId, [(Polarity, Option<&[Stmt]>); 2]) = match s {
            Stmt::If {
                site,
                then_block,
                else_block,
                ..
            } => (
                *site,
                [
                    (Polarity::True, Some(then_block.as_slice())),
                    (Polarity::False, else_block.as_deref()),
                ],
            ),
            Stmt::While { site, body, .. } => (
                *site,
                [(Polarity::True, Some(body.as_slice())), (Polarity::False, None)],
            ),
            _ => continue,
        };
        for (polarity, _) in &children {
            let tag = if polarity.as_bool() { "T" } else { "F" };
            out.push(BranchTarget {
                id: BranchTarget::id_for(site, *polarity),
                method,
                site,
                polarity: *polarity,
                parent,
                label: format!("{prefix}:s{site}:{tag}"),
            });
        }
        for (polarity, body) in children {
            if let Some(body) = body {
                walk(body, Some(BranchTarget::id_for(site, polarity)), method, prefix, out);
            }
        }
    }
}

/// Control dependencies among the targets of one method: each target points
/// at the side of its nearest enclosing conditional.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ControlDependencyGraph {
    pub nodes: Vec<TargetId>,
    pub parents: BTreeMap<TargetId, Option<TargetId>>,
}

impl ControlDependencyGraph {
    pub fn from_targets<'a>(targets: impl IntoIterator<Item = &'a BranchTarget>) -> Self {
        let mut g = ControlDependencyGraph::default();
        for t in targets {
            g.nodes.push(t.id);
            g.parents.insert(t.id, t.parent);
        }
        g
    }

    /// Merge several per-method graphs, e.g. all methods of a class.
    pub fn union<'a>(graphs: impl IntoIterator<Item = &'a ControlDependencyGraph>) -> Self {
        let mut g = ControlDependencyGraph::default();
        for h in graphs {
            g.nodes.extend(&h.nodes);
            g.parents.extend(h.parents.iter().map(|(k, v)| (*k, *v)));
        }
        g
    }

    pub fn contains(&self, t: TargetId) -> bool {
        self.parents.contains_key(&t)
    }

    pub fn parent(&self, t: TargetId) -> Option<TargetId> {
        self.parents.get(&t).copied().flatten()
    }

    pub fn roots(&self) -> Vec<TargetId> {
        self.nodes.iter().copied().filter(|t| self.parent(*t).is_none()).collect()
    }

    pub fn children(&self, t: TargetId) -> Vec<TargetId> {
        self.nodes
            .iter()
            .copied()
            .filter(|c| self.parent(*c) == Some(t))
            .collect()
    }

    /// The target followed by its ancestors, nearest first.
    pub fn chain(&self, t: TargetId) -> Vec<TargetId> {
        let mut out = vec![t];
        let mut cur = t;
        while let Some(p) = self.parent(cur) {
            if out.contains(&p) {
                break;
            }
            out.push(p);
            cur = p;
        }
        out
    }

    /// True when no target reaches itself through parent edges and every
    /// parent is a node of the graph.
    pub fn is_forest(&self) -> bool {
        self.nodes.iter().all(|&t| {
            let mut seen = vec![t];
            let mut cur = t;
            while let Some(p) = self.parent(cur) {
                if seen.contains(&p) || !self.contains(p) {
                    return false;
                }
                seen.push(p);
                cur = p;
            }
            true
        })
    }
}

/// Control-dependency graph of a single method.
pub fn build_cdg(program: &Program, method: MethodRef) -> ControlDependencyGraph {
    // Targets carry their parent already; the graph is the method's slice.
    let targets = enumerate_targets(program);
    ControlDependencyGraph::from_targets(targets.iter().filter(|t| t.method == method))
}

/// Number of conditionals nested at the deepest point of a block.
pub fn nesting_depth(block: &[Stmt]) -> usize {
    block
        .iter()
        .map(|s| match s {
            Stmt::If {
                then_block,
                else_block,
                ..
            } => 1 + nesting_depth(then_block).max(else_block.as_deref().map_or(0, nesting_depth)),
            Stmt::While { body, .. } => 1 + nesting_depth(body),
            _ => 0,
        })
        .max()
        .unwrap_or(0)
}

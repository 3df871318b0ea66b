//! Dependency-graph helpers over the registry's edge map.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::RecordId;

pub(crate) type Edges = BTreeMap<(RecordId, RecordId), f64>;

fn children(edges: &Edges, node: RecordId) -> impl Iterator<Item = RecordId> + '_ {
    edges
        .range((node, RecordId(0))..=(node, RecordId(u64::MAX)))
        .map(|((_, d), _)| *d)
}

/// Whether `to` is reachable from `from` along edges (reflexive).
pub(crate) fn reaches(edges: &Edges, from: RecordId, to: RecordId) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if seen.insert(n) {
            stack.extend(children(edges, n));
        }
    }
    false
}

/// `root` and everything downstream of it, topologically ordered with the
/// smallest ready id first.
pub(crate) fn downstream_order(edges: &Edges, root: RecordId) -> Vec<RecordId> {
    let mut affected = BTreeSet::new();
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        if affected.insert(n) {
            stack.extend(children(edges, n));
        }
    }
    let mut indegree: BTreeMap<RecordId, usize> = affected.iter().map(|n| (*n, 0)).collect();
    for (u, d) in edges.keys() {
        if affected.contains(u) && affected.contains(d) {
            *indegree.get_mut(d).expect("affected") += 1;
        }
    }
    let mut ready: BTreeSet<RecordId> = indegree
        .iter()
        .filter(|(_, deg)| **deg == 0)
        .map(|(n, _)| *n)
        .collect();
    let mut order = Vec::with_capacity(affected.len());
    while let Some(n) = ready.pop_first() {
        order.push(n);
        for c in children(edges, n) {
            let deg = indegree.get_mut(&c).expect("child of affected node");
            *deg -= 1;
            if *deg == 0 {
                ready.insert(c);
            }
        }
    }
    order
}

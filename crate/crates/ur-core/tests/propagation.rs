mod support;

use std::collections::BTreeMap;

use proptest::prelude::*;
use ur_core::lifecycle::{check_timers, EventBody, NewEvent};
use ur_core::model::{Leaf, RecordId, Tick};
use ur_core::policy::Policy;
use ur_core::registry::{Registry, RegistryError};

use support::{draft, reassess, registry_with};

/// Fixed-point iteration over the whole graph: raise every live likelihood
/// to its attenuated upstream maximum until nothing moves.
fn fixed_point(
    nodes: &[(f64, f64)],
    edges: &BTreeMap<(usize, usize), f64>,
    terminal: &[bool],
) -> Vec<f64> {
    let mut lik: Vec<f64> = nodes.iter().map(|n| n.1).collect();
    loop {
        let mut moved = false;
        for d in 0..nodes.len() {
            if terminal[d] {
                continue;
            }
            for ((u, dd), a) in edges {
                if *dd == d {
                    let r = nodes[*u].0 * lik[*u] * a;
                    if r > lik[d] {
                        lik[d] = r;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            return lik;
        }
    }
}

fn reachable(edges: &BTreeMap<(usize, usize), f64>, from: usize, to: usize) -> bool {
    let mut stack = vec![from];
    let mut seen = vec![false; 64];
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if std::mem::replace(&mut seen[n], true) {
            continue;
        }
        stack.extend(edges.keys().filter(|(u, _)| *u == n).map(|(_, d)| *d));
    }
    false
}

fn rid(i: usize) -> RecordId {
    RecordId(i as u64 + 1)
}

fn likelihoods(reg: &Registry, n: usize) -> Vec<f64> {
    (0..n).map(|i| reg.record(rid(i)).unwrap().risk().likelihood).collect()
}

#[derive(Debug, Clone)]
struct Case {
    nodes: Vec<(f64, f64)>,
    links: Vec<(usize, usize, f64)>,
    expire: Vec<bool>,
}

fn case() -> impl Strategy<Value = Case> {
    (2usize..=12).prop_flat_map(|n| {
        (
            prop::collection::vec((0.05f64..1.0, 0.0f64..1.0), n),
            prop::collection::vec((0..n, 0..n, 0.1f64..=1.0), 0..3 * n),
            prop::collection::vec(prop::bool::weighted(0.15), n),
        )
            .prop_map(|(nodes, links, expire)| Case {
                nodes,
                links,
                expire,
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn incremental_flooding_reaches_the_fixed_point(c in case()) {
        let n = c.nodes.len();
        let mut reg = Registry::new(Policy::default());
        for ((s, l), expire) in c.nodes.iter().zip(&c.expire) {
            let mut d = draft(Leaf::Missing, *s, *l);
            d.expiry = expire.then_some(Tick(1));
            reg.append(NewEvent::create(Tick(1), "fixture", d).unwrap()).unwrap();
        }
        for ev in check_timers(reg.records(), Tick(1)) {
            reg.append(ev).unwrap();
        }
        let terminal: Vec<bool> = (0..n).map(|i| reg.record(rid(i)).unwrap().is_terminal()).collect();
        let start = likelihoods(&reg, n);
        let nodes: Vec<(f64, f64)> = c.nodes.iter().zip(&start).map(|((s, _), l)| (*s, *l)).collect();

        let mut edges = BTreeMap::new();
        for (u, d, a) in &c.links {
            let res = reg.link(rid(*u), rid(*d), *a, "fixture");
            let cyclic = reachable(&edges, *d, *u);
            if edges.contains_key(&(*u, *d)) {
                prop_assert!(matches!(res, Err(RegistryError::InvalidEvent(_))));
                continue;
            }
            match res {
                Err(RegistryError::CycleRejected { .. }) => prop_assert!(cyclic),
                Ok(_) => {
                    prop_assert!(!cyclic);
                    edges.insert((*u, *d), *a);
                }
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }
        prop_assert_eq!(likelihoods(&reg, n), fixed_point(&nodes, &edges, &terminal));

        for i in 0..n {
            prop_assert!(reg.propagate(rid(i)).unwrap().is_empty());
        }
    }

    #[test]
    fn raising_a_root_reaches_the_fixed_point(c in case(), root in 0usize..12, lik in 0.0f64..=1.0) {
        let n = c.nodes.len();
        let root = root % n;
        let mut reg = registry_with(&c.nodes);
        let mut edges = BTreeMap::new();
        for (u, d, a) in &c.links {
            if reg.link(rid(*u), rid(*d), *a, "fixture").is_ok() {
                edges.insert((*u, *d), *a);
            }
        }
        reg.append(NewEvent::new(Tick(2), rid(root), "fixture", reassess(None, Some(lik)))).unwrap();
        let after = likelihoods(&reg, n);
        let nodes: Vec<(f64, f64)> = c.nodes.iter().zip(&after).map(|((s, _), l)| (*s, *l)).collect();
        prop_assert_eq!(&after, &fixed_point(&nodes, &edges, &vec![false; n]));
        let log_len = reg.log().len();
        prop_assert!(reg.propagate(rid(root)).unwrap().is_empty());
        prop_assert_eq!(reg.log().len(), log_len);
    }
}

#[test]
fn derived_events_are_tagged_and_replayed_verbatim() {
    let mut reg = registry_with(&[(0.9, 0.8), (0.5, 0.1)]);
    let out = reg.link(RecordId(1), RecordId(2), 0.5, "fixture").unwrap();
    assert_eq!(out.len(), 2);
    match &out[1].event.body {
        EventBody::EvidenceAccumulated {
            derived_from,
            reassessment,
            evidence,
            ..
        } => {
            assert_eq!(*derived_from, Some(RecordId(1)));
            let derived = 0.9 * 0.8 * 0.5;
            assert_eq!(reassessment.unwrap().likelihood, Some(derived));
            assert!((evidence[0].weight - (derived - 0.1)).abs() < 1e-12);
        }
        other => panic!("unexpected {other:?}"),
    }
    let again = Registry::replay(&reg.event_log()).unwrap();
    assert_eq!(again.snapshot().to_canonical(), reg.snapshot().to_canonical());
}

#[test]
fn self_link_is_a_cycle() {
    let mut reg = registry_with(&[(0.5, 0.5)]);
    assert!(matches!(
        reg.link(RecordId(1), RecordId(1), 1.0, "fixture"),
        Err(RegistryError::CycleRejected { .. })
    ));
    assert_eq!(reg.log().len(), 1);
}

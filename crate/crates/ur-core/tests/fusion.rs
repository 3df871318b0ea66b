mod support;

use proptest::prelude::*;
use ur_core::mechanisms::fuse_confidence;
use ur_core::model::{EvidenceItem, Polarity};

use support::item;

fn oracle(c: f64, items: &[(Polarity, f64)]) -> f64 {
    let c = c.clamp(1e-6, 1.0 - 1e-6);
    let sum: f64 = items
        .iter()
        .map(|(p, w)| match p {
            Polarity::Supporting => *w,
            Polarity::Conflicting => -*w,
            Polarity::Neutral => 0.0,
        })
        .sum();
    1.0 / (1.0 + (-((c / (1.0 - c)).ln() + sum)).exp())
}

fn polarity() -> impl Strategy<Value = Polarity> {
    prop_oneof![
        Just(Polarity::Supporting),
        Just(Polarity::Conflicting),
        Just(Polarity::Neutral),
    ]
}

fn items(v: &[(Polarity, f64)]) -> Vec<EvidenceItem> {
    v.iter().map(|(p, w)| item(*p, *w)).collect()
}

proptest! {
    #[test]
    fn matches_closed_form(
        c in 0.01f64..0.99,
        ev in prop::collection::vec((polarity(), 0.0f64..3.0), 0..12),
    ) {
        let got = fuse_confidence(c, &items(&ev));
        prop_assert!((got - oracle(c, &ev)).abs() < 1e-9);
    }

    #[test]
    fn supporting_never_lowers(
        c in 0.0f64..=1.0,
        ws in prop::collection::vec(0.0f64..5.0, 0..12),
    ) {
        let ev: Vec<_> = ws.iter().map(|w| item(Polarity::Supporting, *w)).collect();
        prop_assert!(fuse_confidence(c, &ev) >= c);
    }

    #[test]
    fn conflicting_never_raises(
        c in 0.0f64..=1.0,
        ws in prop::collection::vec(0.0f64..5.0, 0..12),
    ) {
        let ev: Vec<_> = ws.iter().map(|w| item(Polarity::Conflicting, *w)).collect();
        prop_assert!(fuse_confidence(c, &ev) <= c);
    }

    #[test]
    fn order_does_not_matter(
        c in 0.0f64..=1.0,
        ev in prop::collection::vec((polarity(), 0.0f64..3.0), 1..12)
            .prop_shuffle()
            .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())),
    ) {
        let (a, b) = ev;
        let fa = fuse_confidence(c, &items(&a));
        let fb = fuse_confidence(c, &items(&b));
        prop_assert!((fa - fb).abs() < 1e-9);
    }

    #[test]
    fn stays_in_unit_interval(
        c in 0.0f64..=1.0,
        ev in prop::collection::vec((polarity(), 0.0f64..1e3), 0..12),
    ) {
        let got = fuse_confidence(c, &items(&ev));
        prop_assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn cancelling_evidence_is_identity() {
    let ev = [item(Polarity::Supporting, 0.7), item(Polarity::Conflicting, 0.7)];
    assert_eq!(fuse_confidence(0.3, &ev), 0.3);
    assert_eq!(fuse_confidence(0.3, &[item(Polarity::Neutral, 4.0)]), 0.3);
}

//! Property-based invariants for the distribution and conditioning layers.

use std::collections::BTreeMap;

use proptest::collection::vec;
use proptest::prelude::*;

use gw_core::offspring::{multinomial_event_prob, JointWx};
use gw_core::survival::{log_mass_mixture, SurvivalTable};
use gw_core::tree::{enumerate_trees, log_prob};
use gw_core::{OffspringSchedule, Pmf, Tree};

fn weight_map() -> impl Strategy<Value = BTreeMap<u32, f64>> {
    vec((0u32..6, 0.0f64..10.0), 1..6).prop_map(|pairs| pairs.into_iter().collect())
}

fn positive_weight_map() -> impl Strategy<Value = BTreeMap<u32, f64>> {
    weight_map().prop_filter("needs positive mass", |w| w.values().any(|&v| v > 0.0))
}

fn arb_tree() -> impl Strategy<Value = Tree> {
    let leaf = Just(Tree::leaf());
    leaf.prop_recursive(4, 24, 4, |inner| vec(inner, 0..4).prop_map(Tree::new))
}

/// Offspring laws supported on {0, 1, 2} with at least one positive weight.
fn arb_small_law() -> impl Strategy<Value = Pmf> {
    vec(0.0f64..4.0, 3)
        .prop_filter("needs positive mass", |w| w.iter().any(|&v| v > 0.0))
        .prop_map(|w| {
            let map: BTreeMap<u32, f64> = w
                .into_iter()
                .enumerate()
                .map(|(n, v)| (n as u32, v))
                .collect();
            Pmf::from_weights(&map).expect("positive mass")
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pmf_probabilities_sum_to_one(weights in positive_weight_map()) {
        let pmf = Pmf::from_weights(&weights).unwrap();
        let total: f64 = pmf.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(pmf.probs().iter().all(|&p| p > 0.0));
        prop_assert!(pmf.support().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn joint_marginal_recovers_the_pmf(weights in positive_weight_map(), p in 0.0f64..=1.0) {
        let pmf = Pmf::from_weights(&weights).unwrap();
        let joint = JointWx::from_pmf(&pmf, p).unwrap();
        let marginal = joint.marginal_w();
        for (n, mass) in pmf.iter() {
            prop_assert!((marginal.mass(n) - mass).abs() < 1e-12);
        }
        let total: f64 = joint.iter().map(|(_, _, v)| v).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conditional_mixture_rebuilds_the_joint(weights in positive_weight_map(), p in 0.01f64..=0.99) {
        let pmf = Pmf::from_weights(&weights).unwrap();
        let joint = JointWx::from_pmf(&pmf, p).unwrap();
        let p0 = joint.prob_x_zero();
        let p1 = joint.prob_x_at_least_one();
        let extinct = joint.given_x_zero().ok();
        let survive = joint.given_x_at_least_one().ok();
        for (n, m, v) in joint.iter() {
            let rebuilt = if m == 0 {
                extinct.as_ref().map_or(0.0, |law| p0 * law.mass(n))
            } else {
                survive.as_ref().map_or(0.0, |law| p1 * law.mass(n, m))
            };
            prop_assert!((rebuilt - v).abs() < 1e-12, "entry ({}, {})", n, m);
        }
    }

    #[test]
    fn serialize_parse_roundtrip(t in arb_tree()) {
        let text = t.serialize();
        let parsed = Tree::parse(&text).unwrap();
        prop_assert_eq!(parsed, t);
    }

    #[test]
    fn multinomial_partition_sums_to_one(
        weights in positive_weight_map(),
        raw_q in vec(0.01f64..1.0, 3),
    ) {
        let pmf = Pmf::from_weights(&weights).unwrap();
        let total: f64 = raw_q.iter().sum();
        let q: Vec<f64> = raw_q.iter().map(|v| v / total).collect();
        // Partition of N^3 by the first coordinate with a threshold.
        let p1 = multinomial_event_prob(&pmf, &q, |n| n[0] == 0).unwrap();
        let p2 = multinomial_event_prob(&pmf, &q, |n| n[0] == 1).unwrap();
        let p3 = multinomial_event_prob(&pmf, &q, |n| n[0] >= 2).unwrap();
        prop_assert!((p1 + p2 + p3 - 1.0).abs() < 1e-10);
    }
}

proptest! {
    // Heavier: each case enumerates a full tree space.
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn two_type_mixture_is_pointwise_exact(
        laws in vec(arb_small_law(), 1..=3),
    ) {
        let k = laws.len();
        let sched = OffspringSchedule::from_laws(laws).unwrap();
        let table = SurvivalTable::build(&sched, k).unwrap();
        for t in enumerate_trees(k, 2).unwrap() {
            let exact = log_prob(&t, &sched, 0, k).unwrap().exp();
            let mixed = log_mass_mixture(&table, 0, &t).unwrap().exp();
            prop_assert!(
                (exact - mixed).abs() < 1e-12,
                "tree {} exact {} mixed {}",
                t.serialize(),
                exact,
                mixed
            );
        }
    }
}

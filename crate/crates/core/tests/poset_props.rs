use std::collections::BTreeMap;

use galloc_core::choice::axioms::CheckLimits;
use galloc_core::genrand::{generate, Family, GeneratorConfig};
use galloc_core::lattice::{build_full_route, Monitor, Policy};
use galloc_core::oracle::{enumerate_closed_functions, enumerate_stable, DEFAULT_LIMIT};
use galloc_core::poset::{
    build_poset_gapless, build_poset_general, gapless_status, GaplessStatus, min_cost_stable, omega, omega_inverse, ClosedFunction, PosetOptions,
    RotationPoset,
};
use galloc_core::{CostVector, Market};
use proptest::prelude::*;

prop_compose! {
    fn gapless_market()(seed in any::<u64>(), linear in any::<bool>(), workers in 2usize..=3,
                        quota in 1u64..=2, opposed in prop::bool::weighted(0.9), fixed in prop::bool::weighted(0.9)) -> Market {
        let config = GeneratorConfig {
            seed,
            workers,
            firms: 3,
            density: 1.0,
            max_capacity: 2,
            max_quota: quota,
            family: if linear { Family::Linear } else { Family::Mixed },
            b_cap_for_gapless: Some(2),
            opposed,
            fixed_quota: fixed,
        };
        Market::new(generate(&config).unwrap())
    }
}

fn gapless(m: &Market) -> bool {
    matches!(gapless_status(m.instance(), &CheckLimits::default()).unwrap(), GaplessStatus::Holds)
}

fn poset(m: &Market) -> RotationPoset {
    build_poset_gapless(m, &PosetOptions::default()).unwrap()
}

fn pointwise(a: &ClosedFunction, b: &ClosedFunction, f: fn(u64, u64) -> u64) -> ClosedFunction {
    ClosedFunction { values: a.values.iter().zip(&b.values).map(|(&x, &y)| f(x, y)).collect() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn omega_is_an_order_isomorphism(m in gapless_market()) {
        prop_assume!(gapless(&m));
        let p = poset(&m);
        prop_assert!(p.is_reduced());
        let lat = enumerate_stable(&m, DEFAULT_LIMIT).unwrap();
        let closed = enumerate_closed_functions(&p, DEFAULT_LIMIT).unwrap();
        prop_assert_eq!(closed.len(), lat.len());
        let images: Vec<ClosedFunction> = lat.elements.iter().map(|x| omega(&m, &p, x).unwrap()).collect();
        for (i, xi) in images.iter().enumerate() {
            prop_assert!(xi.is_closed(&p));
            prop_assert_eq!(&omega_inverse(&m, &p, xi).unwrap(), &lat.elements[i]);
            for (j, eta) in images.iter().enumerate() {
                prop_assert_eq!(lat.le(i, j), xi.le(eta));
            }
        }
    }

    #[test]
    fn omega_carries_join_and_meet_to_max_and_min(m in gapless_market()) {
        prop_assume!(gapless(&m));
        let p = poset(&m);
        let lat = enumerate_stable(&m, DEFAULT_LIMIT).unwrap();
        let images: Vec<ClosedFunction> = lat.elements.iter().map(|x| omega(&m, &p, x).unwrap()).collect();
        for i in 0..lat.len() {
            for j in 0..lat.len() {
                let join = lat.join(i, j).unwrap();
                let meet = lat.meet(i, j).unwrap();
                prop_assert_eq!(&images[join], &pointwise(&images[i], &images[j], u64::max));
                prop_assert_eq!(&images[meet], &pointwise(&images[i], &images[j], u64::min));
            }
        }
    }

    #[test]
    fn general_construction_agrees_on_gapless_instances(m in gapless_market()) {
        prop_assume!(gapless(&m));
        let a = poset(&m);
        let b = build_poset_general(&m, &PosetOptions::default()).unwrap();
        let key = |p: &RotationPoset| -> BTreeMap<_, _> {
            let order = p.order_matrix();
            (0..p.len())
                .map(|i| {
                    let below: Vec<_> = (0..p.len()).filter(|&j| order[j][i] && j != i).map(|j| p.elements[j].rotation.clone()).collect();
                    ((p.elements[i].rotation.clone(), p.elements[i].tau), below)
                })
                .map(|(k, mut v)| { v.sort(); (k, v) })
                .collect()
        };
        prop_assert_eq!(a.len(), b.len());
        prop_assert_eq!(key(&a), key(&b));
    }

    #[test]
    fn sampled_routes_respect_the_hasse_diagram(m in gapless_market(), seeds in prop::collection::vec(any::<u64>(), 20)) {
        prop_assume!(gapless(&m));
        let p = poset(&m);
        for seed in seeds {
            let route = build_full_route(&m, Policy::Seeded(seed), &Monitor { gapless: true, proven: true }).unwrap();
            let position = |i: usize| route.steps.iter().position(|s| s.rotation == p.elements[i].rotation);
            for &(i, j) in &p.hasse_edges {
                prop_assert!(position(i).unwrap() < position(j).unwrap());
            }
            prop_assert_eq!(route.len(), p.len());
        }
    }

    #[test]
    fn min_cost_matches_exhaustive_search(m in gapless_market(), raw in prop::collection::vec(-9i64..=9, 9)) {
        prop_assume!(gapless(&m));
        let inst = m.instance();
        let costs = CostVector::from_ints(&raw[..inst.num_edges()]);
        let p = poset(&m);
        let best = min_cost_stable(&m, &p, &costs).unwrap();
        let lat = enumerate_stable(&m, DEFAULT_LIMIT).unwrap();
        let brute = lat.elements.iter().map(|x| costs.dot(x).unwrap()).min().unwrap();
        prop_assert_eq!(best.cost, brute);
        prop_assert_eq!(costs.dot(&best.x).unwrap(), brute);
    }
}

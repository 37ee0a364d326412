use galloc_core::genrand::{generate, Family, GeneratorConfig};
use galloc_core::lattice::{
    build_full_route, route_towards, stage1_find_stable, stage2_descend_to_xmin, xmax, xmin_ag_iteration, Monitor, Policy,
};
use galloc_core::oracle::{enumerate_stable, verify_lattice_properties, DEFAULT_LIMIT};
use galloc_core::rotation::{max_feasible_weight, max_feasible_weight_scan, rotations};
use galloc_core::stability::is_stable;
use galloc_core::Market;
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Linear), Just(Family::Tableau), Just(Family::TableauA3), Just(Family::Mixed)]
}

prop_compose! {
    fn market()(seed in any::<u64>(), family in family(), workers in 2usize..=3,
                cap in 2u64..=3, quota in 1u64..=2, opposed in prop::bool::weighted(0.9), fixed in prop::bool::weighted(0.9)) -> Market {
        let config = GeneratorConfig {
            seed,
            workers,
            firms: 3,
            density: 1.0,
            max_capacity: cap,
            max_quota: quota,
            family,
            b_cap_for_gapless: None,
            opposed,
            fixed_quota: fixed,
        };
        Market::new(generate(&config).unwrap())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn both_pipelines_find_the_brute_force_minimum(m in market()) {
        let lat = enumerate_stable(&m, DEFAULT_LIMIT).unwrap();
        let ag = xmin_ag_iteration(&m).unwrap();
        prop_assert_eq!(&ag.x, &lat.elements[lat.min]);
        let s1 = stage1_find_stable(&m).unwrap();
        prop_assert!(is_stable(&m, &s1.x));
        prop_assert_eq!(stage2_descend_to_xmin(&m, &s1.x).unwrap().x, ag.x);
    }

    #[test]
    fn descent_reaches_the_minimum_from_every_stable_assignment(m in market()) {
        let lat = enumerate_stable(&m, DEFAULT_LIMIT).unwrap();
        for x in &lat.elements {
            prop_assert_eq!(&stage2_descend_to_xmin(&m, x).unwrap().x, &lat.elements[lat.min]);
        }
    }

    #[test]
    fn enumerated_lattice_has_the_structural_properties(m in market()) {
        let lat = enumerate_stable(&m, DEFAULT_LIMIT).unwrap();
        let report = verify_lattice_properties(&m, &lat).unwrap();
        prop_assert!(report.passed(), "{:?}", report.witnesses);
    }

    #[test]
    fn routes_under_any_policy_use_the_same_rotations(m in market(), seed in any::<u64>()) {
        let lat = enumerate_stable(&m, DEFAULT_LIMIT).unwrap();
        let monitor = Monitor::general();
        let routes: Vec<_> = [Policy::Smallest, Policy::Largest, Policy::Seeded(seed)]
            .into_iter()
            .map(|p| build_full_route(&m, p, &monitor).unwrap())
            .collect();
        for r in &routes {
            prop_assert_eq!(r.end(), &lat.elements[lat.max]);
            prop_assert!(rotations(&m, r.end()).unwrap().is_empty());
            prop_assert_eq!(r.pairs(), routes[0].pairs());
        }
        prop_assert_eq!(&xmax(&m, &monitor).unwrap(), &lat.elements[lat.max]);
    }

    #[test]
    fn bisected_weight_matches_linear_scan(m in market()) {
        let route = build_full_route(&m, Policy::Smallest, &Monitor::general()).unwrap();
        let mut x = route.start.clone();
        for step in &route.steps {
            for r in rotations(&m, &x).unwrap() {
                prop_assert_eq!(max_feasible_weight(&m, &x, &r).unwrap().tau, max_feasible_weight_scan(&m, &x, &r));
            }
            x = step.after.clone();
        }
    }

    #[test]
    fn every_stable_assignment_is_reached_from_the_minimum(m in market()) {
        let lat = enumerate_stable(&m, DEFAULT_LIMIT).unwrap();
        for x in &lat.elements {
            let route = route_towards(&m, lat.elements[lat.min].clone(), x).unwrap();
            prop_assert_eq!(route.end(), x);
            for s in &route.steps {
                prop_assert!(lat.index_of(&s.after).is_some());
            }
        }
    }
}

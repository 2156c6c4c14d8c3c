mod common;

use proptest::prelude::*;

use hetnet_ce::assoc::{evaluate_utility, is_feasible, Association, LoadCaps, UtilitySpec};
use hetnet_ce::baselines::{dual_subgradient_assoc, exhaustive_search, max_sinr_assoc, DualConfig};
use hetnet_ce::harness::oracle_check;
use hetnet_ce::netmodel::{compute_link_gains, generate_deployment, LinkGains};
use hetnet_ce::scenario::ScenarioConfig;

/// Independent depth-first enumeration: first strictly better candidate in
/// lexicographic order wins.
fn brute_force(g: &LinkGains, caps: &LoadCaps, u: &UtilitySpec) -> (Vec<usize>, f64) {
    fn rec(
        prefix: &mut Vec<usize>,
        g: &LinkGains,
        caps: &LoadCaps,
        u: &UtilitySpec,
        best: &mut Option<(Vec<usize>, f64)>,
    ) {
        if prefix.len() == g.n_users() {
            let a = Association::new(prefix.clone(), g.n_bs()).unwrap();
            if !is_feasible(&a, caps).unwrap() {
                return;
            }
            if let Ok(v) = evaluate_utility(&a, g, u) {
                if best.as_ref().is_none_or(|b| v > b.1) {
                    *best = Some((prefix.clone(), v));
                }
            }
            return;
        }
        for j in 0..g.n_bs() {
            prefix.push(j);
            rec(prefix, g, caps, u, best);
            prefix.pop();
        }
    }
    let mut best = None;
    rec(&mut Vec::new(), g, caps, u, &mut best);
    best.expect("some feasible candidate")
}

#[test]
fn exhaustive_matches_recursive_enumeration() {
    for (users, sbs, caps) in [
        (5, 2, None),
        (6, 2, Some(vec![2, 2, 2])),
        (4, 3, Some(vec![1, 1, 1, 1])),
        (7, 1, None),
    ] {
        let scenario = ScenarioConfig {
            n_users: users,
            n_sbs: sbs,
            load_caps: caps,
            ..ScenarioConfig::default()
        };
        for seed in 0..5 {
            let g = compute_link_gains(&generate_deployment(&scenario, seed).unwrap()).unwrap();
            let c = scenario.caps().unwrap();
            let (a, v) = exhaustive_search(&g, &c, &scenario.utility, 1_000_000).unwrap();
            let (b, w) = brute_force(&g, &c, &scenario.utility);
            assert_eq!(a.as_slice(), &b[..]);
            assert_eq!(v, w);
        }
    }
}

#[test]
fn ceas_near_oracle_on_small_instances() {
    let check = oracle_check(&common::desk_plan(20), 20).unwrap();
    assert!(check.within_1pct >= 19, "{:?}", check.per_drop);
}

#[test]
fn dual_lands_between_max_sinr_and_oracle() {
    let scenario = ScenarioConfig {
        n_users: 6,
        n_sbs: 2,
        ..ScenarioConfig::default()
    };
    let caps = scenario.caps().unwrap();
    let mut between = 0;
    for seed in 0..100 {
        let g = compute_link_gains(&generate_deployment(&scenario, seed).unwrap()).unwrap();
        let ms = evaluate_utility(&max_sinr_assoc(&g), &g, &scenario.utility).unwrap();
        let (_, opt) = exhaustive_search(&g, &caps, &scenario.utility, 1000).unwrap();
        let (d, _) = dual_subgradient_assoc(&g, &scenario.utility, &DualConfig::default()).unwrap();
        let dv = evaluate_utility(&d, &g, &scenario.utility).unwrap();
        assert!(dv <= opt + 1e-9);
        if dv >= ms - 1e-9 {
            between += 1;
        }
    }
    assert!(between >= 90, "{between}/100");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn oracle_dominates_every_method(seed in any::<u64>(), users in 2usize..7) {
        let scenario = ScenarioConfig { n_users: users, n_sbs: 2, ..ScenarioConfig::default() };
        let g = compute_link_gains(&generate_deployment(&scenario, seed).unwrap()).unwrap();
        let caps = scenario.caps().unwrap();
        let (_, opt) = exhaustive_search(&g, &caps, &scenario.utility, 1000).unwrap();
        let ms = evaluate_utility(&max_sinr_assoc(&g), &g, &scenario.utility).unwrap();
        prop_assert!(ms <= opt + 1e-9);
    }
}

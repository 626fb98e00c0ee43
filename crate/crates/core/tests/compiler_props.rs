// SPDX-License-Identifier: Apache-2.0

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use scout_core::sim::{generate_policy, GeneratorConfig, Profile};
use scout_core::{compile, validate_policy, NetworkPolicy, ObjectKind, Rule};

/// Rule count by direct enumeration: every contract pair and filter yields
/// two directions on each switch hosting either side.
fn count_by_enumeration(p: &NetworkPolicy) -> usize {
    let mut n = 0;
    for c in p.contracts.values() {
        for pair in &c.pairs {
            let hosts: BTreeSet<_> = p.epg_switches(&pair.epg_a).union(&p.epg_switches(&pair.epg_b)).copied().collect();
            n += 2 * hosts.len() * c.filters.len();
        }
    }
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rule_count_and_shape(cfg in common::small_config()) {
        let Ok(policy) = generate_policy(&cfg) else { return Err(TestCaseError::reject("infeasible draw")) };
        let compiled = compile(&policy);
        prop_assert_eq!(compiled.len(), count_by_enumeration(&policy));
        let unique: BTreeSet<&Rule> = compiled.logical_rules().collect();
        prop_assert_eq!(unique.len(), compiled.len());
        for prov in compiled.rules() {
            let r = &prov.rule;
            let c = &policy.contracts[&prov.contract];
            prop_assert!(c.filters.contains(&prov.filter));
            prop_assert_eq!(policy.filters[&prov.filter].port, r.port);
            prop_assert!(c.pairs.iter().any(|p| (p.epg_a == r.src && p.epg_b == r.dst) || (p.epg_a == r.dst && p.epg_b == r.src)));
            prop_assert!(policy.epg_switches(&r.src).contains(r.switch.as_str()) || policy.epg_switches(&r.dst).contains(r.switch.as_str()));
            prop_assert_eq!(&policy.epgs[&r.src].vrf, &r.vrf);
        }
        prop_assert_eq!(compile(&policy), compiled);
    }

    #[test]
    fn removing_an_object_removes_exactly_its_rules(cfg in common::small_config(), pick in any::<prop::sample::Index>()) {
        let Ok(policy) = generate_policy(&cfg) else { return Err(TestCaseError::reject("infeasible draw")) };
        let compiled = compile(&policy);
        let ids = policy.object_ids();
        for kind in ObjectKind::ALL {
            let of_kind: Vec<_> = ids.iter().filter(|o| o.kind == kind).collect();
            let victim = of_kind[pick.index(of_kind.len())];
            let reduced = compile(&common::remove_cascading(&policy, victim));
            let expected: Vec<&Rule> =
                compiled.rules().iter().filter(|p| !p.depends_on(victim)).map(|p| &p.rule).collect();
            let got: Vec<&Rule> = reduced.logical_rules().collect();
            prop_assert_eq!(got, expected, "removing {}", victim);
        }
    }
}

#[test]
fn hundred_testbed_seeds_round_trip() {
    for seed in 0..100 {
        let cfg = GeneratorConfig::profile(Profile::Testbed, seed);
        let p = generate_policy(&cfg).unwrap();
        assert!(validate_policy(&p).is_empty(), "seed {seed}");
        assert_eq!((p.vrfs.len(), p.epgs.len(), p.contracts.len(), p.filters.len()), (1, 36, 24, 9));
        assert_eq!(p.pair_count(), cfg.pairs);
        let text = serde_json::to_string(&p).unwrap();
        let back = NetworkPolicy::from_json(&text).unwrap();
        assert_eq!(back, p, "seed {seed}");
        assert_eq!(compile(&back), compile(&p));
        assert_eq!(generate_policy(&cfg).unwrap(), p);
    }
}

#[test]
fn json_file_round_trip() {
    let p = generate_policy(&GeneratorConfig::profile(Profile::Testbed, 9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.json");
    p.save(&path).unwrap();
    assert_eq!(NetworkPolicy::load(&path).unwrap(), p);
}

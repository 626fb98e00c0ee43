// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use proptest::prelude::*;
use scout_core::sim::{GeneratorConfig, Profile};
use scout_core::{NetworkPolicy, ObjectId, ObjectKind};

/// Small generator configurations that always pass `check`.
pub fn small_config() -> impl Strategy<Value = GeneratorConfig> {
    (any::<u64>(), 1usize..=2, 10usize..=30, 4usize..=12, 2usize..=8, 2usize..=6, 0usize..=10).prop_map(
        |(seed, vrfs, epgs, contracts, filters, switches, extra)| {
            let mut cfg = GeneratorConfig::profile(Profile::Testbed, seed);
            cfg.vrfs = vrfs;
            cfg.epgs = epgs;
            cfg.contracts = contracts;
            cfg.filters = filters;
            cfg.switches = switches;
            cfg.endpoints_per_epg = (1, switches.min(3));
            cfg.filters_per_contract = (1, filters.min(3));
            cfg.min_pairs_per_contract = 2;
            cfg.min_epg_degree = 2;
            let capacity: usize = (0..vrfs)
                .map(|v| (0..epgs).filter(|e| e * vrfs / epgs == v).count())
                .map(|n| n * (n - 1) / 2)
                .sum();
            cfg.contracts = contracts.min(capacity / 2);
            let need = (cfg.contracts * 2).max(epgs);
            cfg.pairs = (need + extra).min(capacity);
            cfg
        },
    )
}

/// Deletes `object` along with every reference to it.
pub fn remove_cascading(policy: &NetworkPolicy, object: &ObjectId) -> NetworkPolicy {
    let mut p = policy.clone();
    let name = object.name.as_str();
    match object.kind {
        ObjectKind::Vrf => {
            p.vrfs.remove(name);
            let gone: Vec<String> = p.epgs.values().filter(|e| e.vrf == name).map(|e| e.name.clone()).collect();
            for e in gone {
                p = remove_cascading(&p, &ObjectId::epg(e));
            }
        }
        ObjectKind::Epg => {
            p.epgs.remove(name);
            for c in p.contracts.values_mut() {
                c.pairs.retain(|pair| pair.epg_a != name && pair.epg_b != name);
            }
        }
        ObjectKind::Contract => {
            p.contracts.remove(name);
        }
        ObjectKind::Filter => {
            p.filters.remove(name);
            for c in p.contracts.values_mut() {
                c.filters.retain(|f| f != name);
            }
        }
        ObjectKind::Switch => {
            p.switches.remove(name);
            for e in p.epgs.values_mut() {
                e.endpoints.retain(|ep| ep.switch != name);
            }
        }
    }
    p
}

// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic policy generator.
//!
//! EPG and filter popularity follow a Zipf law with exponent `skew`, so a few
//! objects are shared by many pairs while most are used a handful of times.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ensure_valid, NetworkPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 36 EPGs, 24 contracts, 9 filters and 100 EPG pairs on 4 switches.
    Testbed,
    /// 6 VRFs, 615 EPGs, 386 contracts and 160 filters on 30 switches.
    Production,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "testbed" => Ok(Profile::Testbed),
            "production" => Ok(Profile::Production),
            other => Err(Error::Config(format!("unknown profile `{other}` (expected testbed or production)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GeneratorConfig {
    pub vrfs: usize,
    pub epgs: usize,
    pub contracts: usize,
    pub filters: usize,
    pub switches: usize,
    /// Distinct EPG pairs bound by contracts.
    pub pairs: usize,
    /// Inclusive range of endpoints per EPG; each lands on a distinct switch.
    pub endpoints_per_epg: (usize, usize),
    /// Inclusive range of filters per contract.
    pub filters_per_contract: (usize, usize),
    /// Every contract binds at least this many pairs.
    pub min_pairs_per_contract: usize,
    /// Every EPG takes part in at least this many pairs.
    pub min_epg_degree: usize,
    /// Every filter is attached to at least this many contracts.
    pub min_contracts_per_filter: usize,
    /// Zipf exponent of EPG and filter popularity; 0 is uniform.
    pub skew: f64,
    /// Zipf exponent of contract size beyond the minimum.
    pub contract_skew: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn profile(profile: Profile, seed: u64) -> Self {
        match profile {
            Profile::Testbed => GeneratorConfig {
                vrfs: 1,
                epgs: 36,
                contracts: 24,
                filters: 9,
                switches: 4,
                pairs: 100,
                endpoints_per_epg: (2, 4),
                filters_per_contract: (1, 3),
                min_pairs_per_contract: 3,
                min_epg_degree: 3,
                min_contracts_per_filter: 1,
                skew: 0.6,
                contract_skew: 0.6,
                seed,
            },
            Profile::Production => GeneratorConfig {
                vrfs: 6,
                epgs: 615,
                contracts: 386,
                filters: 160,
                switches: 30,
                pairs: 1500,
                endpoints_per_epg: (1, 3),
                filters_per_contract: (1, 4),
                min_pairs_per_contract: 2,
                min_epg_degree: 2,
                min_contracts_per_filter: 2,
                skew: 1.0,
                contract_skew: 1.2,
                seed,
            },
        }
    }

    /// VRF of each EPG index: contiguous, near-equal blocks.
    fn vrf_of(&self, epg: usize) -> usize {
        epg * self.vrfs / self.epgs
    }

    fn vrf_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.vrfs];
        for e in 0..self.epgs {
            sizes[self.vrf_of(e)] += 1;
        }
        sizes
    }

    pub fn check(&self) -> Result<()> {
        let positive = [
            ("vrfs", self.vrfs),
            ("epgs", self.epgs),
            ("contracts", self.contracts),
            ("filters", self.filters),
            ("switches", self.switches),
            ("pairs", self.pairs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let (elo, ehi) = self.endpoints_per_epg;
        if elo == 0 || elo > ehi || ehi > self.switches {
            return Err(Error::Config(format!(
                "endpoints per EPG range {elo}..={ehi} must be non-empty, start at 1 or more and fit {} switches",
                self.switches
            )));
        }
        let (flo, fhi) = self.filters_per_contract;
        if flo == 0 || flo > fhi || fhi > self.filters {
            return Err(Error::Config(format!(
                "filters per contract range {flo}..={fhi} must be non-empty, start at 1 or more and fit {} filters",
                self.filters
            )));
        }
        let min_f = self.min_contracts_per_filter.max(1);
        if self.contracts * fhi < self.filters * min_f || min_f > self.contracts {
            return Err(Error::Config(format!("too few contract slots to attach every filter {min_f} times")));
        }
        if self.epgs < 2 * self.vrfs {
            return Err(Error::Config("every VRF needs at least two EPGs".into()));
        }
        let capacity: usize = self.vrf_sizes().iter().map(|n| n * (n - 1) / 2).sum();
        if self.pairs > capacity {
            return Err(Error::Config(format!("{} pairs requested but only {capacity} intra-VRF pairs exist", self.pairs)));
        }
        let min_c = self.min_pairs_per_contract.max(1);
        if self.contracts * min_c > self.pairs {
            return Err(Error::Config(format!(
                "{} contracts with at least {min_c} pairs each need {} pairs, got {}",
                self.contracts,
                self.contracts * min_c,
                self.pairs
            )));
        }
        let min_d = self.min_epg_degree.max(1);
        if self.pairs < (self.epgs * min_d).div_ceil(2) {
            return Err(Error::Config(format!("too few pairs to give every EPG {min_d} partners")));
        }
        if self.vrf_sizes().iter().any(|&n| n <= min_d) {
            return Err(Error::Config(format!("a VRF is too small for EPG degree {min_d}")));
        }
        if ![self.skew, self.contract_skew].iter().all(|x| *x >= 0.0 && x.is_finite()) {
            return Err(Error::Config("skew must be a finite non-negative number".into()));
        }
        Ok(())
    }
}

fn width(n: usize) -> usize {
    n.to_string().len().max(2)
}

/// Zipf weights over a random ranking of `n` items.
fn zipf(n: usize, skew: f64, rng: &mut impl Rng) -> WeightedIndex<f64> {
    let mut rank: Vec<usize> = (0..n).collect();
    rank.shuffle(rng);
    let mut w = vec![0.0; n];
    for (r, &i) in rank.iter().enumerate() {
        w[i] = 1.0 / ((r + 1) as f64).powf(skew);
    }
    WeightedIndex::new(w).expect("weights are positive")
}

pub fn generate_policy(cfg: &GeneratorConfig) -> Result<NetworkPolicy> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (wv, we, wc, wf, ws) =
        (width(cfg.vrfs), width(cfg.epgs), width(cfg.contracts), width(cfg.filters), width(cfg.switches));
    let vrf = |i: usize| format!("vrf{:0wv$}", i + 1);
    let epg = |i: usize| format!("epg{:0we$}", i + 1);
    let switch = |i: usize| format!("leaf{:0ws$}", i + 1);
    let filter = |i: usize| format!("flt{:0wf$}", i + 1);

    let mut p = NetworkPolicy::new();
    for v in 0..cfg.vrfs {
        p.add_vrf(vrf(v));
    }
    for s in 0..cfg.switches {
        p.add_switch(switch(s));
    }
    let all_switches: Vec<usize> = (0..cfg.switches).collect();
    for e in 0..cfg.epgs {
        let k = rng.gen_range(cfg.endpoints_per_epg.0..=cfg.endpoints_per_epg.1);
        let mut on: Vec<usize> = all_switches.choose_multiple(&mut rng, k).copied().collect();
        on.sort_unstable();
        let endpoints: Vec<(String, String)> =
            on.iter().enumerate().map(|(j, &s)| (format!("{}-ep{}", epg(e), j + 1), switch(s))).collect();
        p.add_epg(epg(e), vrf(cfg.vrf_of(e)), endpoints);
    }
    for f in 0..cfg.filters {
        p.add_filter(filter(f), 1024 + f as u16);
    }

    let pairs = sample_pairs(cfg, &mut rng)?;

    // Contracts: the minimum number of pairs each, the rest by popularity.
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut rng);
    let pick_contract = zipf(cfg.contracts, cfg.contract_skew, &mut rng);
    let floor = cfg.contracts * cfg.min_pairs_per_contract.max(1);
    let mut members: Vec<Vec<(usize, usize)>> = vec![Vec::new(); cfg.contracts];
    for (slot, &i) in order.iter().enumerate() {
        let c = if slot < floor { slot % cfg.contracts } else { pick_contract.sample(&mut rng) };
        members[c].push(pairs[i]);
    }

    // Filters: every filter appears at least once, the rest by popularity.
    let pick_filter = zipf(cfg.filters, cfg.skew, &mut rng);
    let mut chosen: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); cfg.contracts];
    let mut seeds: Vec<usize> = (0..cfg.contracts).collect();
    seeds.shuffle(&mut rng);
    let mut cursor = 0;
    for _ in 0..cfg.min_contracts_per_filter.max(1) {
        for f in 0..cfg.filters {
            // Next contract with a free slot not holding f yet; check()
            // guarantees enough slots.
            for _ in 0..cfg.contracts {
                let c = seeds[cursor % cfg.contracts];
                cursor += 1;
                if chosen[c].len() < cfg.filters_per_contract.1 && chosen[c].insert(f) {
                    break;
                }
            }
        }
    }
    for set in chosen.iter_mut() {
        let want = rng.gen_range(cfg.filters_per_contract.0..=cfg.filters_per_contract.1).max(set.len());
        while set.len() < want {
            set.insert(pick_filter.sample(&mut rng));
        }
    }

    for c in 0..cfg.contracts {
        let pairs: Vec<(String, String)> = members[c].iter().map(|&(a, b)| (epg(a), epg(b))).collect();
        let filters: Vec<String> = chosen[c].iter().map(|&f| filter(f)).collect();
        p.add_contract(format!("ctr{:0wc$}", c + 1), pairs, filters);
    }
    ensure_valid(&p)?;
    Ok(p)
}

/// Distinct intra-VRF pairs. Every EPG gets a partner first, then pairs are
/// drawn with Zipf-weighted endpoints until the target is reached.
fn sample_pairs(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let sizes = cfg.vrf_sizes();
    let mut start = vec![0; cfg.vrfs];
    for v in 1..cfg.vrfs {
        start[v] = start[v - 1] + sizes[v - 1];
    }
    let pickers: Vec<WeightedIndex<f64>> = sizes.iter().map(|&n| zipf(n, cfg.skew, rng)).collect();
    let draw = |v: usize, rng: &mut ChaCha8Rng| start[v] + pickers[v].sample(rng);

    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut out = Vec::with_capacity(cfg.pairs);
    let mut push = |a: usize, b: usize, out: &mut Vec<(usize, usize)>| {
        let key = (a.min(b), a.max(b));
        if a != b && seen.insert(key) {
            out.push(key);
            true
        } else {
            false
        }
    };

    let min_d = cfg.min_epg_degree.max(1);
    let mut degree = vec![0usize; cfg.epgs];
    let mut lonely: Vec<usize> = (0..cfg.epgs).collect();
    lonely.shuffle(rng);
    for &e in &lonely {
        let v = cfg.vrf_of(e);
        while degree[e] < min_d {
            let other = draw(v, rng);
            if push(e, other, &mut out) {
                degree[e] += 1;
                degree[other] += 1;
            }
        }
    }
    if out.len() > cfg.pairs {
        return Err(Error::Config(format!(
            "meeting EPG degree {min_d} took {} pairs, more than the {} requested",
            out.len(),
            cfg.pairs
        )));
    }

    let weights: Vec<usize> = sizes.iter().map(|n| n * (n - 1) / 2).collect();
    let pick_vrf = WeightedIndex::new(&weights).expect("some VRF has two EPGs");
    let mut misses = 0usize;
    while out.len() < cfg.pairs {
        let v = pick_vrf.sample(rng);
        let (a, b) = (draw(v, rng), draw(v, rng));
        if push(a, b, &mut out) {
            misses = 0;
            continue;
        }
        misses += 1;
        if misses > 10_000 {
            let sizes = &sizes;
            // The popular corner is saturated: finish uniformly from what is left.
            let mut rest: Vec<(usize, usize)> = (0..cfg.vrfs)
                .flat_map(|v| {
                    let (s, n) = (start[v], sizes[v]);
                    (s..s + n).flat_map(move |a| (a + 1..s + n).map(move |b| (a, b)))
                })
                .filter(|k| !seen.contains(k))
                .collect();
            rest.shuffle(rng);
            let need = cfg.pairs - out.len();
            out.extend(rest.into_iter().take(need));
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn testbed_counts() {
        let p = generate_policy(&GeneratorConfig::profile(Profile::Testbed, 1)).unwrap();
        assert_eq!((p.vrfs.len(), p.epgs.len(), p.contracts.len(), p.filters.len()), (1, 36, 24, 9));
        assert_eq!(p.pair_count(), 100);
        assert_eq!(p.switches.len(), 4);
    }

    #[test]
    fn production_counts() {
        let p = generate_policy(&GeneratorConfig::profile(Profile::Production, 1)).unwrap();
        assert_eq!((p.vrfs.len(), p.epgs.len(), p.contracts.len(), p.filters.len()), (6, 615, 386, 160));
        assert_eq!(p.pair_count(), 1500);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = GeneratorConfig::profile(Profile::Testbed, 9);
        let a = serde_json::to_string(&generate_policy(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_policy(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = GeneratorConfig { seed: 10, ..cfg };
        assert_ne!(a, serde_json::to_string(&generate_policy(&other).unwrap()).unwrap());
    }

    #[test]
    fn infeasible_configs() {
        let base = GeneratorConfig::profile(Profile::Testbed, 0);
        let bad = [
            GeneratorConfig { contracts: 101, ..base.clone() },
            GeneratorConfig { pairs: 36 * 35 / 2 + 1, ..base.clone() },
            GeneratorConfig { epgs: 0, ..base.clone() },
            GeneratorConfig { endpoints_per_epg: (1, 5), ..base.clone() },
            GeneratorConfig { filters_per_contract: (2, 1), ..base.clone() },
            GeneratorConfig { vrfs: 20, ..base.clone() },
        ];
        for cfg in bad {
            assert!(matches!(generate_policy(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn skew_concentrates_filter_use() {
        let cfg = GeneratorConfig::profile(Profile::Production, 3);
        let p = generate_policy(&cfg).unwrap();
        let mut uses: Vec<usize> = p
            .filters
            .keys()
            .map(|f| p.contracts.values().filter(|c| c.filters.contains(f)).count())
            .collect();
        uses.sort_unstable_by(|a, b| b.cmp(a));
        assert!(uses[0] >= 5 * uses[uses.len() / 2], "top {} median {}", uses[0], uses[uses.len() / 2]);
    }
}

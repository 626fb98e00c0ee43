// SPDX-License-Identifier: Apache-2.0

//! Random fault plans and the change logs that would accompany them.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::changelog::{ChangeAction, ChangeLog, ChangeLogEntry};
use crate::compiler::CompiledPolicy;
use crate::error::{Error, Result};
use crate::object::{ObjectId, ObjectKind};
use crate::policy::NetworkPolicy;
use crate::sim::plan::{Fault, FaultPlan};

/// First timestamp used for fault-related change-log entries; background
/// noise lives strictly below it.
pub const FAULT_EPOCH: u64 = 1000;
/// Spacing between consecutive fault-related entries.
pub const FAULT_STEP: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InjectConfig {
    pub faults: usize,
    /// Probability that a fault is `Full`.
    pub mix: f64,
    /// Range the partial-fault fraction is drawn from, uniformly.
    pub fraction: (f64, f64),
    /// Restrict every fault to one switch.
    pub scope: Option<String>,
    pub kinds: Vec<ObjectKind>,
    pub seed: u64,
}

impl Default for InjectConfig {
    fn default() -> Self {
        InjectConfig {
            faults: 1,
            mix: 0.5,
            fraction: (0.01, 0.95),
            scope: None,
            kinds: vec![ObjectKind::Epg, ObjectKind::Contract, ObjectKind::Filter],
            seed: 0,
        }
    }
}

/// Objects of the given kinds that have at least one rule in scope, with
/// their rule counts, in [`ObjectId`] order.
pub fn faultable_objects(compiled: &CompiledPolicy, scope: Option<&str>, kinds: &[ObjectKind]) -> BTreeMap<ObjectId, usize> {
    let mut out: BTreeMap<ObjectId, usize> = BTreeMap::new();
    for prov in compiled.rules() {
        if scope.is_some_and(|s| prov.rule.switch != s) {
            continue;
        }
        for obj in prov.objects() {
            if kinds.contains(&obj.kind) {
                *out.entry(obj).or_default() += 1;
            }
        }
    }
    out
}

/// Samples `cfg.faults` distinct objects. An object with a single in-scope
/// rule cannot lose a strict subset, so it always gets a `Full` fault.
pub fn inject_faults(compiled: &CompiledPolicy, cfg: &InjectConfig) -> Result<FaultPlan> {
    if !(0.0..=1.0).contains(&cfg.mix) {
        return Err(Error::Config(format!("mix must be in [0, 1], got {}", cfg.mix)));
    }
    let (lo, hi) = cfg.fraction;
    if !(lo > 0.0 && lo <= hi && hi < 1.0) {
        return Err(Error::Config(format!("partial fraction range must lie inside (0, 1), got {lo}..{hi}")));
    }
    let pool = faultable_objects(compiled, cfg.scope.as_deref(), &cfg.kinds);
    if cfg.faults > pool.len() {
        return Err(Error::Config(format!(
            "{} faults requested but only {} faultable objects exist",
            cfg.faults,
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let objects: Vec<(&ObjectId, &usize)> = pool.iter().collect();
    let picked: Vec<(&ObjectId, &usize)> = objects.choose_multiple(&mut rng, cfg.faults).copied().collect();
    let faults = picked
        .into_iter()
        .map(|(obj, &n)| {
            let full = rng.gen_bool(cfg.mix);
            let fraction = if lo == hi { lo } else { rng.gen_range(lo..hi) };
            let mut f = if full || n < 2 { Fault::full(obj.clone()) } else { Fault::partial(obj.clone(), fraction) };
            f.scope = cfg.scope.clone();
            f
        })
        .collect();
    Ok(FaultPlan::new(faults, rng.gen()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChangeLogConfig {
    /// Background modifications to random objects before the incident.
    pub noise: usize,
    /// Leave out the entries for the faulty objects.
    pub stale: bool,
    pub seed: u64,
}

impl Default for ChangeLogConfig {
    fn default() -> Self {
        ChangeLogConfig { noise: 20, stale: false, seed: 0 }
    }
}

/// Noise entries at random times in `[0, FAULT_EPOCH)` followed, unless
/// `stale`, by one `Modify` per faulty object in plan order.
pub fn synthesize_changelog(policy: &NetworkPolicy, plan: &FaultPlan, cfg: &ChangeLogConfig) -> ChangeLog {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let objects: Vec<ObjectId> = policy.object_ids().into_iter().filter(|o| o.kind != ObjectKind::Switch).collect();
    let mut entries = Vec::with_capacity(cfg.noise + plan.faults.len());
    if !objects.is_empty() {
        for _ in 0..cfg.noise {
            let obj = objects[rng.gen_range(0..objects.len())].clone();
            entries.push(ChangeLogEntry::new(rng.gen_range(0..FAULT_EPOCH), obj, ChangeAction::Modify));
        }
    }
    if !cfg.stale {
        for (i, f) in plan.faults.iter().enumerate() {
            entries.push(ChangeLogEntry::new(FAULT_EPOCH + FAULT_STEP * i as u64, f.object.clone(), ChangeAction::Modify));
        }
    }
    ChangeLog::from_unordered(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::compile;
    use crate::equivalence::check_equivalence;
    use crate::sim::plan::FaultKind;
    use crate::sim::generate::{generate_policy, GeneratorConfig, Profile};
    use crate::tcam::{deploy, DeployOptions};

    fn testbed() -> (NetworkPolicy, CompiledPolicy) {
        let p = generate_policy(&GeneratorConfig::profile(Profile::Testbed, 5)).unwrap();
        let c = compile(&p);
        (p, c)
    }

    #[test]
    fn zero_faults_is_empty_plan() {
        let (_, c) = testbed();
        let plan = inject_faults(&c, &InjectConfig { faults: 0, ..Default::default() }).unwrap();
        assert!(plan.is_empty());
    }

    #[test]
    fn too_many_faults_rejected() {
        let (_, c) = testbed();
        let n = faultable_objects(&c, None, &InjectConfig::default().kinds).len();
        assert!(inject_faults(&c, &InjectConfig { faults: n + 1, ..Default::default() }).is_err());
        assert_eq!(inject_faults(&c, &InjectConfig { faults: n, ..Default::default() }).unwrap().faults.len(), n);
    }

    #[test]
    fn reproducible_and_distinct() {
        let (_, c) = testbed();
        let cfg = InjectConfig { faults: 10, seed: 77, ..Default::default() };
        let a = inject_faults(&c, &cfg).unwrap();
        assert_eq!(a, inject_faults(&c, &cfg).unwrap());
        assert_eq!(a.ground_truth().len(), 10);
        a.validate().unwrap();
    }

    #[test]
    fn mix_is_roughly_even() {
        let (_, c) = testbed();
        let mut full = 0;
        let mut total = 0;
        for seed in 0..400 {
            let plan = inject_faults(&c, &InjectConfig { faults: 10, seed, ..Default::default() }).unwrap();
            full += plan.faults.iter().filter(|f| f.kind == FaultKind::Full).count();
            total += plan.faults.len();
        }
        // Single-rule objects are forced to Full, which skews slightly upward.
        let share = full as f64 / total as f64;
        assert!((0.45..0.60).contains(&share), "full share {share}");
    }

    #[test]
    fn every_fault_leaves_missing_rules() {
        let (_, c) = testbed();
        for seed in 0..50 {
            let plan = inject_faults(&c, &InjectConfig { faults: 5, seed, ..Default::default() }).unwrap();
            let d = deploy(&c, &plan, &DeployOptions::default()).unwrap();
            let report = check_equivalence(c.logical_rules(), d.deployed_rules());
            for f in &plan.faults {
                assert!(report.missing.iter().any(|r| c.provenance(r).unwrap().depends_on(&f.object)), "{}", f.object);
            }
        }
    }

    #[test]
    fn changelog_marks_faults_last() {
        let (p, c) = testbed();
        let plan = inject_faults(&c, &InjectConfig { faults: 3, seed: 1, ..Default::default() }).unwrap();
        let log = synthesize_changelog(&p, &plan, &ChangeLogConfig::default());
        let tail: Vec<&ObjectId> = log.entries().iter().rev().take(3).rev().map(|e| &e.object).collect();
        let objs: Vec<&ObjectId> = plan.faults.iter().map(|f| &f.object).collect();
        assert_eq!(tail, objs);
        assert!(log.entries().iter().rev().skip(3).all(|e| e.ts < FAULT_EPOCH));
        let stale = synthesize_changelog(&p, &plan, &ChangeLogConfig { stale: true, ..Default::default() });
        assert!(stale.entries().iter().all(|e| e.ts < FAULT_EPOCH));
        assert_eq!(stale.entries().len(), 20);
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Simulated switch TCAM holding the deployed (T-type) rules.

use std::collections::BTreeMap;

use crate::compiler::{CompiledPolicy, Rule};
use crate::correlate::{FaultLogEntry, TCAM_OVERFLOW_CODE};
use crate::error::{Error, Result};
use crate::sim::plan::FaultPlan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TcamStore {
    switch: String,
    capacity: Option<usize>,
    rules: Vec<Rule>,
}

impl TcamStore {
    /// `capacity` of `None` means unbounded.
    pub fn new(switch: impl Into<String>, capacity: Option<usize>) -> Result<Self> {
        if capacity == Some(0) {
            return Err(Error::Config("TCAM capacity must be positive".into()));
        }
        Ok(TcamStore { switch: switch.into(), capacity, rules: Vec::new() })
    }

    pub fn switch(&self) -> &str {
        &self.switch
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    /// Installed rules, highest priority first.
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Appends `rule` if there is room. Returns whether it was installed.
    pub fn install(&mut self, rule: Rule) -> bool {
        if self.capacity.is_some_and(|c| self.rules.len() >= c) {
            return false;
        }
        self.rules.push(rule);
        true
    }
}

#[derive(Debug, Clone, Default)]
pub struct DeployOptions {
    /// Per-switch TCAM capacity; switches not listed use `default_capacity`.
    pub capacity: BTreeMap<String, usize>,
    pub default_capacity: Option<usize>,
    /// Timestamp stamped on fault-log events raised during this deployment.
    pub now: u64,
}

#[derive(Debug, Clone)]
pub struct Deployment {
    pub stores: BTreeMap<String, TcamStore>,
    /// Device events raised while installing, e.g. TCAM overflow.
    pub fault_log: Vec<FaultLogEntry>,
}

impl Deployment {
    /// All deployed rules across switches, in switch then priority order.
    pub fn deployed_rules(&self) -> impl Iterator<Item = &Rule> {
        self.stores.values().flat_map(|s| s.rules.iter())
    }
}

/// Installs the compiled rules switch by switch, minus whatever the fault plan
/// removes. Rules that do not fit are dropped from the low-priority end and one
/// overflow event per affected switch is logged.
pub fn deploy(compiled: &CompiledPolicy, plan: &FaultPlan, opts: &DeployOptions) -> Result<Deployment> {
    let removed = plan.removed_rules(compiled)?;
    let mut stores: BTreeMap<String, TcamStore> = BTreeMap::new();
    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    for (i, prov) in compiled.rules().iter().enumerate() {
        let switch = &prov.rule.switch;
        if !stores.contains_key(switch) {
            let cap = opts.capacity.get(switch).copied().or(opts.default_capacity);
            stores.insert(switch.clone(), TcamStore::new(switch.clone(), cap)?);
        }
        if removed.contains(&i) {
            continue;
        }
        let store = stores.get_mut(switch).expect("store inserted above");
        if !store.install(prov.rule.clone()) {
            *dropped.entry(switch.clone()).or_default() += 1;
        }
    }
    let fault_log = dropped
        .into_iter()
        .map(|(switch, n)| {
            let cap = stores[&switch].capacity.unwrap_or_default();
            FaultLogEntry {
                start: opts.now,
                end: None,
                message: format!("TCAM overflow on {switch}: {n} rule(s) not installed, capacity {cap}"),
                switch,
                code: TCAM_OVERFLOW_CODE.to_string(),
            }
        })
        .collect();
    Ok(Deployment { stores, fault_log })
}

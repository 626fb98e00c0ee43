// SPDX-License-Identifier: Apache-2.0

//! Renders a policy into per-switch logical allow rules (L-type), each tagged
//! with the exact policy objects it was derived from.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io;
use crate::object::{ObjectId, ObjectKind};
use crate::policy::{Action, NetworkPolicy};

/// A discrete allow tuple. The implicit deny-all is never materialized.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub switch: String,
    pub vrf: String,
    pub src: String,
    pub dst: String,
    pub port: u16,
    pub action: Action,
}

impl Rule {
    pub fn new(
        switch: impl Into<String>,
        vrf: impl Into<String>,
        src: impl Into<String>,
        dst: impl Into<String>,
        port: u16,
    ) -> Self {
        Rule {
            switch: switch.into(),
            vrf: vrf.into(),
            src: src.into(),
            dst: dst.into(),
            port,
            action: Action::Allow,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: VRF:{},{},{},port{} allow", self.switch, self.vrf, self.src, self.dst, self.port)
    }
}

/// A rule plus the contract and filter it came from. Together with the rule's
/// own switch, vrf and EPGs these are the six objects whose failure removes it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleProvenance {
    pub rule: Rule,
    pub contract: String,
    pub filter: String,
}

impl RuleProvenance {
    /// The provenance set, in [`ObjectId`] order: vrf, two EPGs, contract,
    /// filter, switch.
    pub fn objects(&self) -> [ObjectId; 6] {
        let r = &self.rule;
        let (lo, hi) = if r.src <= r.dst { (&r.src, &r.dst) } else { (&r.dst, &r.src) };
        [
            ObjectId::vrf(&r.vrf),
            ObjectId::epg(lo),
            ObjectId::epg(hi),
            ObjectId::contract(&self.contract),
            ObjectId::filter(&self.filter),
            ObjectId::switch(&r.switch),
        ]
    }

    pub fn depends_on(&self, object: &ObjectId) -> bool {
        let r = &self.rule;
        let name = object.name.as_str();
        match object.kind {
            ObjectKind::Vrf => r.vrf == name,
            ObjectKind::Epg => r.src == name || r.dst == name,
            ObjectKind::Contract => self.contract == name,
            ObjectKind::Filter => self.filter == name,
            ObjectKind::Switch => r.switch == name,
        }
    }
}

/// Output of [`compile`]: rules in compile order, which doubles as install
/// priority (earlier is higher).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompiledPolicy {
    rules: Vec<RuleProvenance>,
    index: HashMap<Rule, usize>,
}

impl CompiledPolicy {
    pub fn from_rules(rules: Vec<RuleProvenance>) -> Self {
        let index = rules.iter().enumerate().map(|(i, p)| (p.rule.clone(), i)).collect();
        CompiledPolicy { rules, index }
    }

    pub fn rules(&self) -> &[RuleProvenance] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn logical_rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().map(|p| &p.rule)
    }

    pub fn provenance(&self, rule: &Rule) -> Option<&RuleProvenance> {
        self.index.get(rule).map(|&i| &self.rules[i])
    }

    /// Rules installed on `switch`, in compile order.
    pub fn for_switch<'a>(&'a self, switch: &'a str) -> impl Iterator<Item = &'a RuleProvenance> + 'a {
        self.rules.iter().filter(move |p| p.rule.switch == switch)
    }

    pub fn switches(&self) -> BTreeSet<&str> {
        self.rules.iter().map(|p| p.rule.switch.as_str()).collect()
    }

    /// Rules whose provenance contains `object`, optionally limited to one switch.
    pub fn derived_from<'a>(
        &'a self,
        object: &'a ObjectId,
        scope: Option<&'a str>,
    ) -> impl Iterator<Item = (usize, &'a RuleProvenance)> + 'a {
        self.rules
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.depends_on(object) && scope.is_none_or(|s| p.rule.switch == s))
    }

    /// Every object that at least one rule depends on.
    pub fn objects(&self) -> BTreeSet<ObjectId> {
        self.rules.iter().flat_map(|p| p.objects()).collect()
    }
}

/// Compiles the policy into L-type rules.
///
/// For each contract, pair, filter and direction, one rule is emitted on every
/// switch hosting an endpoint of either EPG. Contracts are visited in name
/// order; pairs and filters in listed order; `epgA -> epgB` before the reverse.
/// Dangling references are skipped, so a validated policy is expected.
pub fn compile(policy: &NetworkPolicy) -> CompiledPolicy {
    let mut rules = Vec::new();
    let mut seen = BTreeSet::new();
    for contract in policy.contracts.values() {
        for pair in &contract.pairs {
            let (Some(a), Some(b)) = (policy.epgs.get(&pair.epg_a), policy.epgs.get(&pair.epg_b)) else {
                continue;
            };
            if a.name == b.name {
                continue;
            }
            let switches: BTreeSet<&str> = a
                .endpoints
                .iter()
                .chain(&b.endpoints)
                .map(|ep| ep.switch.as_str())
                .collect();
            for filter_name in &contract.filters {
                let Some(filter) = policy.filters.get(filter_name) else {
                    continue;
                };
                for (src, dst) in [(a, b), (b, a)] {
                    for &switch in &switches {
                        let rule = Rule::new(switch, &src.vrf, &src.name, &dst.name, filter.port);
                        if !seen.insert(rule.clone()) {
                            continue;
                        }
                        rules.push(RuleProvenance {
                            rule,
                            contract: contract.name.clone(),
                            filter: filter.name.clone(),
                        });
                    }
                }
            }
        }
    }
    CompiledPolicy::from_rules(rules)
}

pub fn load_rules(path: &Path) -> Result<Vec<Rule>> {
    io::read_jsonl(path)
}

pub fn save_rules<'a>(path: &Path, rules: impl IntoIterator<Item = &'a Rule>) -> Result<()> {
    io::write_jsonl(path, rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::three_tier;

    #[test]
    fn fig2_rules_on_s2() {
        let compiled = compile(&three_tier());
        let s2: BTreeSet<Rule> = compiled.for_switch("S2").map(|p| p.rule.clone()).collect();
        let expected: BTreeSet<Rule> = [
            Rule::new("S2", "101", "Web", "App", 80),
            Rule::new("S2", "101", "App", "Web", 80),
            Rule::new("S2", "101", "App", "DB", 80),
            Rule::new("S2", "101", "DB", "App", 80),
            Rule::new("S2", "101", "App", "DB", 700),
            Rule::new("S2", "101", "DB", "App", 700),
        ]
        .into_iter()
        .collect();
        assert_eq!(s2, expected);
        // Web-App lives on S1+S2 with one filter, App-DB on S2+S3 with two.
        assert_eq!(compiled.len(), 2 * 2 + 2 * 2 * 2);
    }

    #[test]
    fn no_contracts_no_rules() {
        let mut p = three_tier();
        p.contracts.clear();
        assert!(compile(&p).is_empty());
    }

    #[test]
    fn provenance_has_one_of_each_kind_and_two_epgs() {
        for p in compile(&three_tier()).rules() {
            let objs = p.objects();
            let count = |k| objs.iter().filter(|o| o.kind == k).count();
            assert_eq!(count(ObjectKind::Vrf), 1);
            assert_eq!(count(ObjectKind::Epg), 2);
            assert_eq!(count(ObjectKind::Contract), 1);
            assert_eq!(count(ObjectKind::Filter), 1);
            assert_eq!(count(ObjectKind::Switch), 1);
            assert!(objs.iter().all(|o| p.depends_on(o)));
        }
    }

    #[test]
    fn compile_is_pure() {
        let p = three_tier();
        assert_eq!(compile(&p).rules(), compile(&p).rules());
    }

    #[test]
    fn rule_dump_schema() {
        let r = Rule::new("S2", "101", "Web", "App", 80);
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"switch":"S2","vrf":"101","src":"Web","dst":"App","port":80,"action":"allow"}"#
        );
        let err = serde_json::from_str::<Rule>(r#"{"switch":"S2","vrf":"101","src":"Web","dst":"App"}"#)
            .unwrap_err();
        assert!(err.to_string().contains("`port`"));
    }
}

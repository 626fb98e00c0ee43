// SPDX-License-Identifier: Apache-2.0

//! Desired-versus-deployed rule comparison.
//!
//! Rules are whitelist-only exact-match tuples, so two rule sets admit the
//! same traffic iff they are equal as sets; the diff is an exact set
//! difference over canonical tuples.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::compiler::Rule;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchDiff {
    pub missing: BTreeSet<Rule>,
    pub extra: BTreeSet<Rule>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MissingRuleReport {
    /// In the desired state but not deployed.
    pub missing: BTreeSet<Rule>,
    /// Deployed but not desired. Reported only; never marks a failure.
    pub extra: BTreeSet<Rule>,
    pub per_switch: BTreeMap<String, SwitchDiff>,
}

impl MissingRuleReport {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty()
    }
}

pub fn check_equivalence<'a, L, T>(desired: L, actual: T) -> MissingRuleReport
where
    L: IntoIterator<Item = &'a Rule>,
    T: IntoIterator<Item = &'a Rule>,
{
    let desired: BTreeSet<&Rule> = desired.into_iter().collect();
    let actual: BTreeSet<&Rule> = actual.into_iter().collect();
    let mut report = MissingRuleReport::default();
    for &r in desired.difference(&actual) {
        report.missing.insert(r.clone());
        report.per_switch.entry(r.switch.clone()).or_default().missing.insert(r.clone());
    }
    for &r in actual.difference(&desired) {
        report.extra.insert(r.clone());
        report.per_switch.entry(r.switch.clone()).or_default().extra.insert(r.clone());
    }
    report
}

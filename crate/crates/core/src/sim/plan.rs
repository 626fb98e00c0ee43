// SPDX-License-Identifier: Apache-2.0

//! Fault plans: which objects lose which of their derived rules.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compiler::CompiledPolicy;
use crate::error::{Error, Result};
use crate::io;
use crate::object::ObjectId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    /// Every derived rule in scope is missing.
    Full,
    /// A strict subset of the derived rules in scope is missing.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub object: ObjectId,
    pub kind: FaultKind,
    /// Share of in-scope rules removed; `Partial` only, strictly inside (0, 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fraction: Option<f64>,
    /// Restricts the fault to rules installed on one switch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
}

impl Fault {
    pub fn full(object: ObjectId) -> Self {
        Fault { object, kind: FaultKind::Full, fraction: None, scope: None }
    }

    pub fn partial(object: ObjectId, fraction: f64) -> Self {
        Fault { object, kind: FaultKind::Partial, fraction: Some(fraction), scope: None }
    }

    pub fn on_switch(mut self, switch: impl Into<String>) -> Self {
        self.scope = Some(switch.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub faults: Vec<Fault>,
    #[serde(default)]
    pub seed: u64,
}

/// Number of rules a partial fault removes out of `n`: `fraction * n` rounded
/// half up, at least one, and at most `n - 1` so the fault stays partial when
/// the object has two or more rules.
pub fn partial_rule_count(fraction: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let rounded = (fraction * n as f64 + 0.5).floor() as usize;
    let upper = if n >= 2 { n - 1 } else { 1 };
    rounded.clamp(1, upper)
}

/// `take` of the candidate rules, drawn pair by pair: the (switch, EPG pair)
/// groups are visited in random order and each is emptied before the next,
/// so the fault breaks roughly that share of the object's pairs.
fn partial_victims(compiled: &CompiledPolicy, candidates: Vec<usize>, take: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut groups: BTreeMap<(&str, &str, &str), Vec<usize>> = BTreeMap::new();
    for i in candidates {
        let r = &compiled.rules()[i].rule;
        let (a, b) = if r.src <= r.dst { (&r.src, &r.dst) } else { (&r.dst, &r.src) };
        groups.entry((r.switch.as_str(), a.as_str(), b.as_str())).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.shuffle(rng);
    let mut out = Vec::with_capacity(take);
    for mut g in groups {
        g.shuffle(rng);
        let room = take - out.len();
        out.extend(g.into_iter().take(room));
        if out.len() == take {
            break;
        }
    }
    out
}

impl FaultPlan {
    pub fn new(faults: Vec<Fault>, seed: u64) -> Self {
        FaultPlan { faults, seed }
    }

    pub fn is_empty(&self) -> bool {
        self.faults.is_empty()
    }

    /// The injected objects, i.e. the ground truth of a trial.
    pub fn ground_truth(&self) -> BTreeSet<ObjectId> {
        self.faults.iter().map(|f| f.object.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for f in &self.faults {
            match (f.kind, f.fraction) {
                (FaultKind::Partial, Some(x)) if x > 0.0 && x < 1.0 => {}
                (FaultKind::Partial, other) => {
                    return Err(Error::Input(format!(
                        "partial fault on {} needs a fraction strictly between 0 and 1, got {other:?}",
                        f.object
                    )))
                }
                (FaultKind::Full, None) => {}
                (FaultKind::Full, Some(_)) => {
                    return Err(Error::Input(format!("full fault on {} must not carry a fraction", f.object)))
                }
            }
            if !seen.insert((&f.object, &f.scope)) {
                return Err(Error::Input(format!("object {} faulted twice in the same scope", f.object)));
            }
        }
        Ok(())
    }

    /// Indices (into `compiled.rules()`) of the rules this plan removes.
    ///
    /// Partial faults draw their victims with a generator seeded from the plan
    /// seed and the fault's position, so the result is reproducible.
    pub fn removed_rules(&self, compiled: &CompiledPolicy) -> Result<BTreeSet<usize>> {
        self.validate()?;
        let mut removed = BTreeSet::new();
        for (pos, fault) in self.faults.iter().enumerate() {
            let candidates: Vec<usize> = compiled
                .derived_from(&fault.object, fault.scope.as_deref())
                .map(|(i, _)| i)
                .collect();
            if candidates.is_empty() {
                let scope = fault.scope.as_deref().map(|s| format!(" on switch {s}")).unwrap_or_default();
                return Err(Error::Consistency(format!("fault object {} has no compiled rules{scope}", fault.object)));
            }
            match fault.kind {
                FaultKind::Full => removed.extend(candidates),
                FaultKind::Partial => {
                    let take = partial_rule_count(fault.fraction.unwrap_or_default(), candidates.len());
                    let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (pos as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    removed.extend(partial_victims(compiled, candidates, take, &mut rng));
                }
            }
        }
        Ok(removed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let plan: FaultPlan = io::read_json(path)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }
}

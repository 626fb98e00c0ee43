// SPDX-License-Identifier: Apache-2.0

//! Greedy fault localization over an augmented risk model.
//!
//! [`scout`] runs in two stages. The first repeatedly picks the shared risks
//! whose every remaining dependent is a failed observation and that cover the
//! most unexplained observations, then prunes everything adjacent to them.
//! Observations still unexplained afterwards are attributed to their failed
//! risks that were changed most recently according to the controller change
//! log. [`score`] is the single-stage baseline with a fixed hit-ratio threshold.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::changelog::ChangeLog;
use crate::error::{Error, Result};
use crate::io;
use crate::object::ObjectId;
use crate::risk::{FailureSignature, ModelKind, NodeKey, RiskModel, Status};

/// Default change-log window, in timestamp units.
pub const DEFAULT_WINDOW: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    HitCoverage,
    ChangeLog,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub object: ObjectId,
    pub stage: Stage,
    /// Observations this object accounts for.
    pub covered: Vec<NodeKey>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub model: ModelKind,
    pub entries: Vec<HypothesisEntry>,
    /// Observations no entry accounts for.
    pub residual: Vec<NodeKey>,
    /// Rounds of the candidate loop that selected at least one risk.
    #[serde(default)]
    pub iterations: usize,
}

impl Hypothesis {
    pub fn objects(&self) -> BTreeSet<ObjectId> {
        self.entries.iter().map(|e| e.object.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, object: &ObjectId) -> bool {
        self.entries.iter().any(|e| &e.object == object)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }
}

/// Hit and coverage ratios of one shared risk.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RiskStats {
    pub risk: ObjectId,
    /// |G|: nodes depending on the risk.
    pub dependents: usize,
    /// |O|: observations with a failed edge to the risk.
    pub observed: usize,
    pub hit_ratio: f64,
    pub coverage_ratio: f64,
}

impl RiskStats {
    fn new(risk: ObjectId, dependents: usize, observed: usize, signature: usize) -> Self {
        let hit_ratio = if dependents == 0 { 0.0 } else { observed as f64 / dependents as f64 };
        RiskStats { risk, dependents, observed, hit_ratio, coverage_ratio: observed as f64 / signature as f64 }
    }

    /// Exact `h = 1`, decided on counts rather than floats.
    pub fn is_full_hit(&self) -> bool {
        self.observed > 0 && self.observed == self.dependents
    }
}

/// Ratios for every risk of the model against the given signature.
pub fn compute_stats(model: &RiskModel, signature: &FailureSignature) -> Result<BTreeMap<ObjectId, RiskStats>> {
    if signature.is_empty() {
        return Err(Error::EmptySignature);
    }
    let mut observed = vec![0usize; model.risk_count()];
    for &o in signature.observations() {
        for r in model.failed_risks_of(o) {
            observed[r] += 1;
        }
    }
    Ok((0..model.risk_count())
        .map(|r| {
            let id = model.risk(r).clone();
            (id.clone(), RiskStats::new(id, model.nodes_of(r).len(), observed[r], signature.len()))
        })
        .collect())
}

/// Among risks with hit ratio 1, those tied at maximum coverage. `items` is
/// `(key, observed, dependents)`; the result keeps ascending key order.
fn max_cover_full_hits<K: Ord + Copy>(items: impl IntoIterator<Item = (K, usize, usize)>) -> Vec<K> {
    let mut best = 0usize;
    let mut out = Vec::new();
    for (key, observed, dependents) in items {
        if observed == 0 || observed != dependents || observed < best {
            continue;
        }
        if observed > best {
            best = observed;
            out.clear();
        }
        out.push(key);
    }
    out.sort();
    out
}

/// The candidate step: risks with hit ratio 1 that cover the greatest number of
/// unexplained observations, in [`ObjectId`] order. Empty if none has `h = 1`.
pub fn pick_candidates<'a>(stats: impl IntoIterator<Item = &'a RiskStats>) -> Vec<ObjectId> {
    let stats: Vec<&RiskStats> = stats.into_iter().collect();
    max_cover_full_hits(stats.iter().enumerate().map(|(i, s)| ((&s.risk, i), s.observed, s.dependents)))
        .into_iter()
        .map(|(id, _)| id.clone())
        .collect()
}

/// Working state of one run: P (unexplained), Q (explained), H and the model
/// after pruning.
struct State<'m> {
    model: &'m RiskModel,
    alive: Vec<bool>,
    live_degree: Vec<usize>,
    unexplained: BTreeSet<usize>,
    explained: BTreeSet<usize>,
    entries: Vec<HypothesisEntry>,
}

impl<'m> State<'m> {
    fn new(model: &'m RiskModel, signature: &FailureSignature) -> Self {
        State {
            model,
            alive: vec![true; model.node_count()],
            live_degree: (0..model.risk_count()).map(|r| model.nodes_of(r).len()).collect(),
            unexplained: signature.observations().iter().copied().collect(),
            explained: BTreeSet::new(),
            entries: Vec::new(),
        }
    }

    /// `(risk, |O|, |G|)` for K, the failed risks of unexplained observations.
    fn tally(&self) -> Vec<(usize, usize, usize)> {
        let mut observed: HashMap<usize, usize> = HashMap::new();
        for &o in &self.unexplained {
            for r in self.model.failed_risks_of(o) {
                *observed.entry(r).or_default() += 1;
            }
        }
        let mut out: Vec<_> = observed.into_iter().map(|(r, o)| (r, o, self.live_degree[r])).collect();
        out.sort_unstable();
        out
    }

    fn prune(&mut self, chosen: &[usize]) {
        let mut affected = BTreeSet::new();
        for &r in chosen {
            affected.extend(self.model.nodes_of(r).iter().copied().filter(|&n| self.alive[n]));
        }
        for &n in &affected {
            self.alive[n] = false;
            for &(r, _) in self.model.edges_of(n) {
                self.live_degree[r] -= 1;
            }
            if self.unexplained.remove(&n) {
                self.explained.insert(n);
            }
        }
    }

    fn keys(&self, nodes: impl IntoIterator<Item = usize>) -> Vec<NodeKey> {
        nodes.into_iter().map(|n| self.model.node(n).clone()).collect()
    }

    fn finish(self, iterations: usize) -> Hypothesis {
        debug_assert!(self.unexplained.is_disjoint(&self.explained));
        let residual = self.keys(self.unexplained.iter().copied());
        Hypothesis { model: self.model.kind().clone(), entries: self.entries, residual, iterations }
    }
}

/// Two-stage localization. `window` bounds how far back from the latest
/// change-log entry a change still counts as recent.
pub fn scout(model: &RiskModel, signature: &FailureSignature, changes: &ChangeLog, window: u64) -> Result<Hypothesis> {
    if signature.is_empty() {
        return Err(Error::EmptySignature);
    }
    let mut st = State::new(model, signature);
    let mut iterations = 0;
    while !st.unexplained.is_empty() {
        let chosen = max_cover_full_hits(st.tally());
        if chosen.is_empty() {
            break;
        }
        iterations += 1;
        for &r in &chosen {
            let covered = model.nodes_of(r).iter().copied().filter(|n| st.alive[*n] && st.unexplained.contains(n));
            let covered = st.keys(covered);
            st.entries.push(HypothesisEntry { object: model.risk(r).clone(), stage: Stage::HitCoverage, covered });
        }
        st.prune(&chosen);
        if iterations > signature.len() {
            return Err(Error::Invariant("candidate loop ran more rounds than there are observations".into()));
        }
    }

    if !st.unexplained.is_empty() {
        stage_two(&mut st, changes, window);
    }
    Ok(st.finish(iterations))
}

/// Attributes each leftover observation to its failed risks with the most
/// recent change inside the window.
fn stage_two(st: &mut State<'_>, changes: &ChangeLog, window: u64) {
    let Some(latest) = changes.latest_ts() else {
        return;
    };
    let since = latest.saturating_sub(window);
    let mut recent: HashMap<&ObjectId, u64> = HashMap::new();
    for e in changes.entries().iter().filter(|e| e.ts >= since) {
        let slot = recent.entry(&e.object).or_default();
        *slot = (*slot).max(e.ts);
    }

    let mut picked: BTreeMap<usize, (u64, Vec<usize>)> = BTreeMap::new();
    let mut attributed = Vec::new();
    for &o in &st.unexplained {
        let matches: Vec<(usize, u64)> = st
            .model
            .failed_risks_of(o)
            .filter_map(|r| recent.get(st.model.risk(r)).map(|&ts| (r, ts)))
            .collect();
        let Some(newest) = matches.iter().map(|&(_, ts)| ts).max() else {
            continue;
        };
        for (r, _) in matches.into_iter().filter(|&(_, ts)| ts == newest) {
            picked.entry(r).or_insert((newest, Vec::new())).1.push(o);
        }
        attributed.push(o);
    }

    let mut order: Vec<(usize, (u64, Vec<usize>))> = picked.into_iter().collect();
    order.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.0.cmp(&b.0)));
    for (r, (_, covered)) in order {
        let covered = st.keys(covered);
        st.entries.push(HypothesisEntry { object: st.model.risk(r).clone(), stage: Stage::ChangeLog, covered });
    }
    for o in attributed {
        st.unexplained.remove(&o);
        st.explained.insert(o);
    }
}

/// Threshold baseline: keeps risks whose hit ratio (against the full
/// signature) is at least `threshold`, then greedily adds the one covering the
/// most still-unexplained observations until nothing new can be covered.
/// Ties go to the smaller [`ObjectId`].
pub fn score(model: &RiskModel, signature: &FailureSignature, threshold: f64) -> Result<Hypothesis> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("hit-ratio threshold must be in (0, 1], got {threshold}")));
    }
    if signature.is_empty() {
        return Err(Error::EmptySignature);
    }
    let in_signature: BTreeSet<usize> = signature.observations().iter().copied().collect();
    let mut candidates: Vec<(usize, Vec<usize>)> = Vec::new();
    for r in 0..model.risk_count() {
        let dependents = model.nodes_of(r);
        let observed: Vec<usize> = dependents
            .iter()
            .copied()
            .filter(|&n| in_signature.contains(&n) && model.edge_status(n, r) == Some(Status::Fail))
            .collect();
        if observed.is_empty() {
            continue;
        }
        let full = observed.len() == dependents.len();
        if full || observed.len() as f64 >= threshold * dependents.len() as f64 {
            candidates.push((r, observed));
        }
    }

    let mut unexplained = in_signature;
    let mut used = vec![false; candidates.len()];
    let mut entries = Vec::new();
    let mut iterations = 0;
    loop {
        let mut best: Option<(usize, usize)> = None;
        for (i, (_, obs)) in candidates.iter().enumerate() {
            if used[i] {
                continue;
            }
            let gain = obs.iter().filter(|n| unexplained.contains(n)).count();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let Some((i, _)) = best else { break };
        used[i] = true;
        let (r, obs) = &candidates[i];
        let covered: Vec<NodeKey> =
            obs.iter().copied().filter(|n| unexplained.remove(n)).map(|n| model.node(n).clone()).collect();
        entries.push(HypothesisEntry { object: model.risk(*r).clone(), stage: Stage::HitCoverage, covered });
        iterations += 1;
    }
    let residual = unexplained.into_iter().map(|n| model.node(n).clone()).collect();
    Ok(Hypothesis { model: model.kind().clone(), entries, residual, iterations })
}

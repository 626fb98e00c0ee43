// SPDX-License-Identifier: Apache-2.0

//! Bipartite shared-risk models.
//!
//! One side holds affected elements: EPG pairs for a switch model, or
//! (switch, EPG pair) triplets for the controller model. The other side holds
//! the policy objects they rely on. Edges start as `Success`; augmenting with a
//! missing-rule report flips the edges named by each missing rule's
//! provenance to `Fail`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compiler::{CompiledPolicy, Rule, RuleProvenance};
use crate::equivalence::MissingRuleReport;
use crate::error::{Error, Result};
use crate::io;
use crate::object::{EpgPair, ObjectId, ObjectKind};
use crate::policy::NetworkPolicy;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Switch(String),
    Controller,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Switch(s) => write!(f, "switch model {s}"),
            ModelKind::Controller => f.write_str("controller model"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    #[default]
    Success,
    Fail,
}

/// Identity of an affected element. `scope` is set only in the controller model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeKey {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    pub pair: EpgPair,
}

impl NodeKey {
    pub fn new(scope: Option<String>, pair: EpgPair) -> Self {
        NodeKey { scope, pair }
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.scope {
            Some(s) => write!(f, "({s},{})", self.pair),
            None => write!(f, "{}", self.pair),
        }
    }
}

/// Which contract and filter back a node's rules on a given port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub port: u16,
    pub contract: String,
    pub filter: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskModel {
    kind: ModelKind,
    nodes: Vec<NodeKey>,
    risks: Vec<ObjectId>,
    /// Per node: `(risk index, status)` sorted by risk index.
    node_edges: Vec<Vec<(usize, Status)>>,
    /// Per risk: adjacent node indices, ascending.
    risk_nodes: Vec<Vec<usize>>,
    bindings: Vec<Vec<Binding>>,
    node_index: HashMap<NodeKey, usize>,
    risk_index: HashMap<ObjectId, usize>,
}

/// The failure signature: every node with at least one failed edge.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FailureSignature {
    observations: Vec<usize>,
}

impl FailureSignature {
    /// Node indices, ascending.
    pub fn observations(&self) -> &[usize] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn keys<'a>(&'a self, model: &'a RiskModel) -> impl Iterator<Item = &'a NodeKey> + 'a {
        self.observations.iter().map(|&n| model.node(n))
    }
}

/// Accumulates nodes, edges and bindings, then freezes them into a
/// [`RiskModel`] with sorted, indexed storage.
#[derive(Debug, Clone)]
pub struct RiskModelBuilder {
    kind: ModelKind,
    edges: BTreeMap<NodeKey, BTreeMap<ObjectId, Status>>,
    bindings: BTreeMap<NodeKey, BTreeMap<u16, Binding>>,
}

impl RiskModelBuilder {
    pub fn new(kind: ModelKind) -> Self {
        RiskModelBuilder { kind, edges: BTreeMap::new(), bindings: BTreeMap::new() }
    }

    /// Adds an edge; a `Fail` status wins over an existing `Success`.
    pub fn edge(&mut self, node: NodeKey, risk: ObjectId, status: Status) -> &mut Self {
        let slot = self.edges.entry(node).or_default().entry(risk).or_default();
        *slot = (*slot).max(status);
        self
    }

    pub fn binding(&mut self, node: NodeKey, binding: Binding) -> &mut Self {
        self.bindings.entry(node).or_default().insert(binding.port, binding);
        self
    }

    fn add_provenance(&mut self, prov: &RuleProvenance) {
        let key = node_key_for(&self.kind, &prov.rule);
        let with_switch = matches!(self.kind, ModelKind::Controller);
        for obj in prov.objects() {
            if obj.kind == ObjectKind::Switch && !with_switch {
                continue;
            }
            self.edge(key.clone(), obj, Status::Success);
        }
        self.binding(
            key,
            Binding { port: prov.rule.port, contract: prov.contract.clone(), filter: prov.filter.clone() },
        );
    }

    pub fn build(self) -> Result<RiskModel> {
        let risks: Vec<ObjectId> = self
            .edges
            .values()
            .flat_map(|m| m.keys().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let risk_index: HashMap<ObjectId, usize> = risks.iter().cloned().enumerate().map(|(i, r)| (r, i)).collect();
        for key in self.bindings.keys() {
            if !self.edges.contains_key(key) {
                return Err(Error::Input(format!("binding for node {key} which has no edges")));
            }
        }
        let mut nodes = Vec::with_capacity(self.edges.len());
        let mut node_edges = Vec::with_capacity(self.edges.len());
        let mut bindings = Vec::with_capacity(self.edges.len());
        let mut risk_nodes = vec![Vec::new(); risks.len()];
        let mut all_bindings = self.bindings;
        for (n, (key, edges)) in self.edges.into_iter().enumerate() {
            if edges.is_empty() {
                return Err(Error::Input(format!("node {key} has no edges")));
            }
            let row: Vec<(usize, Status)> = edges.into_iter().map(|(r, s)| (risk_index[&r], s)).collect();
            for &(r, _) in &row {
                risk_nodes[r].push(n);
            }
            node_edges.push(row);
            bindings.push(all_bindings.remove(&key).map(|m| m.into_values().collect()).unwrap_or_default());
            nodes.push(key);
        }
        let node_index = nodes.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        Ok(RiskModel { kind: self.kind, nodes, risks, node_edges, risk_nodes, bindings, node_index, risk_index })
    }
}

fn node_key_for(kind: &ModelKind, rule: &Rule) -> NodeKey {
    let pair = EpgPair::new(rule.src.clone(), rule.dst.clone()).expect("compiled rules never pair an EPG with itself");
    let scope = match kind {
        ModelKind::Controller => Some(rule.switch.clone()),
        ModelKind::Switch(_) => None,
    };
    NodeKey { scope, pair }
}

/// One node per EPG pair with rules on `switch`; edges to every object those
/// rules depend on except the switch itself.
pub fn build_switch_model(policy: &NetworkPolicy, compiled: &CompiledPolicy, switch: &str) -> Result<RiskModel> {
    if !policy.switches.contains(switch) {
        return Err(Error::Input(format!("unknown switch `{switch}`")));
    }
    let mut b = RiskModelBuilder::new(ModelKind::Switch(switch.to_string()));
    let mut any = false;
    for prov in compiled.for_switch(switch) {
        b.add_provenance(prov);
        any = true;
    }
    if !any {
        return Err(Error::Input(format!("switch `{switch}` hosts no rules")));
    }
    b.build()
}

/// One node per (switch, EPG pair) triplet across the whole deployment; the
/// switch is itself a shared risk.
pub fn build_controller_model(compiled: &CompiledPolicy) -> Result<RiskModel> {
    if compiled.is_empty() {
        return Err(Error::Input("cannot build a controller model from an empty compilation".into()));
    }
    let mut b = RiskModelBuilder::new(ModelKind::Controller);
    for prov in compiled.rules() {
        b.add_provenance(prov);
    }
    b.build()
}

impl RiskModel {
    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn risk_count(&self) -> usize {
        self.risks.len()
    }

    pub fn edge_count(&self) -> usize {
        self.node_edges.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> &[NodeKey] {
        &self.nodes
    }

    pub fn risks(&self) -> &[ObjectId] {
        &self.risks
    }

    pub fn node(&self, n: usize) -> &NodeKey {
        &self.nodes[n]
    }

    pub fn risk(&self, r: usize) -> &ObjectId {
        &self.risks[r]
    }

    pub fn node_id(&self, key: &NodeKey) -> Option<usize> {
        self.node_index.get(key).copied()
    }

    pub fn risk_id(&self, id: &ObjectId) -> Option<usize> {
        self.risk_index.get(id).copied()
    }

    /// `(risk, status)` edges of node `n`, ascending by risk.
    pub fn edges_of(&self, n: usize) -> &[(usize, Status)] {
        &self.node_edges[n]
    }

    pub fn nodes_of(&self, r: usize) -> &[usize] {
        &self.risk_nodes[r]
    }

    pub fn bindings_of(&self, n: usize) -> &[Binding] {
        &self.bindings[n]
    }

    pub fn edge_status(&self, n: usize, r: usize) -> Option<Status> {
        let row = &self.node_edges[n];
        row.binary_search_by_key(&r, |&(x, _)| x).ok().map(|i| row[i].1)
    }

    pub fn node_status(&self, n: usize) -> Status {
        if self.node_edges[n].iter().any(|&(_, s)| s == Status::Fail) {
            Status::Fail
        } else {
            Status::Success
        }
    }

    pub fn failed_risks_of(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.node_edges[n].iter().filter(|&&(_, s)| s == Status::Fail).map(|&(r, _)| r)
    }

    pub fn fail_edge_count(&self) -> usize {
        self.node_edges.iter().flatten().filter(|&&(_, s)| s == Status::Fail).count()
    }

    pub fn signature(&self) -> FailureSignature {
        FailureSignature {
            observations: (0..self.nodes.len()).filter(|&n| self.node_status(n) == Status::Fail).collect(),
        }
    }

    /// Switch that a node's rules live on.
    pub fn node_switch(&self, n: usize) -> Option<&str> {
        match (&self.nodes[n].scope, &self.kind) {
            (Some(s), _) => Some(s.as_str()),
            (None, ModelKind::Switch(s)) => Some(s.as_str()),
            (None, ModelKind::Controller) => None,
        }
    }

    fn mark_fail(&mut self, n: usize, r: usize) -> bool {
        let row = &mut self.node_edges[n];
        match row.binary_search_by_key(&r, |&(x, _)| x) {
            Ok(i) => {
                row[i].1 = Status::Fail;
                true
            }
            Err(_) => false,
        }
    }

    /// Provenance objects of a missing rule, as risk indices of this model.
    fn rule_risks(&self, n: usize, rule: &Rule) -> Result<Vec<usize>> {
        let binding = self.bindings[n].iter().find(|b| b.port == rule.port).ok_or_else(|| {
            Error::Consistency(format!("missing rule {rule} has no binding for port {} in {}", rule.port, self.kind))
        })?;
        let mut ids = vec![
            ObjectId::vrf(&rule.vrf),
            ObjectId::epg(&rule.src),
            ObjectId::epg(&rule.dst),
            ObjectId::contract(&binding.contract),
            ObjectId::filter(&binding.filter),
        ];
        if self.kind == ModelKind::Controller {
            ids.push(ObjectId::switch(&rule.switch));
        }
        ids.iter()
            .map(|id| {
                self.risk_id(id)
                    .filter(|&r| self.edge_status(n, r).is_some())
                    .ok_or_else(|| Error::Consistency(format!("missing rule {rule} names {id}, not a risk of node {}", self.nodes[n])))
            })
            .collect()
    }

    /// Marks, for every missing rule in scope, the edges from its node to the
    /// rule's own provenance objects as `Fail`. A switch model only consumes the
    /// missing rules of its switch. Extra rules are ignored.
    ///
    /// Idempotent: applying the same report twice changes nothing.
    pub fn augment(&self, report: &MissingRuleReport) -> Result<(RiskModel, FailureSignature)> {
        let mut model = self.clone();
        let scoped: Box<dyn Iterator<Item = &Rule>> = match &self.kind {
            ModelKind::Controller => Box::new(report.missing.iter()),
            ModelKind::Switch(s) => Box::new(report.per_switch.get(s).into_iter().flat_map(|d| d.missing.iter())),
        };
        for rule in scoped {
            let key = node_key_for(&model.kind, rule);
            let n = model
                .node_id(&key)
                .ok_or_else(|| Error::Consistency(format!("missing rule {rule} has no node {key} in {}", model.kind)))?;
            for r in model.rule_risks(n, rule)? {
                let marked = model.mark_fail(n, r);
                debug_assert!(marked);
            }
        }
        let sig = model.signature();
        Ok((model, sig))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = io::read_json(path)?;
        RiskModel::try_from(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, &ModelFile::from(self))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ModelFile::from(self)).expect("model dump is plain data")
    }
}

#[derive(Serialize, Deserialize)]
struct NodeEntry {
    #[serde(flatten)]
    key: NodeKey,
    status: Status,
    #[serde(default)]
    bindings: Vec<Binding>,
}

#[derive(Serialize, Deserialize)]
struct EdgeEntry {
    node: usize,
    risk: usize,
    status: Status,
}

/// Dump layout: `edges` reference `nodes` and `risks` by position.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    kind: ModelKind,
    nodes: Vec<NodeEntry>,
    risks: Vec<ObjectId>,
    edges: Vec<EdgeEntry>,
}

impl From<&RiskModel> for ModelFile {
    fn from(m: &RiskModel) -> Self {
        let nodes = (0..m.node_count())
            .map(|n| NodeEntry { key: m.nodes[n].clone(), status: m.node_status(n), bindings: m.bindings[n].clone() })
            .collect();
        let edges = (0..m.node_count())
            .flat_map(|n| m.node_edges[n].iter().map(move |&(risk, status)| EdgeEntry { node: n, risk, status }))
            .collect();
        ModelFile { kind: m.kind.clone(), nodes, risks: m.risks.clone(), edges }
    }
}

impl TryFrom<ModelFile> for RiskModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let mut b = RiskModelBuilder::new(f.kind);
        for e in &f.edges {
            let node = f.nodes.get(e.node).ok_or_else(|| Error::Input(format!("edge references node {}", e.node)))?;
            let risk = f.risks.get(e.risk).ok_or_else(|| Error::Input(format!("edge references risk {}", e.risk)))?;
            b.edge(node.key.clone(), risk.clone(), e.status);
        }
        for node in &f.nodes {
            if !b.edges.contains_key(&node.key) {
                return Err(Error::Input(format!("node {} has no edges", node.key)));
            }
            for binding in &node.bindings {
                b.binding(node.key.clone(), binding.clone());
            }
        }
        let model = b.build()?;
        for node in &f.nodes {
            let n = model.node_id(&node.key).expect("every listed node has edges");
            if model.node_status(n) != node.status {
                return Err(Error::Input(format!("node {} status disagrees with its edges", node.key)));
            }
        }
        Ok(model)
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Hand-built policies and scripted incidents.

use crate::changelog::{ChangeAction, ChangeLog, ChangeLogEntry};
use crate::compiler::{compile, CompiledPolicy};
use crate::correlate::{correlate, FaultLog, FaultLogEntry, RootCauseReport, SignatureSet, UNRESPONSIVE_SWITCH_CODE};
use crate::equivalence::{check_equivalence, MissingRuleReport};
use crate::error::Result;
use crate::localize::{scout, Hypothesis, DEFAULT_WINDOW};
use crate::object::{EpgPair, ObjectId};
use crate::policy::NetworkPolicy;
use crate::risk::{build_controller_model, build_switch_model, FailureSignature, ModelKind, NodeKey, RiskModel, RiskModelBuilder, Status};
use crate::sim::plan::{Fault, FaultPlan};
use crate::tcam::{deploy, DeployOptions, Deployment};

/// Three EPGs on three switches in VRF 101: Web talks to App on port 80, App
/// talks to DB on ports 80 and 700.
pub fn three_tier() -> NetworkPolicy {
    let mut p = NetworkPolicy::new();
    p.add_vrf("101");
    for s in ["S1", "S2", "S3"] {
        p.add_switch(s);
    }
    p.add_epg("Web", "101", [("EP1", "S1")])
        .add_epg("App", "101", [("EP2", "S2")])
        .add_epg("DB", "101", [("EP3", "S3")]);
    p.add_filter("port80", 80).add_filter("port700", 700);
    p.add_contract("Web-App", [("Web", "App")], ["port80"])
        .add_contract("App-DB", [("App", "DB")], ["port80", "port700"]);
    p
}

/// A four-pair model over filters F1..F3 where F2's dependents all failed, F3
/// has two failed dependents out of three and F1 never failed. F3 carries the
/// newest change-log entry.
pub fn partial_failure_example() -> (RiskModel, ChangeLog) {
    let node = |a: &str, b: &str| NodeKey::new(None, EpgPair::new(a, b).expect("distinct names"));
    let f = |i: u32| ObjectId::filter(format!("F{i}"));
    let mut b = RiskModelBuilder::new(ModelKind::Switch("S1".into()));
    b.edge(node("A", "B"), f(1), Status::Success).edge(node("A", "B"), f(2), Status::Fail);
    b.edge(node("C", "D"), f(2), Status::Fail).edge(node("C", "D"), f(3), Status::Fail);
    b.edge(node("E", "F"), f(3), Status::Fail).edge(node("E", "F"), f(1), Status::Success);
    b.edge(node("G", "H"), f(3), Status::Success).edge(node("G", "H"), f(1), Status::Success);
    let model = b.build().expect("static model is well formed");
    let changes = ChangeLog::new(vec![
        ChangeLogEntry::new(10, f(1), ChangeAction::Modify),
        ChangeLogEntry::new(20, f(2), ChangeAction::Add),
        ChangeLogEntry::new(480, f(3), ChangeAction::Modify),
    ])
    .expect("entries are ordered");
    (model, changes)
}

/// A scripted incident: a policy, what goes wrong while deploying it, and
/// the logs an operator would have at hand.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub policy: NetworkPolicy,
    pub plan: FaultPlan,
    pub deploy: DeployOptions,
    pub changes: ChangeLog,
    /// Device events not raised by the deployment itself.
    pub faults: Vec<FaultLogEntry>,
    pub model: ModelKind,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub compiled: CompiledPolicy,
    pub deployment: Deployment,
    pub report: MissingRuleReport,
    pub model: RiskModel,
    pub signature: FailureSignature,
    pub hypothesis: Hypothesis,
    pub fault_log: FaultLog,
    pub root_causes: RootCauseReport,
}

impl Scenario {
    /// Compile, deploy, diff, localize with [`scout`] and correlate with the
    /// built-in signatures.
    pub fn run(&self) -> Result<ScenarioOutcome> {
        let compiled = compile(&self.policy);
        let deployment = deploy(&compiled, &self.plan, &self.deploy)?;
        let report = check_equivalence(compiled.logical_rules(), deployment.deployed_rules());
        let base = match &self.model {
            ModelKind::Switch(s) => build_switch_model(&self.policy, &compiled, s)?,
            ModelKind::Controller => build_controller_model(&compiled)?,
        };
        let (model, signature) = base.augment(&report)?;
        let hypothesis = scout(&model, &signature, &self.changes, DEFAULT_WINDOW)?;
        let mut events = self.faults.clone();
        events.extend(deployment.fault_log.iter().cloned());
        let fault_log = FaultLog::from_unordered(events)?;
        let root_causes = correlate(&hypothesis, &self.changes, &fault_log, &SignatureSet::builtin(), 0);
        Ok(ScenarioOutcome { compiled, deployment, report, model, signature, hypothesis, fault_log, root_causes })
    }
}

/// The three-tier policy plus a Cache EPG on S3, with two filters attached to
/// App-DB one after the other. S3 fits only the rules that existed before the
/// second addition, so that filter's S3 rules overflow.
pub fn tcam_overflow() -> Scenario {
    let mut policy = three_tier();
    policy.add_epg("Cache", "101", [("EP4", "S3")]);
    policy.add_filter("port3306", 3306).add_filter("port6379", 6379);
    policy.add_contract("App-Cache", [("App", "Cache")], ["port80"]);
    policy.add_contract("App-DB", [("App", "DB")], ["port80", "port700", "port3306", "port6379"]);
    let changes = ChangeLog::new(vec![
        ChangeLogEntry::new(100, ObjectId::epg("Cache"), ChangeAction::Add),
        ChangeLogEntry::new(100, ObjectId::contract("App-Cache"), ChangeAction::Add),
        ChangeLogEntry::new(200, ObjectId::filter("port3306"), ChangeAction::Add),
        ChangeLogEntry::new(300, ObjectId::filter("port6379"), ChangeAction::Add),
    ])
    .expect("entries are ordered");
    // S3 ordering: App-Cache (2 rules), then App-DB per filter (2 each).
    let deploy = DeployOptions { capacity: [("S3".to_string(), 8)].into(), now: 300, ..Default::default() };
    Scenario {
        name: "tcam-overflow",
        policy,
        plan: FaultPlan::default(),
        deploy,
        changes,
        faults: Vec::new(),
        model: ModelKind::Switch("S3".into()),
    }
}

/// S2 stops answering the controller at t=150. A Cache EPG and its contract
/// with App are added afterwards, so none of their S2 rules arrive.
pub fn unresponsive_switch() -> Scenario {
    let mut policy = three_tier();
    policy.add_epg("Cache", "101", [("EP4", "S2")]);
    policy.add_filter("port6379", 6379);
    policy.add_contract("App-Cache", [("App", "Cache")], ["port6379"]);
    let changes = ChangeLog::new(vec![
        ChangeLogEntry::new(50, ObjectId::filter("port700"), ChangeAction::Modify),
        ChangeLogEntry::new(200, ObjectId::filter("port6379"), ChangeAction::Add),
        ChangeLogEntry::new(200, ObjectId::epg("Cache"), ChangeAction::Add),
        ChangeLogEntry::new(210, ObjectId::contract("App-Cache"), ChangeAction::Add),
    ])
    .expect("entries are ordered");
    let plan = FaultPlan::new(vec![Fault::full(ObjectId::contract("App-Cache")).on_switch("S2")], 0);
    let faults = vec![FaultLogEntry {
        start: 150,
        end: None,
        switch: "S2".into(),
        code: UNRESPONSIVE_SWITCH_CODE.into(),
        message: "switch S2 not responding to policy updates".into(),
    }];
    Scenario {
        name: "unresponsive-switch",
        policy,
        plan,
        deploy: DeployOptions { now: 210, ..Default::default() },
        changes,
        faults,
        model: ModelKind::Switch("S2".into()),
    }
}

/// Two switches both hosting every EPG of a dense policy; S1 reboots and comes
/// back with an empty TCAM. `filters` per contract scales the rule count: each
/// switch holds `50 contracts * 10 pairs * filters * 2` rules.
pub fn too_many_missing(filters: usize) -> Scenario {
    let mut policy = NetworkPolicy::new();
    policy.add_vrf("vrf1").add_switch("S1").add_switch("S2");
    let epgs = 100;
    for e in 0..epgs {
        policy.add_epg(format!("E{e:03}"), "vrf1", [(format!("ep{e}a"), "S1"), (format!("ep{e}b"), "S2")]);
    }
    for f in 0..filters {
        policy.add_filter(format!("F{f:02}"), 1000 + f as u16);
    }
    let names: Vec<String> = (0..filters).map(|f| format!("F{f:02}")).collect();
    for c in 0..50usize {
        let pairs: Vec<(String, String)> = (0..10usize)
            .map(|k| {
                let a = (2 * c) % epgs;
                let b = (2 * c + 1 + 2 * k) % epgs;
                (format!("E{a:03}"), format!("E{b:03}"))
            })
            .collect();
        policy.add_contract(format!("C{c:02}"), pairs, names.clone());
    }
    let plan = FaultPlan::new(vec![Fault::full(ObjectId::switch("S1"))], 0);
    let faults = vec![FaultLogEntry {
        start: 10,
        end: None,
        switch: "S1".into(),
        code: UNRESPONSIVE_SWITCH_CODE.into(),
        message: "switch S1 unresponsive after reboot".into(),
    }];
    Scenario {
        name: "too-many-missing",
        policy,
        plan,
        deploy: DeployOptions { now: 20, ..Default::default() },
        changes: ChangeLog::default(),
        faults,
        model: ModelKind::Controller,
    }
}

/// Scenario by CLI name.
pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "tcam-overflow" => Some(tcam_overflow()),
        "unresponsive-switch" => Some(unresponsive_switch()),
        "too-many-missing" => Some(too_many_missing(11)),
        _ => None,
    }
}

pub const NAMES: [&str; 3] = ["tcam-overflow", "unresponsive-switch", "too-many-missing"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlate::{TCAM_OVERFLOW, UNRESPONSIVE_SWITCH};
    use crate::localize::{score, Stage};
    use crate::policy::validate_policy;

    #[test]
    fn scenarios_are_valid_policies() {
        assert!(validate_policy(&three_tier()).is_empty());
        for name in NAMES {
            let s = by_name(name).unwrap();
            assert!(validate_policy(&s.policy).is_empty(), "{name}");
        }
    }

    #[test]
    fn partial_failure_example_shape() {
        let (m, changes) = partial_failure_example();
        let sig = m.signature();
        assert_eq!(sig.len(), 3);
        let h = scout(&m, &sig, &changes, DEFAULT_WINDOW).unwrap();
        let got: Vec<(ObjectId, Stage)> = h.entries.iter().map(|e| (e.object.clone(), e.stage)).collect();
        assert_eq!(got, vec![(ObjectId::filter("F2"), Stage::HitCoverage), (ObjectId::filter("F3"), Stage::ChangeLog)]);
        assert_eq!(score(&m, &sig, 1.0).unwrap().objects(), [ObjectId::filter("F2")].into());
    }

    #[test]
    fn overflow_hits_last_filter_only() {
        let out = tcam_overflow().run().unwrap();
        assert_eq!(out.deployment.fault_log.len(), 1);
        assert!(out.report.missing.iter().all(|r| r.switch == "S3" && r.port == 6379));
        assert_eq!(out.report.missing.len(), 2);
        assert_eq!(out.root_causes.label_of(&ObjectId::filter("port6379")), Some(TCAM_OVERFLOW));
    }

    #[test]
    fn unresponsive_switch_names_the_switch() {
        let out = unresponsive_switch().run().unwrap();
        let a = out.root_causes.attributions.iter().find(|a| a.label == UNRESPONSIVE_SWITCH).unwrap();
        assert!(a.evidence.faults.iter().all(|f| f.switch == "S2"));
        assert!(!a.evidence.faults.is_empty());
    }
}

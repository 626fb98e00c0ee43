// SPDX-License-Identifier: Apache-2.0

//! Event correlation: ties hypothesis objects to physical root causes.
//!
//! For each object the engine looks up its controller change entries, keeps
//! the device fault entries on the object's switches that were active at one
//! of those change times, and labels the object with the first configured
//! signature any of them matches.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::changelog::{ChangeLog, ChangeLogEntry};
use crate::error::{Error, Result};
use crate::io;
use crate::localize::Hypothesis;
use crate::object::{ObjectId, ObjectKind};
use crate::risk::ModelKind;

pub const TCAM_OVERFLOW_CODE: &str = "TCAM_OVERFLOW";
pub const UNRESPONSIVE_SWITCH_CODE: &str = "SWITCH_UNRESPONSIVE";

pub const TCAM_OVERFLOW: &str = "TcamOverflow";
pub const UNRESPONSIVE_SWITCH: &str = "UnresponsiveSwitch";
pub const UNKNOWN: &str = "Unknown";

/// A device fault record. `end` is absent while the fault is still active.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultLogEntry {
    pub start: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<u64>,
    pub switch: String,
    pub code: String,
    pub message: String,
}

impl FaultLogEntry {
    /// Whether the fault was active at `ts`, widening the interval by `slack`
    /// on both sides.
    pub fn active_at(&self, ts: u64, slack: u64) -> bool {
        self.start <= ts.saturating_add(slack) && self.end.is_none_or(|end| end.saturating_add(slack) >= ts)
    }
}

/// Fault entries ordered by start time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct FaultLog {
    entries: Vec<FaultLogEntry>,
}

impl FaultLog {
    pub fn new(entries: Vec<FaultLogEntry>) -> Result<Self> {
        for e in &entries {
            if e.end.is_some_and(|end| end < e.start) {
                return Err(Error::Input(format!("fault `{}` on {} ends before it starts", e.code, e.switch)));
            }
        }
        if entries.windows(2).any(|w| w[1].start < w[0].start) {
            return Err(Error::Input("fault log is not ordered by start time".into()));
        }
        Ok(FaultLog { entries })
    }

    pub fn from_unordered(mut entries: Vec<FaultLogEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.start);
        FaultLog::new(entries)
    }

    pub fn entries(&self) -> &[FaultLogEntry] {
        &self.entries
    }

    pub fn load(path: &Path) -> Result<Self> {
        FaultLog::new(io::read_jsonl(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_jsonl(path, &self.entries)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Matcher {
    CodeEquals(String),
    MessageContains(String),
}

impl Matcher {
    pub fn matches(&self, entry: &FaultLogEntry) -> bool {
        match self {
            Matcher::CodeEquals(code) => entry.code == *code,
            Matcher::MessageContains(needle) => entry.message.contains(needle.as_str()),
        }
    }
}

/// A known-fault signature, e.g. `{"name": "TcamOverflow", "codeEquals": "TCAM_OVERFLOW"}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSignature {
    pub name: String,
    #[serde(flatten)]
    pub matcher: Matcher,
}

/// Ordered signatures with unique names; the first match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct SignatureSet {
    signatures: Vec<FaultSignature>,
}

impl SignatureSet {
    pub fn new(signatures: Vec<FaultSignature>) -> Result<Self> {
        let mut names = BTreeSet::new();
        for s in &signatures {
            if s.name == UNKNOWN {
                return Err(Error::Config(format!("signature name `{UNKNOWN}` is reserved")));
            }
            if !names.insert(s.name.as_str()) {
                return Err(Error::Config(format!("duplicate signature name `{}`", s.name)));
            }
        }
        Ok(SignatureSet { signatures })
    }

    pub fn builtin() -> Self {
        SignatureSet {
            signatures: vec![
                FaultSignature {
                    name: TCAM_OVERFLOW.into(),
                    matcher: Matcher::CodeEquals(TCAM_OVERFLOW_CODE.into()),
                },
                FaultSignature {
                    name: UNRESPONSIVE_SWITCH.into(),
                    matcher: Matcher::CodeEquals(UNRESPONSIVE_SWITCH_CODE.into()),
                },
            ],
        }
    }

    pub fn signatures(&self) -> &[FaultSignature] {
        &self.signatures
    }

    pub fn load(path: &Path) -> Result<Self> {
        SignatureSet::new(io::read_json(path)?)
    }

    fn classify<'a>(&self, faults: impl IntoIterator<Item = &'a FaultLogEntry> + Clone) -> Option<&str> {
        self.signatures
            .iter()
            .find(|s| faults.clone().into_iter().any(|f| s.matcher.matches(f)))
            .map(|s| s.name.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub changes: Vec<ChangeLogEntry>,
    pub faults: Vec<FaultLogEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub object: ObjectId,
    /// A signature name, or `Unknown`.
    pub label: String,
    pub evidence: Evidence,
}

impl fmt::Display for Attribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.object, self.label)?;
        let switches: BTreeSet<&str> = self.evidence.faults.iter().map(|e| e.switch.as_str()).collect();
        if !switches.is_empty() {
            write!(f, " on {}", switches.into_iter().collect::<Vec<_>>().join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootCauseReport {
    pub attributions: Vec<Attribution>,
}

impl RootCauseReport {
    pub fn label_of(&self, object: &ObjectId) -> Option<&str> {
        self.attributions.iter().find(|a| &a.object == object).map(|a| a.label.as_str())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }
}

/// Switches whose fault entries are relevant to a hypothesis entry: the scopes
/// of the observations it covers, plus the object itself when it is a switch.
fn relevant_switches<'a>(model: &'a ModelKind, object: &'a ObjectId, covered: &'a [crate::risk::NodeKey]) -> BTreeSet<&'a str> {
    let mut out: BTreeSet<&str> = covered
        .iter()
        .filter_map(|k| match (&k.scope, model) {
            (Some(s), _) => Some(s.as_str()),
            (None, ModelKind::Switch(s)) => Some(s.as_str()),
            (None, ModelKind::Controller) => None,
        })
        .collect();
    if let ModelKind::Switch(s) = model {
        out.insert(s.as_str());
    }
    if object.kind == ObjectKind::Switch {
        out.insert(object.name.as_str());
    }
    out
}

/// Builds one attribution per hypothesis object, in hypothesis order.
/// `slack` widens each fault's activity interval on both sides.
pub fn correlate(
    hypothesis: &Hypothesis,
    changes: &ChangeLog,
    faults: &FaultLog,
    signatures: &SignatureSet,
    slack: u64,
) -> RootCauseReport {
    let mut by_object: BTreeMap<&ObjectId, Vec<&ChangeLogEntry>> = BTreeMap::new();
    for e in changes.entries() {
        by_object.entry(&e.object).or_default().push(e);
    }

    let mut seen = BTreeSet::new();
    let mut attributions = Vec::new();
    for entry in &hypothesis.entries {
        if !seen.insert(&entry.object) {
            continue;
        }
        let object_changes: Vec<&ChangeLogEntry> = by_object.get(&entry.object).cloned().unwrap_or_default();
        let switches = relevant_switches(&hypothesis.model, &entry.object, &entry.covered);
        let active: Vec<&FaultLogEntry> = faults
            .entries()
            .iter()
            .filter(|f| switches.contains(f.switch.as_str()))
            .filter(|f| object_changes.iter().any(|c| f.active_at(c.ts, slack)))
            .collect();
        let label = signatures.classify(active.iter().copied()).unwrap_or(UNKNOWN).to_string();
        attributions.push(Attribution {
            object: entry.object.clone(),
            label,
            evidence: Evidence {
                changes: object_changes.into_iter().cloned().collect(),
                faults: active.into_iter().cloned().collect(),
            },
        });
    }
    RootCauseReport { attributions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::changelog::ChangeAction;
    use crate::localize::{HypothesisEntry, Stage};
    use crate::object::EpgPair;
    use crate::risk::NodeKey;

    fn hypothesis(objects: &[ObjectId]) -> Hypothesis {
        let covered = vec![NodeKey::new(None, EpgPair::new("App", "DB").unwrap())];
        Hypothesis {
            model: ModelKind::Switch("S3".into()),
            entries: objects
                .iter()
                .map(|o| HypothesisEntry { object: o.clone(), stage: Stage::HitCoverage, covered: covered.clone() })
                .collect(),
            residual: vec![],
            iterations: 1,
        }
    }

    fn fault(start: u64, end: Option<u64>, switch: &str, code: &str) -> FaultLogEntry {
        FaultLogEntry { start, end, switch: switch.into(), code: code.into(), message: format!("{code} on {switch}") }
    }

    fn adds(items: &[(u64, &str)]) -> ChangeLog {
        ChangeLog::new(
            items.iter().map(|&(ts, f)| ChangeLogEntry::new(ts, ObjectId::filter(f), ChangeAction::Add)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn filters_added_during_overflow_are_tagged() {
        let h = hypothesis(&[ObjectId::filter("f3"), ObjectId::filter("f4")]);
        let changes = adds(&[(10, "f1"), (20, "f2"), (30, "f3"), (40, "f4")]);
        let log = FaultLog::new(vec![fault(25, None, "S3", TCAM_OVERFLOW_CODE)]).unwrap();
        let report = correlate(&h, &changes, &log, &SignatureSet::builtin(), 0);
        for a in &report.attributions {
            assert_eq!(a.label, TCAM_OVERFLOW, "{a}");
            assert_eq!(a.evidence.faults.len(), 1);
            assert_eq!(a.evidence.changes.len(), 1);
        }
    }

    #[test]
    fn unresponsive_window_and_other_switches() {
        let h = hypothesis(&[ObjectId::filter("f2"), ObjectId::filter("f3")]);
        let changes = adds(&[(10, "f1"), (20, "f2"), (30, "f3")]);
        let log = FaultLog::new(vec![
            fault(5, Some(25), "S3", UNRESPONSIVE_SWITCH_CODE),
            fault(28, Some(35), "S1", UNRESPONSIVE_SWITCH_CODE),
        ])
        .unwrap();
        let report = correlate(&h, &changes, &log, &SignatureSet::builtin(), 0);
        assert_eq!(report.label_of(&ObjectId::filter("f2")), Some(UNRESPONSIVE_SWITCH));
        // f3 changed after S3 recovered; the S1 outage is on another switch.
        assert_eq!(report.label_of(&ObjectId::filter("f3")), Some(UNKNOWN));
        assert!(report.attributions[1].evidence.faults.is_empty());
        // A slack of 5 reaches the end of the S3 fault.
        let wide = correlate(&h, &changes, &log, &SignatureSet::builtin(), 5);
        assert_eq!(wide.label_of(&ObjectId::filter("f3")), Some(UNRESPONSIVE_SWITCH));
    }

    #[test]
    fn no_changes_means_unknown_without_evidence() {
        let h = hypothesis(&[ObjectId::epg("DB")]);
        let log = FaultLog::new(vec![fault(0, None, "S3", TCAM_OVERFLOW_CODE)]).unwrap();
        let report = correlate(&h, &adds(&[(3, "f1")]), &log, &SignatureSet::builtin(), 0);
        assert_eq!(report.attributions.len(), 1);
        assert_eq!(report.attributions[0].label, UNKNOWN);
        assert_eq!(report.attributions[0].evidence, Evidence::default());
    }

    #[test]
    fn unmatched_fault_stays_unknown_but_is_evidence() {
        let h = hypothesis(&[ObjectId::filter("f1")]);
        let log = FaultLog::new(vec![fault(0, None, "S3", "LINK_FLAP")]).unwrap();
        let report = correlate(&h, &adds(&[(3, "f1")]), &log, &SignatureSet::builtin(), 0);
        assert_eq!(report.attributions[0].label, UNKNOWN);
        assert_eq!(report.attributions[0].evidence.faults.len(), 1);
    }

    #[test]
    fn first_signature_wins() {
        let sigs = SignatureSet::new(vec![
            FaultSignature { name: "Msg".into(), matcher: Matcher::MessageContains("on S3".into()) },
            FaultSignature { name: "Code".into(), matcher: Matcher::CodeEquals(TCAM_OVERFLOW_CODE.into()) },
        ])
        .unwrap();
        let h = hypothesis(&[ObjectId::filter("f1")]);
        let log = FaultLog::new(vec![fault(0, None, "S3", TCAM_OVERFLOW_CODE)]).unwrap();
        assert_eq!(correlate(&h, &adds(&[(3, "f1")]), &log, &sigs, 0).attributions[0].label, "Msg");
    }

    #[test]
    fn signature_config_schema() {
        let sigs: Vec<FaultSignature> = serde_json::from_str(
            r#"[{"name":"A","codeEquals":"X"},{"name":"B","messageContains":"down"}]"#,
        )
        .unwrap();
        assert_eq!(sigs[0].matcher, Matcher::CodeEquals("X".into()));
        assert_eq!(sigs[1].matcher, Matcher::MessageContains("down".into()));
        let dup = vec![sigs[0].clone(), sigs[0].clone()];
        assert!(SignatureSet::new(dup).is_err());
    }

    #[test]
    fn fault_log_validation() {
        assert!(FaultLog::new(vec![fault(5, Some(4), "S1", "X")]).is_err());
        assert!(FaultLog::new(vec![fault(5, None, "S1", "X"), fault(4, None, "S1", "X")]).is_err());
        let line = r#"{"start":3,"switch":"S1","code":"X","message":"m"}"#;
        let e: FaultLogEntry = serde_json::from_str(line).unwrap();
        assert_eq!(e.end, None);
        assert_eq!(serde_json::to_string(&e).unwrap(), line);
    }
}

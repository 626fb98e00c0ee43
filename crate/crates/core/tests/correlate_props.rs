// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use scout_core::correlate::{TCAM_OVERFLOW_CODE, UNKNOWN, UNRESPONSIVE_SWITCH_CODE};
use scout_core::localize::HypothesisEntry;
use scout_core::risk::NodeKey;
use scout_core::{
    correlate, ChangeAction, ChangeLog, ChangeLogEntry, EpgPair, FaultLog, FaultLogEntry, Hypothesis, ModelKind, ObjectId,
    SignatureSet, Stage,
};

const SWITCHES: [&str; 3] = ["S1", "S2", "S3"];
const CODES: [&str; 3] = [TCAM_OVERFLOW_CODE, UNRESPONSIVE_SWITCH_CODE, "LINK_FLAP"];

fn object(i: usize) -> ObjectId {
    match i % 3 {
        0 => ObjectId::filter(format!("f{i}")),
        1 => ObjectId::epg(format!("e{i}")),
        _ => ObjectId::switch(SWITCHES[(i / 3) % SWITCHES.len()]),
    }
}

#[derive(Debug, Clone)]
struct Case {
    hypothesis: Hypothesis,
    changes: ChangeLog,
    faults: Vec<FaultLogEntry>,
    slack: u64,
}

fn fault() -> impl Strategy<Value = FaultLogEntry> {
    (0u64..100, proptest::option::of(0u64..40), 0..SWITCHES.len(), 0..CODES.len()).prop_map(|(start, len, s, c)| FaultLogEntry {
        start,
        end: len.map(|l| start + l),
        switch: SWITCHES[s].into(),
        code: CODES[c].into(),
        message: format!("{} on {}", CODES[c], SWITCHES[s]),
    })
}

fn case() -> impl Strategy<Value = Case> {
    (
        proptest::option::of(0..SWITCHES.len()),
        proptest::collection::btree_set(0usize..6, 1..4),
        proptest::collection::vec((0usize..6, 0u64..120), 0..10),
        proptest::collection::vec(fault(), 0..6),
        0u64..10,
    )
        .prop_map(|(switch, objs, changes, faults, slack)| {
            let model = match switch {
                Some(s) => ModelKind::Switch(SWITCHES[s].into()),
                None => ModelKind::Controller,
            };
            let entries = objs
                .into_iter()
                .map(|i| {
                    let scope = match model {
                        ModelKind::Controller => Some(SWITCHES[(i + 1) % SWITCHES.len()].to_string()),
                        ModelKind::Switch(_) => None,
                    };
                    HypothesisEntry {
                        object: object(i),
                        stage: Stage::HitCoverage,
                        covered: vec![NodeKey::new(scope, EpgPair::new("a", "b").unwrap())],
                    }
                })
                .collect();
            let hypothesis = Hypothesis { model, entries, residual: vec![], iterations: 1 };
            let changes = ChangeLog::from_unordered(
                changes.into_iter().map(|(i, ts)| ChangeLogEntry::new(ts, object(i), ChangeAction::Modify)).collect(),
            );
            Case { hypothesis, changes, faults, slack }
        })
}

fn relevant(h: &Hypothesis, e: &HypothesisEntry, switch: &str) -> bool {
    let model_switch = match &h.model {
        ModelKind::Switch(s) => Some(s.as_str()),
        ModelKind::Controller => None,
    };
    model_switch == Some(switch)
        || e.covered.iter().any(|k| k.scope.as_deref() == Some(switch))
        || (e.object.kind == scout_core::ObjectKind::Switch && e.object.name == switch)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn evidence_is_valid(c in case()) {
        let log = FaultLog::from_unordered(c.faults.clone()).unwrap();
        let sigs = SignatureSet::builtin();
        let report = correlate(&c.hypothesis, &c.changes, &log, &sigs, c.slack);
        prop_assert_eq!(report.attributions.len(), c.hypothesis.entries.len());
        for (a, e) in report.attributions.iter().zip(&c.hypothesis.entries) {
            prop_assert_eq!(&a.object, &e.object);
            let own: Vec<_> = c.changes.for_object(&a.object).cloned().collect();
            prop_assert_eq!(&a.evidence.changes, &own);
            // Exactly the faults on a relevant switch overlapping one of the object's changes.
            let expected: Vec<&FaultLogEntry> = log
                .entries()
                .iter()
                .filter(|f| relevant(&c.hypothesis, e, &f.switch))
                .filter(|f| own.iter().any(|ch| f.start <= ch.ts + c.slack && f.end.is_none_or(|end| ch.ts <= end + c.slack)))
                .collect();
            prop_assert_eq!(a.evidence.faults.iter().collect::<Vec<_>>(), expected);
            let label = sigs
                .signatures()
                .iter()
                .find(|s| a.evidence.faults.iter().any(|f| s.matcher.matches(f)))
                .map_or(UNKNOWN, |s| s.name.as_str());
            prop_assert_eq!(a.label.as_str(), label);
        }
    }

    #[test]
    fn unrelated_faults_change_nothing(c in case(), extra in proptest::collection::vec(fault(), 1..4)) {
        let sigs = SignatureSet::builtin();
        let base = correlate(&c.hypothesis, &c.changes, &FaultLog::from_unordered(c.faults.clone()).unwrap(), &sigs, c.slack);
        // Push the extra faults past every change plus slack.
        let shift = c.changes.latest_ts().unwrap_or(0) + c.slack + 1;
        let mut more = c.faults.clone();
        more.extend(extra.into_iter().map(|mut f| {
            f.start += shift;
            f.end = f.end.map(|e| e + shift);
            f
        }));
        let after = correlate(&c.hypothesis, &c.changes, &FaultLog::from_unordered(more).unwrap(), &sigs, c.slack);
        prop_assert_eq!(base, after);
    }

    #[test]
    fn wider_slack_only_adds_evidence(c in case(), more in 0u64..20) {
        let log = FaultLog::from_unordered(c.faults.clone()).unwrap();
        let sigs = SignatureSet::builtin();
        let narrow = correlate(&c.hypothesis, &c.changes, &log, &sigs, c.slack);
        let wide = correlate(&c.hypothesis, &c.changes, &log, &sigs, c.slack + more);
        for (a, b) in narrow.attributions.iter().zip(&wide.attributions) {
            prop_assert!(a.evidence.faults.iter().all(|f| b.evidence.faults.contains(f)));
            if a.label != UNKNOWN {
                prop_assert!(b.label != UNKNOWN);
            }
        }
    }
}

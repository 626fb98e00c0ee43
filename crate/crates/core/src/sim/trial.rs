// SPDX-License-Identifier: Apache-2.0

//! End-to-end localization trials and parameter sweeps.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changelog::ChangeLog;
use crate::compiler::{compile, CompiledPolicy};
use crate::equivalence::check_equivalence;
use crate::error::{Error, Result};
use crate::localize::{score, scout, Hypothesis, DEFAULT_WINDOW};
use crate::object::ObjectId;
use crate::policy::NetworkPolicy;
use crate::risk::{build_controller_model, build_switch_model, ModelKind, RiskModel, Status};
use crate::sim::generate::{generate_policy, GeneratorConfig};
use crate::sim::inject::{faultable_objects, inject_faults, synthesize_changelog, ChangeLogConfig, InjectConfig};
use crate::sim::plan::FaultPlan;
use crate::tcam::{deploy, DeployOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Scout,
    /// Threshold baseline with the given hit-ratio threshold.
    Score(f64),
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Scout => f.write_str("scout"),
            Algorithm::Score(t) => write!(f, "score-{t}"),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    /// `scout`, `score` (threshold 1) or `score-<threshold>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scout" => Ok(Algorithm::Scout),
            "score" => Ok(Algorithm::Score(1.0)),
            _ => s
                .strip_prefix("score-")
                .and_then(|t| t.parse::<f64>().ok())
                .map(Algorithm::Score)
                .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Which risk model a trial localizes on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelScope {
    /// One controller model over every switch; faults are unscoped.
    Controller,
    /// Per trial, one switch is drawn at random; faults are scoped to it and
    /// localization runs on its switch model.
    Switch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialParams {
    pub model: ModelKind,
    pub window: u64,
}

impl Default for TrialParams {
    fn default() -> Self {
        TrialParams { model: ModelKind::Controller, window: DEFAULT_WINDOW }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialResult {
    pub ground_truth: BTreeSet<ObjectId>,
    pub hypothesis: BTreeSet<ObjectId>,
    pub precision: f64,
    pub recall: f64,
    pub gamma: f64,
    /// Objects the failed nodes depend on.
    pub suspects: usize,
    pub runtime_millis: f64,
}

/// `(precision, recall)`. An empty hypothesis has precision 1 only when there
/// is nothing to find; recall of an empty ground truth is 1.
pub fn precision_recall(ground_truth: &BTreeSet<ObjectId>, hypothesis: &BTreeSet<ObjectId>) -> (f64, f64) {
    let hits = ground_truth.intersection(hypothesis).count() as f64;
    let precision = match (hypothesis.len(), ground_truth.len()) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (h, _) => hits / h as f64,
    };
    let recall = if ground_truth.is_empty() { 1.0 } else { hits / ground_truth.len() as f64 };
    (precision, recall)
}

/// Every risk adjacent to a failed node.
pub fn suspect_set(model: &RiskModel) -> BTreeSet<&ObjectId> {
    (0..model.node_count())
        .filter(|&n| model.node_status(n) == Status::Fail)
        .flat_map(|n| model.edges_of(n).iter().map(|&(r, _)| model.risk(r)))
        .collect()
}

pub fn localize(model: &RiskModel, algo: Algorithm, changes: &ChangeLog, window: u64) -> Result<Hypothesis> {
    let sig = model.signature();
    match algo {
        Algorithm::Scout => scout(model, &sig, changes, window),
        Algorithm::Score(t) => score(model, &sig, t),
    }
}

/// A deployed, diffed and augmented instance, ready for any algorithm.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: RiskModel,
    pub ground_truth: BTreeSet<ObjectId>,
    pub suspects: usize,
    /// Time spent building and augmenting the model.
    pub build_millis: f64,
}

/// Deploy with the plan, diff, then build and augment the model.
pub fn prepare(policy: &NetworkPolicy, compiled: &CompiledPolicy, plan: &FaultPlan, params: &TrialParams) -> Result<Prepared> {
    let deployment = deploy(compiled, plan, &DeployOptions::default())?;
    let report = check_equivalence(compiled.logical_rules(), deployment.deployed_rules());
    let start = Instant::now();
    let base = match &params.model {
        ModelKind::Switch(s) => build_switch_model(policy, compiled, s)?,
        ModelKind::Controller => build_controller_model(compiled)?,
    };
    let (model, _) = base.augment(&report)?;
    let build_millis = start.elapsed().as_secs_f64() * 1e3;
    let suspects = suspect_set(&model).len();
    Ok(Prepared { model, ground_truth: plan.ground_truth(), suspects, build_millis })
}

/// Localizes on a prepared instance and scores the result.
pub fn evaluate(prepared: &Prepared, algo: Algorithm, changes: &ChangeLog, window: u64) -> Result<TrialResult> {
    let start = Instant::now();
    let h = localize(&prepared.model, algo, changes, window)?;
    let runtime_millis = prepared.build_millis + start.elapsed().as_secs_f64() * 1e3;
    let hypothesis = h.objects();
    let (precision, recall) = precision_recall(&prepared.ground_truth, &hypothesis);
    let suspects = prepared.suspects;
    let gamma = if suspects == 0 { 0.0 } else { hypothesis.len() as f64 / suspects as f64 };
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Invariant(format!("gamma {gamma} outside [0, 1]")));
    }
    Ok(TrialResult {
        ground_truth: prepared.ground_truth.clone(),
        hypothesis,
        precision,
        recall,
        gamma,
        suspects,
        runtime_millis,
    })
}

/// The whole pipeline for one plan and algorithm. `runtime_millis` covers
/// model construction and localization.
pub fn run_trial(
    policy: &NetworkPolicy,
    compiled: &CompiledPolicy,
    plan: &FaultPlan,
    changes: &ChangeLog,
    algo: Algorithm,
    params: &TrialParams,
) -> Result<TrialResult> {
    evaluate(&prepare(policy, compiled, plan, params)?, algo, changes, params.window)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepConfig {
    pub generator: GeneratorConfig,
    pub fault_counts: Vec<usize>,
    pub algos: Vec<Algorithm>,
    pub runs: usize,
    pub scope: ModelScope,
    /// Fault kind mix and fraction range; `faults`, `scope` and `seed` are set
    /// per trial.
    pub inject: InjectConfig,
    pub changelog: ChangeLogConfig,
    pub window: u64,
    pub seed: u64,
}

impl SweepConfig {
    pub fn new(generator: GeneratorConfig, fault_counts: Vec<usize>, algos: Vec<Algorithm>, runs: usize) -> Self {
        let seed = generator.seed;
        SweepConfig {
            generator,
            fault_counts,
            algos,
            runs,
            scope: ModelScope::Switch,
            inject: InjectConfig::default(),
            changelog: ChangeLogConfig::default(),
            window: DEFAULT_WINDOW,
            seed,
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub run: usize,
    pub algo: String,
    pub faults: usize,
    pub precision: f64,
    pub recall: f64,
    pub gamma: f64,
    pub runtime_ms: f64,
}

fn trial_seed(base: u64, faults: usize, run: usize) -> u64 {
    let mut x = base ^ ((faults as u64) << 32) ^ run as u64;
    // splitmix64 finalizer, so neighbouring trials get unrelated streams.
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Fault plan, change log and model for one `(faults, run)` cell. All
/// algorithms of the sweep see the same instance. `capacity` lists each
/// switch with its number of faultable objects.
fn instance(
    cfg: &SweepConfig,
    policy: &NetworkPolicy,
    compiled: &CompiledPolicy,
    capacity: &[(String, usize)],
    faults: usize,
    run: usize,
) -> Result<(FaultPlan, ChangeLog, TrialParams)> {
    let seed = trial_seed(cfg.seed, faults, run);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (model, scope) = match cfg.scope {
        ModelScope::Controller => (ModelKind::Controller, None),
        ModelScope::Switch => {
            let s = capacity
                .iter()
                .filter(|(_, n)| *n >= faults)
                .choose(&mut rng)
                .ok_or_else(|| Error::Config(format!("no switch has {faults} faultable objects")))?
                .0
                .clone();
            (ModelKind::Switch(s.clone()), Some(s))
        }
    };
    let inject = InjectConfig { faults, scope, seed, ..cfg.inject.clone() };
    let plan = inject_faults(compiled, &inject)?;
    let changes = synthesize_changelog(policy, &plan, &ChangeLogConfig { seed, ..cfg.changelog.clone() });
    Ok((plan, changes, TrialParams { model, window: cfg.window }))
}

/// Runs every `(fault count, run, algorithm)` combination in parallel. Rows
/// come back ordered by fault count, run, then algorithm as configured.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.algos.is_empty() || cfg.runs == 0 {
        return Err(Error::Config("a sweep needs at least one algorithm and one run".into()));
    }
    let policy = generate_policy(&cfg.generator)?;
    let compiled = compile(&policy);
    let capacity: Vec<(String, usize)> = match cfg.scope {
        ModelScope::Controller => Vec::new(),
        ModelScope::Switch => compiled
            .switches()
            .into_iter()
            .map(|s| (s.to_string(), faultable_objects(&compiled, Some(s), &cfg.inject.kinds).len()))
            .collect(),
    };
    let cells: Vec<(usize, usize)> =
        cfg.fault_counts.iter().flat_map(|&f| (0..cfg.runs).map(move |r| (f, r))).collect();
    let rows: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(faults, run)| -> Result<Vec<SweepRow>> {
            let (plan, changes, params) = instance(cfg, &policy, &compiled, &capacity, faults, run)?;
            let prepared = prepare(&policy, &compiled, &plan, &params)?;
            cfg.algos
                .iter()
                .map(|&algo| {
                    let t = evaluate(&prepared, algo, &changes, params.window)?;
                    Ok(SweepRow {
                        run,
                        algo: algo.to_string(),
                        faults,
                        precision: t.precision,
                        recall: t.recall,
                        gamma: t.gamma,
                        runtime_ms: t.runtime_millis,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Mean metrics of one `(algo, faults)` group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub algo: String,
    pub faults: usize,
    pub runs: usize,
    pub precision: f64,
    pub recall: f64,
    pub gamma: f64,
    pub runtime_ms: f64,
}

pub fn aggregate(rows: &[SweepRow]) -> Vec<Aggregate> {
    let mut groups: Vec<Aggregate> = Vec::new();
    for r in rows {
        let slot = match groups.iter_mut().position(|g| g.algo == r.algo && g.faults == r.faults) {
            Some(i) => &mut groups[i],
            None => {
                groups.push(Aggregate {
                    algo: r.algo.clone(),
                    faults: r.faults,
                    runs: 0,
                    precision: 0.0,
                    recall: 0.0,
                    gamma: 0.0,
                    runtime_ms: 0.0,
                });
                groups.last_mut().expect("just pushed")
            }
        };
        slot.runs += 1;
        slot.precision += r.precision;
        slot.recall += r.recall;
        slot.gamma += r.gamma;
        slot.runtime_ms += r.runtime_ms;
    }
    for g in &mut groups {
        let n = g.runs as f64;
        g.precision /= n;
        g.recall /= n;
        g.gamma /= n;
        g.runtime_ms /= n;
    }
    groups
}

pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| csv_error(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse { path: path.to_path_buf(), line, message: format!("{other:?}") },
    }
}

/// Writes the rows to any sink, e.g. standard output.
pub fn write_csv_to(sink: impl Write, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Input(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Input(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::generate::Profile;
    use crate::sim::plan::Fault;
    use crate::sim::scenario::three_tier;

    #[test]
    fn metric_identities() {
        let g: BTreeSet<ObjectId> = [ObjectId::epg("a"), ObjectId::epg("b")].into();
        assert_eq!(precision_recall(&g, &g), (1.0, 1.0));
        let sub: BTreeSet<ObjectId> = [ObjectId::epg("a")].into();
        assert_eq!(precision_recall(&g, &sub), (1.0, 0.5));
        assert_eq!(precision_recall(&g, &BTreeSet::new()), (0.0, 0.0));
        assert_eq!(precision_recall(&BTreeSet::new(), &BTreeSet::new()), (1.0, 1.0));
    }

    #[test]
    fn algorithm_names() {
        assert_eq!("scout".parse::<Algorithm>().unwrap(), Algorithm::Scout);
        assert_eq!("score".parse::<Algorithm>().unwrap(), Algorithm::Score(1.0));
        assert_eq!("score-0.6".parse::<Algorithm>().unwrap(), Algorithm::Score(0.6));
        assert!("magic".parse::<Algorithm>().is_err());
        assert_eq!(Algorithm::Score(0.6).to_string(), "score-0.6");
    }

    #[test]
    fn single_full_fault_is_found() {
        let p = three_tier();
        let c = compile(&p);
        let plan = FaultPlan::new(vec![Fault::full(ObjectId::filter("port700"))], 0);
        let t = run_trial(&p, &c, &plan, &ChangeLog::default(), Algorithm::Scout, &TrialParams::default()).unwrap();
        assert_eq!(t.recall, 1.0);
        // DB and App-DB depend on exactly the same two triplets as port700,
        // so nothing can tell them apart.
        let tied: BTreeSet<ObjectId> =
            [ObjectId::epg("DB"), ObjectId::contract("App-DB"), ObjectId::filter("port700")].into();
        assert_eq!(t.hypothesis, tied);
        assert!((t.precision - 1.0 / 3.0).abs() < 1e-12);
        // Failed triplets (S2,App-DB) and (S3,App-DB) rely on VRF, App, DB,
        // App-DB, both filters and both switches.
        assert_eq!(t.suspects, 8);
        assert!((t.gamma - 3.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn empty_plan_reports_empty_signature() {
        let p = three_tier();
        let c = compile(&p);
        let r = run_trial(&p, &c, &FaultPlan::default(), &ChangeLog::default(), Algorithm::Scout, &TrialParams::default());
        assert!(matches!(r, Err(Error::EmptySignature)));
    }

    #[test]
    fn sweep_is_reproducible() {
        let cfg = SweepConfig::new(
            GeneratorConfig::profile(Profile::Testbed, 4),
            vec![1, 3],
            vec![Algorithm::Scout, Algorithm::Score(1.0)],
            3,
        );
        let strip = |rows: Vec<SweepRow>| -> Vec<SweepRow> {
            rows.into_iter().map(|r| SweepRow { runtime_ms: 0.0, ..r }).collect()
        };
        let a = strip(run_sweep(&cfg).unwrap());
        assert_eq!(a.len(), 2 * 3 * 2);
        assert_eq!(a, strip(run_sweep(&cfg).unwrap()));
        let agg = aggregate(&a);
        assert_eq!(agg.len(), 4);
        assert!(agg.iter().all(|g| g.runs == 3));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![SweepRow {
            run: 0,
            algo: "scout".into(),
            faults: 2,
            precision: 1.0,
            recall: 0.5,
            gamma: 0.1,
            runtime_ms: 3.5,
        }];
        write_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("run,algo,faults,precision,recall,gamma,runtime_ms\n"));
        assert_eq!(read_csv(&path).unwrap(), rows);
    }
}

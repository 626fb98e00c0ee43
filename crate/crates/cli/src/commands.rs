// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use scout_core::compiler::{load_rules, save_rules};
use scout_core::io::{read_json, write_json};
use scout_core::localize::DEFAULT_WINDOW;
use scout_core::sim::bench::{self, bench_scalability, growth_exponent, BenchConfig};
use scout_core::sim::inject::{synthesize_changelog, ChangeLogConfig};
use scout_core::sim::scenario::{self, Scenario};
use scout_core::sim::trial::{aggregate, write_csv, SweepConfig};
use scout_core::sim::{generate_policy, inject_faults, run_sweep, Algorithm, FaultPlan, GeneratorConfig, InjectConfig, ModelScope, Profile};
use scout_core::{
    build_controller_model, build_switch_model, check_equivalence, correlate as correlate_logs, deploy as install, validate_policy,
    ChangeLog, DeployOptions, Error, FaultLog, Hypothesis, MissingRuleReport, NetworkPolicy, Result, RiskModel, SignatureSet,
};
use serde::{Deserialize, Serialize};

use crate::manifest::{digest, RunManifest};
use crate::{
    run_args, BenchArgs, BuildModelArgs, CheckArgs, CompileArgs, CorrelateArgs, Ctx, DeployArgs, GenerateArgs, InjectArgs,
    LocalizeArgs, ReplayArgs, Run, ScenarioArgs, SimulateArgs,
};

fn params<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

/// Refuses to write over any of the inputs.
fn guard(inputs: &[PathBuf], outputs: &[&PathBuf]) -> Result<()> {
    for o in outputs {
        let clash = inputs.iter().any(|i| {
            i == *o || matches!((std::fs::canonicalize(i), std::fs::canonicalize(o)), (Ok(a), Ok(b)) if a == b)
        });
        if clash {
            return Err(Error::Input(format!("output {} would overwrite an input", o.display())));
        }
    }
    Ok(())
}

fn load_policy(path: &Path) -> Result<NetworkPolicy> {
    let policy = NetworkPolicy::load(path)?;
    let violations = validate_policy(&policy);
    if violations.is_empty() {
        return Ok(policy);
    }
    let lines: Vec<String> = violations.iter().map(|v| format!("  {v}")).collect();
    Err(Error::Input(format!("{} failed validation:\n{}", path.display(), lines.join("\n"))))
}

fn generator(ctx: &Ctx, profile: &str) -> Result<GeneratorConfig> {
    let mut cfg = match &ctx.config.generator {
        Some(g) => g.clone(),
        None => GeneratorConfig::profile(profile.parse::<Profile>()?, ctx.seed),
    };
    cfg.seed = ctx.seed;
    Ok(cfg)
}

pub fn generate(ctx: &Ctx, a: &GenerateArgs) -> Result<Run> {
    let out = ctx.out()?;
    let cfg = generator(ctx, &a.profile)?;
    let policy = generate_policy(&cfg)?;
    policy.save(out)?;
    Ok(Run {
        inputs: vec![],
        outputs: vec![out.clone()],
        parameters: serde_json::to_value(&cfg).unwrap_or_default(),
        summary: vec![format!(
            "{} VRFs, {} EPGs, {} contracts, {} filters, {} pairs on {} switches -> {}",
            policy.vrfs.len(),
            policy.epgs.len(),
            policy.contracts.len(),
            policy.filters.len(),
            policy.pair_count(),
            policy.switches.len(),
            out.display()
        )],
    })
}

pub fn compile(ctx: &Ctx, a: &CompileArgs) -> Result<Run> {
    let out = ctx.out()?;
    guard(std::slice::from_ref(&a.policy), &[out])?;
    let policy = load_policy(&a.policy)?;
    let compiled = scout_core::compile(&policy);
    save_rules(out, compiled.logical_rules())?;
    let mut summary = vec![format!("{} rules -> {}", compiled.len(), out.display())];
    for s in compiled.switches() {
        summary.push(format!("  {s}: {}", compiled.for_switch(s).count()));
    }
    Ok(Run { inputs: vec![a.policy.clone()], outputs: vec![out.clone()], parameters: params(a), summary })
}

pub fn inject(ctx: &Ctx, a: &InjectArgs) -> Result<Run> {
    let out = ctx.out()?;
    let mut outputs = vec![out];
    outputs.extend(a.changelog_out.as_ref());
    guard(std::slice::from_ref(&a.policy), &outputs)?;
    let policy = load_policy(&a.policy)?;
    let compiled = scout_core::compile(&policy);
    let defaults = &ctx.config.inject;
    let base = InjectConfig::default();
    let cfg = InjectConfig {
        faults: a.faults,
        mix: a.mix.or(defaults.mix).unwrap_or(base.mix),
        fraction: defaults.fraction.unwrap_or(base.fraction),
        scope: a.scope.clone(),
        seed: ctx.seed,
        ..base
    };
    let plan = inject_faults(&compiled, &cfg)?;
    plan.save(out)?;
    let mut summary: Vec<String> = plan
        .faults
        .iter()
        .map(|f| match f.fraction {
            Some(x) => format!("  {} partial {x:.2}", f.object),
            None => format!("  {} full", f.object),
        })
        .collect();
    summary.insert(0, format!("{} faults -> {}", plan.faults.len(), out.display()));
    if let Some(path) = &a.changelog_out {
        let log_cfg = ChangeLogConfig {
            noise: a.noise.or(defaults.noise).unwrap_or(ChangeLogConfig::default().noise),
            stale: a.stale_changelog,
            seed: ctx.seed,
        };
        let log = synthesize_changelog(&policy, &plan, &log_cfg);
        log.save(path)?;
        summary.push(format!("{} change-log entries -> {}", log.entries().len(), path.display()));
    }
    Ok(Run {
        inputs: vec![a.policy.clone()],
        outputs: outputs.into_iter().cloned().collect(),
        parameters: serde_json::json!({ "args": params(a), "inject": cfg }),
        summary,
    })
}

/// Deployment settings as stored on disk.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct DeploySpec {
    pub capacity: BTreeMap<String, usize>,
    pub default_capacity: Option<usize>,
    pub now: u64,
}

impl From<&DeployOptions> for DeploySpec {
    fn from(o: &DeployOptions) -> Self {
        DeploySpec { capacity: o.capacity.clone(), default_capacity: o.default_capacity, now: o.now }
    }
}

fn parse_capacity(s: &str) -> Result<(String, usize)> {
    let (switch, n) = s.split_once('=').ok_or_else(|| Error::Input(format!("capacity `{s}` is not SWITCH=N")))?;
    let n = n.parse().map_err(|_| Error::Input(format!("capacity `{s}`: `{n}` is not a count")))?;
    Ok((switch.to_string(), n))
}

pub fn deploy(ctx: &Ctx, a: &DeployArgs) -> Result<Run> {
    let out = ctx.out()?;
    let mut inputs = vec![a.policy.clone()];
    inputs.extend(a.plan.iter().cloned());
    inputs.extend(a.options.iter().cloned());
    let mut outputs = vec![out];
    outputs.extend(a.faultlog_out.as_ref());
    guard(&inputs, &outputs)?;

    let policy = load_policy(&a.policy)?;
    let compiled = scout_core::compile(&policy);
    let plan = match &a.plan {
        Some(p) => FaultPlan::load(p)?,
        None => FaultPlan::default(),
    };
    let mut spec: DeploySpec = match &a.options {
        Some(p) => read_json(p)?,
        None => DeploySpec::default(),
    };
    for c in &a.capacity {
        let (s, n) = parse_capacity(c)?;
        spec.capacity.insert(s, n);
    }
    spec.default_capacity = a.default_capacity.or(spec.default_capacity);
    spec.now = a.now.unwrap_or(spec.now);
    let opts = DeployOptions { capacity: spec.capacity.clone(), default_capacity: spec.default_capacity, now: spec.now };
    let d = install(&compiled, &plan, &opts)?;
    save_rules(out, d.deployed_rules())?;
    let mut summary = vec![format!("{} of {} rules installed -> {}", d.deployed_rules().count(), compiled.len(), out.display())];
    for e in &d.fault_log {
        summary.push(format!("  event {} on {}: {}", e.code, e.switch, e.message));
    }
    if let Some(path) = &a.faultlog_out {
        FaultLog::from_unordered(d.fault_log.clone())?.save(path)?;
        summary.push(format!("{} device events -> {}", d.fault_log.len(), path.display()));
    }
    Ok(Run {
        inputs,
        outputs: outputs.into_iter().cloned().collect(),
        parameters: serde_json::json!({ "args": params(a), "deploy": spec }),
        summary,
    })
}

pub fn check(ctx: &Ctx, a: &CheckArgs) -> Result<Run> {
    let out = ctx.out()?;
    let inputs = vec![a.desired.clone(), a.actual.clone()];
    guard(&inputs, &[out])?;
    let desired = load_rules(&a.desired)?;
    let actual = load_rules(&a.actual)?;
    let report = check_equivalence(&desired, &actual);
    write_json(out, &report)?;
    let mut summary = vec![format!(
        "{} missing, {} extra -> {}",
        report.missing.len(),
        report.extra.len(),
        out.display()
    )];
    for (s, d) in &report.per_switch {
        summary.push(format!("  {s}: {} missing, {} extra", d.missing.len(), d.extra.len()));
    }
    Ok(Run { inputs, outputs: vec![out.clone()], parameters: params(a), summary })
}

pub fn build_model(ctx: &Ctx, a: &BuildModelArgs) -> Result<Run> {
    let out = ctx.out()?;
    let mut inputs = vec![a.policy.clone()];
    inputs.extend(a.report.iter().cloned());
    guard(&inputs, &[out])?;
    let policy = load_policy(&a.policy)?;
    let compiled = scout_core::compile(&policy);
    let mut model = match &a.switch {
        Some(s) => build_switch_model(&policy, &compiled, s)?,
        None => build_controller_model(&compiled)?,
    };
    if let Some(p) = &a.report {
        let report: MissingRuleReport = read_json(p)?;
        model = model.augment(&report)?.0;
    }
    model.save(out)?;
    let summary = vec![format!(
        "{}: {} nodes, {} risks, {} edges ({} failed) -> {}",
        model.kind(),
        model.node_count(),
        model.risk_count(),
        model.edge_count(),
        model.fail_edge_count(),
        out.display()
    )];
    Ok(Run { inputs, outputs: vec![out.clone()], parameters: params(a), summary })
}

fn algorithm(name: &str, threshold: Option<f64>) -> Result<Algorithm> {
    match (name.parse::<Algorithm>()?, threshold) {
        (Algorithm::Score(_), Some(t)) if name == "score" => Ok(Algorithm::Score(t)),
        (algo, _) => Ok(algo),
    }
}

pub fn localize(ctx: &Ctx, a: &LocalizeArgs) -> Result<Run> {
    let out = ctx.out()?;
    let mut inputs = vec![a.model.clone()];
    inputs.extend(a.report.iter().cloned());
    inputs.extend(a.changelog.iter().cloned());
    guard(&inputs, &[out])?;
    let mut model = RiskModel::load(&a.model)?;
    if let Some(p) = &a.report {
        let report: MissingRuleReport = read_json(p)?;
        model = model.augment(&report)?.0;
    }
    let changes = match &a.changelog {
        Some(p) => ChangeLog::load(p)?,
        None => ChangeLog::default(),
    };
    let algo = algorithm(&a.algo, a.threshold.or(ctx.config.threshold))?;
    let window = a.window.or(ctx.config.window).unwrap_or(DEFAULT_WINDOW);
    let h = scout_core::sim::trial::localize(&model, algo, &changes, window)?;
    h.save(out)?;
    let mut summary = vec![format!("{algo}: {} objects, {} unexplained -> {}", h.len(), h.residual.len(), out.display())];
    for e in &h.entries {
        summary.push(format!("  {} ({:?}, {} observations)", e.object, e.stage, e.covered.len()));
    }
    Ok(Run {
        inputs,
        outputs: vec![out.clone()],
        parameters: serde_json::json!({ "args": params(a), "algorithm": algo.to_string(), "window": window }),
        summary,
    })
}

pub fn correlate(ctx: &Ctx, a: &CorrelateArgs) -> Result<Run> {
    let out = ctx.out()?;
    let mut inputs = vec![a.hypothesis.clone(), a.changelog.clone()];
    inputs.extend(a.faultlog.iter().cloned());
    inputs.extend(a.signatures.iter().cloned());
    guard(&inputs, &[out])?;
    let h = Hypothesis::load(&a.hypothesis)?;
    let changes = ChangeLog::load(&a.changelog)?;
    let mut events = Vec::new();
    for p in &a.faultlog {
        events.extend(FaultLog::load(p)?.entries().iter().cloned());
    }
    let faults = FaultLog::from_unordered(events)?;
    let signatures = match &a.signatures {
        Some(p) => SignatureSet::load(p)?,
        None => SignatureSet::builtin(),
    };
    let report = correlate_logs(&h, &changes, &faults, &signatures, a.slack);
    report.save(out)?;
    let mut summary = vec![format!("{} attributions -> {}", report.attributions.len(), out.display())];
    summary.extend(report.attributions.iter().map(|x| format!("  {x}")));
    Ok(Run { inputs, outputs: vec![out.clone()], parameters: params(a), summary })
}

/// `N`, `A-B` or `A,B,C`.
fn parse_counts(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Input(format!("fault counts `{s}` are not N, A-B or a comma list"));
    if let Some((lo, hi)) = s.split_once('-') {
        let (lo, hi): (usize, usize) = (lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?);
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

pub fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<Run> {
    let out = ctx.out()?;
    let generator = generator(ctx, &a.profile)?;
    let threshold = a.threshold.or(ctx.config.threshold);
    let algos: Vec<Algorithm> = a.algo.split(',').map(|n| algorithm(n.trim(), threshold)).collect::<Result<_>>()?;
    let scope = match a.scope.as_deref() {
        Some("switch") => ModelScope::Switch,
        Some("controller") => ModelScope::Controller,
        Some(other) => return Err(Error::Input(format!("unknown scope `{other}` (expected switch or controller)"))),
        None if a.profile == "production" => ModelScope::Controller,
        None => ModelScope::Switch,
    };
    let mut cfg = SweepConfig::new(generator, parse_counts(&a.faults)?, algos, a.runs);
    cfg.scope = scope;
    cfg.seed = ctx.seed;
    cfg.changelog.stale = a.stale_changelog;
    if let Some(n) = ctx.config.inject.noise {
        cfg.changelog.noise = n;
    }
    if let Some(m) = ctx.config.inject.mix {
        cfg.inject.mix = m;
    }
    if let Some(f) = ctx.config.inject.fraction {
        cfg.inject.fraction = f;
    }
    cfg.window = a.window.or(ctx.config.window).unwrap_or(cfg.window);
    let rows = run_sweep(&cfg)?;
    write_csv(out, &rows)?;
    let mut summary = vec![format!("{} trials -> {}", rows.len(), out.display()), "algo faults precision recall gamma".into()];
    for g in aggregate(&rows) {
        summary.push(format!("{} {} {:.3} {:.3} {:.3}", g.algo, g.faults, g.precision, g.recall, g.gamma));
    }
    Ok(Run {
        inputs: vec![],
        outputs: vec![out.clone()],
        parameters: serde_json::to_value(&cfg).unwrap_or_default(),
        summary,
    })
}

pub fn bench(ctx: &Ctx, a: &BenchArgs) -> Result<Run> {
    let mut cfg = ctx.config.bench.clone().unwrap_or_default();
    cfg.seed = ctx.seed;
    if let Some(s) = &a.sizes {
        cfg.sizes = parse_counts(s)?;
    }
    if let Some(f) = a.faults {
        cfg.faults = f;
    }
    let rows = bench_scalability(&cfg)?;
    let mut summary = vec!["switches rules nodes risks build_ms localize_ms".to_string()];
    for r in &rows {
        summary.push(format!("{} {} {} {} {:.1} {:.1}", r.switches, r.rules, r.nodes, r.risks, r.build_ms, r.localize_ms));
    }
    if let Some(k) = growth_exponent(&rows) {
        summary.push(format!("growth exponent {k:.2}"));
    }
    let mut outputs = Vec::new();
    if let Some(out) = &ctx.out {
        bench::write_csv(out, &rows)?;
        outputs.push(out.clone());
    }
    Ok(Run { inputs: vec![], outputs, parameters: serde_json::to_value::<&BenchConfig>(&cfg).unwrap_or_default(), summary })
}

fn export(s: &Scenario, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Input(format!("{}: {e}", dir.display())))?;
    let path = |name: &str| dir.join(name);
    s.policy.save(&path("policy.json"))?;
    s.plan.save(&path("plan.json"))?;
    s.changes.save(&path("changelog.jsonl"))?;
    FaultLog::from_unordered(s.faults.clone())?.save(&path("faultlog.jsonl"))?;
    write_json(&path("deploy.json"), &DeploySpec::from(&s.deploy))?;
    Ok(["policy.json", "plan.json", "changelog.jsonl", "faultlog.jsonl", "deploy.json"].iter().map(|n| path(n)).collect())
}

pub fn scenario(ctx: &Ctx, a: &ScenarioArgs) -> Result<Run> {
    let s = scenario::by_name(&a.name)
        .ok_or_else(|| Error::Input(format!("unknown scenario `{}` (one of {})", a.name, scenario::NAMES.join(", "))))?;
    let outcome = s.run()?;
    let mut summary = vec![
        format!("{}: {} missing rules, {} on {}", s.name, outcome.report.missing.len(), outcome.signature.len(), outcome.model.kind()),
        format!("hypothesis: {}", outcome.hypothesis.objects().iter().map(|o| o.to_string()).collect::<Vec<_>>().join(", ")),
    ];
    summary.extend(outcome.root_causes.attributions.iter().map(|x| format!("  {x}")));
    let mut outputs = Vec::new();
    if let Some(out) = &ctx.out {
        outcome.root_causes.save(out)?;
        outputs.push(out.clone());
    }
    if let Some(dir) = &a.export {
        let files = export(&s, dir)?;
        summary.push(format!("inputs written to {}", dir.display()));
        outputs.extend(files);
    }
    Ok(Run { inputs: vec![], outputs, parameters: params(a), summary })
}

/// Re-runs the recorded command with every output redirected into `into`,
/// after checking that the inputs are unchanged. Fails unless each output
/// digest matches.
pub fn replay(a: &ReplayArgs) -> Result<Vec<String>> {
    let m = RunManifest::load(&a.manifest)?;
    for input in &m.inputs {
        let now = digest(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(Error::Input(format!("input {} changed since the recorded run", input.path.display())));
        }
    }
    let into = match &a.into {
        Some(d) => d.clone(),
        None => {
            let mut s = a.manifest.as_os_str().to_owned();
            s.push(".replay");
            PathBuf::from(s)
        }
    };
    std::fs::create_dir_all(&into).map_err(|e| Error::Input(format!("{}: {e}", into.display())))?;
    let redirect: BTreeMap<String, PathBuf> = m
        .outputs
        .iter()
        .map(|o| {
            let name = o.path.file_name().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"));
            (o.path.to_string_lossy().into_owned(), into.join(name))
        })
        .collect();
    let args: Vec<String> = m
        .args
        .iter()
        .map(|arg| match redirect.get(arg) {
            Some(p) => p.to_string_lossy().into_owned(),
            None => arg.clone(),
        })
        .collect();
    let code = run_args(&args);
    if code != 0 {
        return Err(Error::Input(format!("replayed `{}` exited with {code}", m.subcommand)));
    }
    let mut summary = Vec::new();
    let mut mismatched = Vec::new();
    for o in &m.outputs {
        let fresh = digest(&redirect[o.path.to_string_lossy().as_ref()])?;
        if fresh.sha256 == o.sha256 {
            summary.push(format!("  match {}", o.path.display()));
        } else {
            mismatched.push(o.path.display().to_string());
        }
    }
    if !mismatched.is_empty() {
        return Err(Error::Input(format!("outputs differ from the recorded run: {}", mismatched.join(", "))));
    }
    summary.insert(0, format!("{} reproduced {} outputs in {}", m.subcommand, m.outputs.len(), into.display()));
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_count_specs() {
        assert_eq!(parse_counts("3").unwrap(), vec![3]);
        assert_eq!(parse_counts("1-4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_counts("1,3, 10").unwrap(), vec![1, 3, 10]);
        assert!(parse_counts("4-1").is_err());
        assert!(parse_counts("x").is_err());
    }

    #[test]
    fn capacity_flag() {
        assert_eq!(parse_capacity("S3=8").unwrap(), ("S3".to_string(), 8));
        assert!(parse_capacity("S3").is_err());
        assert!(parse_capacity("S3=many").is_err());
    }

    #[test]
    fn score_threshold_override() {
        assert_eq!(algorithm("score", Some(0.5)).unwrap(), Algorithm::Score(0.5));
        assert_eq!(algorithm("score-0.7", Some(0.5)).unwrap(), Algorithm::Score(0.7));
        assert_eq!(algorithm("scout", Some(0.5)).unwrap(), Algorithm::Scout);
        assert!(algorithm("magic", None).is_err());
    }
}

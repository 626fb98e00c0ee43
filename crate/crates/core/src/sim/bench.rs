// SPDX-License-Identifier: Apache-2.0

//! Controller-model scalability benchmark.
//!
//! The workload grows by pods: every added switch brings its own EPGs and
//! contracts, linked to the previous pod and drawing on a shared filter pool.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compiler::compile;
use crate::equivalence::check_equivalence;
use crate::error::{Error, Result};
use crate::localize::{scout, DEFAULT_WINDOW};
use crate::policy::NetworkPolicy;
use crate::risk::build_controller_model;
use crate::sim::trial::csv_error;
use crate::sim::inject::{inject_faults, synthesize_changelog, ChangeLogConfig, InjectConfig};
use crate::tcam::{deploy, DeployOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub faults: usize,
    pub epgs_per_switch: usize,
    pub contracts_per_switch: usize,
    pub filters: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![10, 50, 100, 200, 300, 400, 500],
            faults: 10,
            epgs_per_switch: 8,
            contracts_per_switch: 4,
            filters: 40,
            seed: 0,
        }
    }
}

impl BenchConfig {
    /// `1, step, 2*step, ...` up to and including `max`.
    pub fn stepped(max: usize, step: usize) -> Vec<usize> {
        let mut out = vec![1];
        out.extend((1..).map(|k| k * step.max(1)).take_while(|&s| s <= max).filter(|&s| s > 1));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub switches: usize,
    pub rules: usize,
    pub nodes: usize,
    pub risks: usize,
    pub build_ms: f64,
    pub localize_ms: f64,
    pub total_ms: f64,
}

/// `switches` pods. Pod `i` puts `epgs_per_switch` EPGs on `leaf i`, a few of
/// them with a second endpoint on the next leaf, and binds them with local
/// contracts plus one contract reaching into pod `i - 1`.
pub fn scaled_policy(cfg: &BenchConfig, switches: usize) -> NetworkPolicy {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut p = NetworkPolicy::new();
    p.add_vrf("vrf1");
    let leaf = |i: usize| format!("leaf{i:04}");
    for s in 0..switches {
        p.add_switch(leaf(s));
    }
    for f in 0..cfg.filters {
        p.add_filter(format!("flt{f:03}"), 2000 + f as u16);
    }
    let epg = |s: usize, k: usize| format!("p{s:04}e{k:02}");
    let k = cfg.epgs_per_switch.max(2);
    for s in 0..switches {
        for e in 0..k {
            let mut eps = vec![(format!("{}-a", epg(s, e)), leaf(s))];
            if switches > 1 && e % 4 == 0 {
                eps.push((format!("{}-b", epg(s, e)), leaf((s + 1) % switches)));
            }
            p.add_epg(epg(s, e), "vrf1", eps);
        }
        let mut pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
        pairs.shuffle(&mut rng);
        let local = cfg.contracts_per_switch.max(1);
        let per = (pairs.len() / local).clamp(1, 3);
        for c in 0..local {
            let chunk: Vec<(String, String)> =
                pairs.iter().skip(c * per).take(per).map(|&(a, b)| (epg(s, a), epg(s, b))).collect();
            if chunk.is_empty() {
                break;
            }
            p.add_contract(format!("p{s:04}c{c:02}"), chunk, pick_filters(&mut rng, cfg.filters));
        }
        if s > 0 {
            p.add_contract(
                format!("p{s:04}link"),
                [(epg(s, 0), epg(s - 1, 1)), (epg(s, 1), epg(s - 1, 0))],
                pick_filters(&mut rng, cfg.filters),
            );
        }
    }
    p
}

/// One to three filters, skewed towards the low-numbered ones.
fn pick_filters(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let count = rng.gen_range(1..=3.min(n));
    let mut out: Vec<usize> = Vec::new();
    while out.len() < count {
        let f = ((rng.gen::<f64>().powi(2)) * n as f64) as usize;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    out.sort_unstable();
    out.into_iter().map(|f| format!("flt{f:03}")).collect()
}

/// For each size: generate, inject `faults` mixed faults, then time model
/// construction with augmentation and localization separately.
pub fn bench_scalability(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &switches in &cfg.sizes {
        if switches == 0 {
            return Err(Error::Config("switch count must be positive".into()));
        }
        let policy = scaled_policy(cfg, switches);
        let compiled = compile(&policy);
        let plan = inject_faults(&compiled, &InjectConfig { faults: cfg.faults, seed: cfg.seed, ..Default::default() })?;
        let changes = synthesize_changelog(&policy, &plan, &ChangeLogConfig { seed: cfg.seed, ..Default::default() });
        let deployment = deploy(&compiled, &plan, &DeployOptions::default())?;
        let report = check_equivalence(compiled.logical_rules(), deployment.deployed_rules());

        let t0 = Instant::now();
        let (model, sig) = build_controller_model(&compiled)?.augment(&report)?;
        let t1 = Instant::now();
        scout(&model, &sig, &changes, DEFAULT_WINDOW)?;
        let t2 = Instant::now();
        let build_ms = (t1 - t0).as_secs_f64() * 1e3;
        let localize_ms = (t2 - t1).as_secs_f64() * 1e3;
        rows.push(BenchRow {
            switches,
            rules: compiled.len(),
            nodes: model.node_count(),
            risks: model.risk_count(),
            build_ms,
            localize_ms,
            total_ms: build_ms + localize_ms,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `ln(total_ms)` against `ln(switches)`. `None` with
/// fewer than two distinct sizes.
pub fn growth_exponent(rows: &[BenchRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.switches > 0 && r.total_ms > 0.0)
        .map(|r| ((r.switches as f64).ln(), r.total_ms.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Rows as CSV with a header line.
pub fn write_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::validate_policy;

    #[test]
    fn scaled_policy_is_valid_and_grows() {
        let cfg = BenchConfig::default();
        let small = scaled_policy(&cfg, 3);
        let big = scaled_policy(&cfg, 30);
        assert!(validate_policy(&small).is_empty());
        assert!(validate_policy(&big).is_empty());
        assert!(compile(&big).len() > 5 * compile(&small).len());
        assert!(validate_policy(&scaled_policy(&cfg, 1)).is_empty());
    }

    #[test]
    fn exponent_of_exact_power_law() {
        let rows: Vec<BenchRow> = [10usize, 20, 40, 80]
            .iter()
            .map(|&s| BenchRow {
                switches: s,
                rules: 0,
                nodes: 0,
                risks: 0,
                build_ms: 0.0,
                localize_ms: 0.0,
                total_ms: 3.0 * (s as f64).powf(1.5),
            })
            .collect();
        assert!((growth_exponent(&rows).unwrap() - 1.5).abs() < 1e-9);
        assert_eq!(growth_exponent(&rows[..1]), None);
    }

    #[test]
    fn stepped_sizes() {
        assert_eq!(BenchConfig::stepped(500, 100), vec![1, 100, 200, 300, 400, 500]);
        assert_eq!(BenchConfig::stepped(1, 10), vec![1]);
    }

    #[test]
    fn small_bench_runs() {
        let cfg = BenchConfig { sizes: vec![2, 8], ..Default::default() };
        let rows = bench_scalability(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].nodes > rows[0].nodes);
    }
}

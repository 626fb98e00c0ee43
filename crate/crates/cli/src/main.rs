// SPDX-License-Identifier: Apache-2.0

//! `scout`: compile, deploy, diff, localize and correlate network policies
//! from the command line, plus simulation sweeps and benchmarks.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use scout_core::Error;

use crate::config::{Config, CONFIG_ENV};
use crate::manifest::{digest, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "scout", version, about = "Policy deployment fault localization")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Primary output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the summary on standard output.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// TOML file with default settings.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic policy.
    Generate(GenerateArgs),
    /// Compile a policy into logical rules (JSON lines).
    Compile(CompileArgs),
    /// Draw a random fault plan and its change log.
    Inject(InjectArgs),
    /// Install compiled rules into simulated TCAMs, applying a fault plan.
    Deploy(DeployArgs),
    /// Diff desired against deployed rules.
    Check(CheckArgs),
    /// Build a switch or controller risk model.
    BuildModel(BuildModelArgs),
    /// Localize the faulty objects.
    Localize(LocalizeArgs),
    /// Attribute hypothesis objects to known fault signatures.
    Correlate(CorrelateArgs),
    /// Run a fault-injection sweep and write a CSV table.
    Simulate(SimulateArgs),
    /// Time model construction and localization as the network grows.
    Bench(BenchArgs),
    /// Run a built-in incident end to end.
    Scenario(ScenarioArgs),
    /// Re-run a recorded command and compare output digests.
    Replay(ReplayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Compile(_) => "compile",
            Command::Inject(_) => "inject",
            Command::Deploy(_) => "deploy",
            Command::Check(_) => "check",
            Command::BuildModel(_) => "build-model",
            Command::Localize(_) => "localize",
            Command::Correlate(_) => "correlate",
            Command::Simulate(_) => "simulate",
            Command::Bench(_) => "bench",
            Command::Scenario(_) => "scenario",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Args, serde::Serialize)]
pub struct GenerateArgs {
    #[arg(long, default_value = "testbed")]
    pub profile: String,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct CompileArgs {
    #[arg(long)]
    pub policy: PathBuf,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct InjectArgs {
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub faults: usize,
    /// Probability that a fault removes every dependent rule.
    #[arg(long)]
    pub mix: Option<f64>,
    /// Confine all faults to one switch.
    #[arg(long)]
    pub scope: Option<String>,
    /// Where to write the synthesized change log.
    #[arg(long)]
    pub changelog_out: Option<PathBuf>,
    /// Leave the faulty objects out of the change log.
    #[arg(long)]
    pub stale_changelog: bool,
    /// Background change-log entries.
    #[arg(long)]
    pub noise: Option<usize>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct DeployArgs {
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// JSON file `{capacity: {switch: n}, defaultCapacity, now}`.
    #[arg(long)]
    pub options: Option<PathBuf>,
    /// Per-switch TCAM capacity as `SWITCH=N`; repeatable.
    #[arg(long, value_name = "SWITCH=N")]
    pub capacity: Vec<String>,
    #[arg(long)]
    pub default_capacity: Option<usize>,
    /// Timestamp for events raised during deployment.
    #[arg(long)]
    pub now: Option<u64>,
    /// Where to write device events (JSON lines).
    #[arg(long)]
    pub faultlog_out: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct CheckArgs {
    #[arg(long)]
    pub desired: PathBuf,
    #[arg(long)]
    pub actual: PathBuf,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct BuildModelArgs {
    #[arg(long)]
    pub policy: PathBuf,
    /// Build the model of this switch; the controller model otherwise.
    #[arg(long)]
    pub switch: Option<String>,
    /// Mark failures from this missing-rule report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Missing-rule report to apply to the model first.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub changelog: Option<PathBuf>,
    /// `scout` or `score`.
    #[arg(long, default_value = "scout")]
    pub algo: String,
    /// Hit-ratio threshold for `score`.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// How far back from the newest change a change still counts as recent.
    #[arg(long)]
    pub window: Option<u64>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub hypothesis: PathBuf,
    #[arg(long)]
    pub changelog: PathBuf,
    /// Device event logs (JSON lines); repeatable.
    #[arg(long)]
    pub faultlog: Vec<PathBuf>,
    /// Signature list; the built-in TCAM overflow and unresponsive switch otherwise.
    #[arg(long)]
    pub signatures: Option<PathBuf>,
    /// Widen each fault's activity interval by this much on both sides.
    #[arg(long, default_value_t = 0)]
    pub slack: u64,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct SimulateArgs {
    #[arg(long, default_value = "testbed")]
    pub profile: String,
    /// Fault counts: `N`, `A-B` or a comma list.
    #[arg(long, default_value = "1-10")]
    pub faults: String,
    /// Comma-separated algorithms: `scout`, `score`, `score-<threshold>`.
    #[arg(long, default_value = "scout,score")]
    pub algo: String,
    /// Threshold used where `score` has none.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// `switch` or `controller`; testbed defaults to switch, production to controller.
    #[arg(long)]
    pub scope: Option<String>,
    #[arg(long)]
    pub stale_changelog: bool,
    #[arg(long)]
    pub window: Option<u64>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct BenchArgs {
    /// Comma-separated switch counts.
    #[arg(long)]
    pub sizes: Option<String>,
    #[arg(long)]
    pub faults: Option<usize>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct ScenarioArgs {
    /// tcam-overflow, unresponsive-switch or too-many-missing.
    pub name: String,
    /// Write the scenario's inputs into this directory.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Args, serde::Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Directory for the re-run's outputs; `<manifest>.replay` by default.
    #[arg(long)]
    pub into: Option<PathBuf>,
}

/// Resolved global settings.
pub struct Ctx {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub config: Config,
}

impl Ctx {
    pub fn out(&self) -> Result<&PathBuf, Error> {
        self.out.as_ref().ok_or_else(|| Error::Input("--out is required".into()))
    }
}

/// What a command read, wrote and wants to tell the user.
#[derive(Default)]
pub struct Run {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub parameters: serde_json::Value,
    pub summary: Vec<String>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (without the program name), runs the command and writes
/// its manifest. Returns the exit code.
pub fn run_args(args: &[String]) -> u8 {
    let cli = match Cli::try_parse_from(std::iter::once("scout".to_string()).chain(args.iter().cloned())) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let quiet = cli.quiet;
    let stage = cli.command.name();
    match execute(cli, args) {
        Ok(summary) => {
            if !quiet {
                for line in summary {
                    println!("{line}");
                }
            }
            0
        }
        Err(e) => {
            eprintln!("{stage}: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli, args: &[String]) -> Result<Vec<String>, Error> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let ctx = Ctx { seed: cli.seed.or(config.seed).unwrap_or(0), out: cli.out.clone(), config };
    let stage = cli.command.name();
    let run = match &cli.command {
        Command::Generate(a) => commands::generate(&ctx, a)?,
        Command::Compile(a) => commands::compile(&ctx, a)?,
        Command::Inject(a) => commands::inject(&ctx, a)?,
        Command::Deploy(a) => commands::deploy(&ctx, a)?,
        Command::Check(a) => commands::check(&ctx, a)?,
        Command::BuildModel(a) => commands::build_model(&ctx, a)?,
        Command::Localize(a) => commands::localize(&ctx, a)?,
        Command::Correlate(a) => commands::correlate(&ctx, a)?,
        Command::Simulate(a) => commands::simulate(&ctx, a)?,
        Command::Bench(a) => commands::bench(&ctx, a)?,
        Command::Scenario(a) => commands::scenario(&ctx, a)?,
        Command::Replay(a) => return commands::replay(a),
    };
    if let Some(primary) = run.outputs.first() {
        let manifest = RunManifest {
            subcommand: stage.to_string(),
            args: args.to_vec(),
            inputs: run.inputs.iter().map(|p| digest(p)).collect::<Result<_, _>>()?,
            seed: ctx.seed,
            parameters: run.parameters,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: run.outputs.iter().map(|p| digest(p)).collect::<Result<_, _>>()?,
        };
        manifest.save(&RunManifest::path_for(primary))?;
    }
    Ok(run.summary)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    ExitCode::from(run_args(&args))
}

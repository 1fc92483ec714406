//! The `envyfree` command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use envyfree::cake::{Piece, ValuationSpec};
use envyfree::harness::{gen_profile, run_profile, run_trials, ProtocolKind, TrialConfig};
use envyfree::protocol::Allocation;
use envyfree::verify::check_envy_free;
use serde_json::{json, Value};

use crate::api;
use crate::store::SessionStore;

#[derive(Debug, Parser)]
#[command(name = "envyfree", about = "Envy-free cake cutting for three and four agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a seeded campaign of random profiles and certify every outcome.
    Run(RunArgs),
    /// Run one profile and print its full trace as JSON.
    Trace(TraceArgs),
    /// Certify an allocation file against a profile.
    Verify(VerifyArgs),
    /// Start the HTTP mediator.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4, value_parser = agents_arg)]
    pub agents: u8,
    /// Also run the hand-built edge-case profiles.
    #[arg(long)]
    pub adversarial: bool,
    /// Write the full JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// JSON array of valuations; a seeded random profile if absent.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4, value_parser = agents_arg)]
    pub agents: u8,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// JSON array of valuations.
    #[arg(long)]
    pub profile: PathBuf,
    /// Allocation as `{"1": [[l, r], ...], ...}`, or a trace file holding one.
    pub allocation: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Directory for session logs; sessions are kept in memory only if absent.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}

fn agents_arg(s: &str) -> Result<u8, String> {
    match s {
        "3" => Ok(3),
        "4" => Ok(4),
        _ => Err("agents must be 3 or 4".into()),
    }
}

fn kind(agents: u8) -> ProtocolKind {
    if agents == 3 {
        ProtocolKind::ThreeAgent
    } else {
        ProtocolKind::FourAgent
    }
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn read_profile(path: &Path) -> Result<Vec<ValuationSpec>, String> {
    let v = read_json(path)?;
    let specs = v.get("agents").cloned().unwrap_or(v);
    serde_json::from_value(specs).map_err(|e| format!("{}: {e}", path.display()))
}

fn emit(report: Option<&PathBuf>, value: &Value) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    match report {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<bool, String> {
    let config = TrialConfig {
        trials: args.trials,
        seed: args.seed,
        protocol: kind(args.agents),
        adversarial_suite: args.adversarial,
        ..TrialConfig::default()
    };
    let report = run_trials(&config).map_err(|e| e.to_string())?;
    println!(
        "{} trials, {} failures, max queries {}, max cuts {}",
        report.trials.len(),
        report.failures.len(),
        report.max_queries,
        report.max_cuts
    );
    let missing = report.coverage.missing(config.protocol);
    if args.adversarial && !missing.is_empty() {
        println!("branches never reached: {}", missing.join(", "));
    }
    if let Some(path) = &args.report {
        emit(Some(path), &serde_json::to_value(&report).expect("serializable"))?;
    }
    if let Err(e) = report.certify() {
        eprintln!("{e}");
        return Ok(false);
    }
    Ok(!args.adversarial || missing.is_empty())
}

fn trace(args: TraceArgs) -> Result<bool, String> {
    let protocol = kind(args.agents);
    let specs = match &args.profile {
        Some(p) => read_profile(p)?,
        None => gen_profile(&TrialConfig { seed: args.seed, protocol, ..TrialConfig::default() }, 0),
    };
    if specs.len() != protocol.agents() {
        return Err(format!("profile has {} agents, expected {}", specs.len(), protocol.agents()));
    }
    let run = run_profile("trace", protocol, &specs);
    let allocation = run
        .four
        .as_ref()
        .map(|o| o.allocation.clone())
        .or_else(|| run.three.as_ref().map(|o| o.allocation.clone()));
    let out = json!({
        "profile": specs,
        "allocation": allocation,
        "record": run.record,
        "transcript": run.transcript.to_json(),
        "trace": run.trace,
    });
    emit(args.report.as_ref(), &out)?;
    Ok(run.record.passed())
}

fn verify(args: VerifyArgs) -> Result<bool, String> {
    let specs = read_profile(&args.profile)?;
    let v = read_json(&args.allocation)?;
    let alloc_json = v.get("allocation").cloned().unwrap_or(v);
    let allocation: Allocation =
        serde_json::from_value(alloc_json).map_err(|e| format!("{}: {e}", args.allocation.display()))?;
    let union = allocation.values().fold(Piece::empty(), |acc, p| acc.union(p));
    let complete = union == Piece::whole();
    let out = match check_envy_free(&allocation, &specs) {
        Ok(rep) => json!({ "envy_free": rep.envy_free, "complete": complete, "witnesses": rep.witnesses }),
        Err(e) => json!({ "envy_free": false, "complete": complete, "error": e.to_string() }),
    };
    let ok = out["envy_free"] == true && complete;
    emit(args.report.as_ref(), &out)?;
    Ok(ok)
}

fn serve(args: ServeArgs) -> Result<bool, String> {
    let store = match &args.data_dir {
        Some(dir) => SessionStore::open(dir).map_err(|e| e.to_string())?,
        None => SessionStore::in_memory(),
    };
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(api::serve(Arc::new(store), &args.addr)).map_err(|e| e.to_string())?;
    Ok(true)
}

/// Runs a parsed command; `Ok(false)` means a certification failure.
pub fn execute(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run(a) => run(a),
        Command::Trace(a) => trace(a),
        Command::Verify(a) => verify(a),
        Command::Serve(a) => serve(a),
    }
}

pub fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

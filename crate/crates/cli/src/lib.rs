//! Experiment runner for the `ergolab` binary: config loading, dispatch to
//! the core estimators, report writing and the acceptance suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod suite;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::commands::Output;
use crate::config::{ExperimentConfig, Overrides};
use crate::error::CliError;
use crate::report::{envelope, num, to_value, Artifacts};

#[derive(Debug, Parser)]
#[command(name = "ergolab", version, about = "Numerical ergodic theory experiments on expanding circle maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Topological pressure from separated sets, with a spectral cross-check.
    Pressure(RunArgs),
    /// Conformal eigenmeasure of the dual transfer operator.
    Conformal(RunArgs),
    /// Gibbs ratios of the conformal measure along one orbit.
    Gibbs(RunArgs),
    /// Topological entropy from spanning and separated sets, and local entropy.
    Entropy(RunArgs),
    /// Pesin defect of orbit, Dirac or Lebesgue measures.
    Pesin(RunArgs),
    /// Frequency of hyperbolic times.
    HypTimes(RunArgs),
    /// Pseudo-basin masses, weak-SRB-like verdicts and clustering.
    SrbScan(RunArgs),
    /// Large-deviation rates of the doubling map's digit frequency.
    Ldp(RunArgs),
    /// Every acceptance criterion, with a pass/fail table.
    Suite(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML experiment config; every key has a default.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, overrides `run.out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override any config key, e.g. `--set conformal.resolution=1024`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pressure(_) => "pressure",
            Command::Conformal(_) => "conformal",
            Command::Gibbs(_) => "gibbs",
            Command::Entropy(_) => "entropy",
            Command::Pesin(_) => "pesin",
            Command::HypTimes(_) => "hyp-times",
            Command::SrbScan(_) => "srb-scan",
            Command::Ldp(_) => "ldp",
            Command::Suite(_) => "suite",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Pressure(a)
            | Command::Conformal(a)
            | Command::Gibbs(a)
            | Command::Entropy(a)
            | Command::Pesin(a)
            | Command::HypTimes(a)
            | Command::SrbScan(a)
            | Command::Ldp(a)
            | Command::Suite(a) => a,
        }
    }
}

pub fn load_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let overrides = Overrides {
        seed: args.seed,
        out: args.out.clone(),
        set: args.set.clone(),
    };
    match &args.config {
        Some(path) => ExperimentConfig::load(path, &overrides),
        None => ExperimentConfig::from_toml_str("", &overrides),
    }
}

/// Runs one subcommand on a parsed config without writing anything.
pub fn execute(name: &str, cfg: &ExperimentConfig) -> Result<Output, CliError> {
    match name {
        "pressure" => commands::pressure(cfg),
        "conformal" => commands::conformal(cfg),
        "gibbs" => commands::gibbs(cfg),
        "entropy" => commands::entropy(cfg),
        "pesin" => commands::pesin(cfg),
        "hyp-times" => commands::hyp_times(cfg),
        "srb-scan" => commands::srb_scan(cfg),
        "ldp" => commands::ldp(cfg),
        other => Err(CliError::config("<subcommand>", format!("unknown subcommand `{other}`"))),
    }
}

/// Writes `report.json` and every table; returns the written paths.
pub fn write_output(name: &str, cfg: &ExperimentConfig, out: &Output) -> Result<Vec<PathBuf>, CliError> {
    let mut art = Artifacts::new(&cfg.run.out, name)?;
    for t in &out.tables {
        art.write_csv(&t.name, &t.header.iter().map(String::as_str).collect::<Vec<_>>(), &t.rows)?;
    }
    for (file, bytes) in &out.raw {
        art.write_bytes(file, bytes)?;
    }
    art.write_json("report.json", &envelope(name, cfg, out.result.clone()))?;
    Ok(art.written().to_vec())
}

fn run_suite(cfg: &ExperimentConfig) -> Result<bool, CliError> {
    let mut ids = cfg.suite.criteria.clone();
    ids.sort_unstable();
    ids.dedup();
    if let Some(bad) = ids.iter().find(|&&i| !(1..=10).contains(&i)) {
        return Err(CliError::config("suite.criteria", format!("unknown criterion {bad}")));
    }
    let run = suite::run_suite(&ids, cfg.run.seed)?;
    println!("{:<4} {:<34} {:<6} {:>9}", "id", "criterion", "result", "seconds");
    for (r, t) in run.results.iter().zip(&run.elapsed) {
        println!(
            "{:<4} {:<34} {:<6} {:>9.2}",
            r.id,
            r.title,
            if r.pass { "PASS" } else { "FAIL" },
            t.as_secs_f64()
        );
        for c in r.checks.iter().filter(|c| !c.pass) {
            println!("       failed: {} = {} (want {})", c.name, c.value, c.bound);
        }
    }
    let all = run.results.iter().all(|r| r.pass);
    let mut art = Artifacts::new(&cfg.run.out, "suite")?;
    let rows: Vec<Vec<String>> = run
        .results
        .iter()
        .flat_map(|r| {
            r.checks
                .iter()
                .map(move |c| vec![r.id.to_string(), r.title.clone(), c.name.clone(), num(c.value), c.bound.clone(), c.pass.to_string()])
        })
        .collect();
    art.write_csv("checks.csv", &["criterion", "title", "check", "value", "bound", "pass"], &rows)?;
    art.write_json(
        "report.json",
        &envelope("suite", cfg, json!({"all_pass": all, "criteria": to_value(&run.results)})),
    )?;
    Ok(all)
}

/// Full command-line entry point; returns the process exit status.
pub fn run(cli: Cli) -> i32 {
    let name = cli.command.name();
    let outcome = load_config(cli.command.args()).and_then(|cfg| {
        if name == "suite" {
            return run_suite(&cfg).and_then(|ok| {
                if ok {
                    Ok(())
                } else {
                    Err(CliError::SuiteFailed("see the table above".into()))
                }
            });
        }
        let out = execute(name, &cfg)?;
        let paths = write_output(name, &cfg, &out)?;
        println!("{name}: {}", out.summary);
        for p in paths {
            println!("  wrote {}", p.display());
        }
        Ok(())
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! Command-line front end: config resolution, subcommands and artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde_json::json;

use crate::error::CliError;
use crate::output::Artifacts;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Simulate,
    ChainSets,
    SingleFiber,
    ControlSets,
    Equilibrium,
    LiftVerify,
    Mixing,
    Verify,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::ChainSets => "chain-sets",
            Subcommand::SingleFiber => "single-fiber",
            Subcommand::ControlSets => "control-sets",
            Subcommand::Equilibrium => "equilibrium",
            Subcommand::LiftVerify => "lift-verify",
            Subcommand::Mixing => "mixing",
            Subcommand::Verify => "verify",
        }
    }
}

/// Chain control sets of control-affine systems over torus driving flows.
#[derive(Debug, Parser)]
#[command(name = "skewchain", version)]
pub struct Cli {
    pub subcommand: Subcommand,
    /// TOML config, or a `manifest.json` from an earlier run.
    pub config: PathBuf,
    /// Worker threads for the parallel stages; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

pub struct Report {
    pub manifest: PathBuf,
    pub status: &'static str,
    pub summary: serde_json::Value,
    pub violations: Vec<String>,
}

/// Resolves the config, runs the subcommand and writes the artifacts to
/// `out` (or the configured directory). Property violations are reported,
/// not returned as errors, so the manifest is still written.
pub fn run(sub: Subcommand, config: &Path, out: Option<&Path>) -> Result<Report, CliError> {
    let file = config::load(config)?;
    let setup = config::resolve(&file)?;
    let mut arts = Artifacts::default();
    arts.mark("resolve");
    let outcome = match sub {
        Subcommand::Simulate => commands::simulate(&setup, &mut arts)?,
        Subcommand::ChainSets => commands::chain_sets(&setup, &mut arts)?,
        Subcommand::SingleFiber => commands::single_fiber(&setup, &mut arts)?,
        Subcommand::ControlSets => commands::control_sets(&setup, &mut arts)?,
        Subcommand::Equilibrium => commands::equilibrium(&setup, &mut arts)?,
        Subcommand::LiftVerify => commands::lift_verify(&setup, &mut arts)?,
        Subcommand::Mixing => commands::mixing(&setup, &mut arts)?,
        Subcommand::Verify => {
            let suites = verify::run(&setup, &mut arts);
            let violations =
                suites.iter().filter(|s| s.status == "fail").map(|s| format!("{}: {}", s.name, s.detail)).collect();
            if setup.wants("json") {
                arts.add_json("verify.json", &suites)?;
            }
            commands::Outcome { summary: json!({ "suites": suites }), violations }
        }
    };
    let status = if outcome.violations.is_empty() { "ok" } else { "violations" };
    let dir = output::output_dir(&setup.resolved, out);
    let manifest = arts.write(
        &dir,
        sub.name(),
        &setup.resolved,
        status,
        json!({ "result": outcome.summary, "violations": outcome.violations }),
        rayon::current_num_threads(),
    )?;
    Ok(Report { manifest, status, summary: outcome.summary, violations: outcome.violations })
}

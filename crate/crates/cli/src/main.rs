// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use gemini_core::gemini::PenaltyMode;
use gemini_core::SCHEMA_VERSION;
use serde::{Deserialize, Serialize};

use args::{Cli, Command, DataArgs};

/// What gets written to `run_config.json`: enough to repeat a run exactly.
#[derive(Debug, Serialize, Deserialize)]
struct RunConfig {
    schema_version: u32,
    run: Command,
}

fn absolute(p: &Path) -> Result<PathBuf> {
    p.canonicalize().with_context(|| format!("cannot resolve {}", p.display()))
}

fn resolve_data(data: &mut DataArgs) -> Result<()> {
    if let Some(m) = &data.manifest {
        data.manifest = Some(absolute(m)?);
    }
    data.input = data.input.iter().map(|p| absolute(p)).collect::<Result<_>>()?;
    Ok(())
}

/// Normalizes a command so its serialized form is self-contained.
fn resolve(cmd: &mut Command) -> Result<()> {
    match cmd {
        Command::Estimate(a) => {
            resolve_data(&mut a.data)?;
            match (a.lambda_a, a.lambda_b) {
                (Some(_), Some(_)) => a.penalty_mode = PenaltyMode::Explicit,
                (None, None) if a.penalty_mode == PenaltyMode::Explicit => {
                    bail!("explicit penalty mode needs --lambda-a and --lambda-b")
                }
                (None, None) => {}
                _ => bail!("--lambda-a and --lambda-b must be given together"),
            }
        }
        Command::Cv(a) => resolve_data(&mut a.data)?,
        Command::Diagnose(a) => {
            if let Some(p) = &a.input {
                a.input = Some(absolute(p)?);
            }
        }
        Command::Simulate(_) | Command::Roc(_) | Command::Rerun(_) => {}
    }
    Ok(())
}

fn dispatch(mut cmd: Command) -> Result<()> {
    if let Command::Rerun(r) = &cmd {
        let text = std::fs::read_to_string(&r.config).with_context(|| format!("reading {}", r.config.display()))?;
        let saved: RunConfig = serde_json::from_str(&text).context("parsing run config")?;
        if saved.schema_version != SCHEMA_VERSION {
            bail!("unsupported run config schema version {}", saved.schema_version);
        }
        if matches!(saved.run, Command::Rerun(_)) {
            bail!("a run config cannot itself be a rerun");
        }
        let out = r.out.clone();
        let mut run = saved.run;
        run.set_out_dir(out);
        return dispatch(run);
    }
    resolve(&mut cmd)?;
    let out = cmd.out_dir().clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    match &cmd {
        Command::Simulate(a) => commands::simulate(a)?,
        Command::Estimate(a) => commands::estimate(a)?,
        Command::Roc(a) => commands::roc(a)?,
        Command::Cv(a) => commands::cv(a)?,
        Command::Diagnose(a) => commands::diagnose(a)?,
        Command::Rerun(_) => unreachable!("handled above"),
    }
    let config = RunConfig { schema_version: SCHEMA_VERSION, run: cmd };
    commands::write_json(&out.join("run_config.json"), &config)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<gemini_core::Error>() {
            return if e.is_io() {
                4
            } else if e.is_config() {
                2
            } else {
                3
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return 4;
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

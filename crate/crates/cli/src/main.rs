mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::commands::Run;
use crate::config::{section, HwSection, RunConfig, SigprocSection};
use crate::output::{resolve_out_dir, Outputs};

/// Bad input or configuration (exit code 1).
#[derive(Debug)]
pub struct UserError(pub String);

impl UserError {
    pub fn msg(s: impl Into<String>) -> anyhow::Error {
        anyhow::Error::new(UserError(s.into()))
    }

    pub fn wrap(e: impl std::fmt::Display) -> anyhow::Error {
        Self::msg(e.to_string())
    }
}

impl std::fmt::Display for UserError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UserError {}

#[derive(Parser)]
#[command(name = "eoattn", version, about = "Electro-optic attention toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides EOATTN_OUT and the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Fit a transfer curve and write an activation parameter file.
    Calibrate,
    /// Evaluate an activation on given or generated inputs.
    Eval,
    /// Train a toy model and write its metric history.
    Train,
    /// Sweep bit depth or noise over training/evaluation runs.
    Sweep,
    /// Latency, power and energy tables.
    Hwmodel,
    /// Filter and integrate a modulator trace into symbol error statistics.
    Sigproc,
}

fn run(cli: &Cli) -> Result<()> {
    let (cfg, base) = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None if matches!(cli.command, Command::Hwmodel | Command::Sigproc) => {
            (RunConfig::default(), PathBuf::from("."))
        }
        None => return Err(UserError::msg("--config is required for this command")),
    };
    let dir = resolve_out_dir(cli.out.as_deref(), cfg.output.dir.as_deref(), &base);
    let mut run = Run {
        cfg: &cfg,
        base,
        seed: cli.seed.unwrap_or(cfg.seed),
        out: Outputs::new(dir)?,
    };
    // The effective configuration, seed included, travels with the results.
    let effective = RunConfig {
        seed: run.seed,
        ..cfg.clone()
    };
    run.out
        .write("run_config.toml", &effective.to_toml_string()?)?;
    match cli.command {
        Command::Calibrate => commands::calibrate(&mut run, section(&cfg.calibrate, "calibrate")?)?,
        Command::Eval => commands::eval(&mut run, section(&cfg.eval, "eval")?)?,
        Command::Train => commands::train(&mut run, section(&cfg.train, "train")?)?,
        Command::Sweep => commands::sweep(&mut run, section(&cfg.sweep, "sweep")?)?,
        Command::Hwmodel => commands::hwmodel(
            &mut run,
            cfg.hwmodel.as_ref().unwrap_or(&HwSection::default()),
        )?,
        Command::Sigproc => commands::sigproc(
            &mut run,
            cfg.sigproc.as_ref().unwrap_or(&SigprocSection::default()),
        )?,
    }
    for p in run.out.written() {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

/// 2 for numerical failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UserError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<eoattn_core::Error>() {
            return if e.is_numerical() { 2 } else { 1 };
        }
        if let Some(e) = cause.downcast_ref::<eoattn_nn::Error>() {
            return if e.is_numerical() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let diverged = anyhow::Error::new(eoattn_nn::Error::Divergence {
            step: 3,
            loss: f64::NAN,
        });
        assert_eq!(exit_code(&diverged), 2);
        let fit = anyhow::Error::new(eoattn_core::Error::NonConvergence {
            iterations: 9,
            rms_residual: 1.0,
        });
        assert_eq!(exit_code(&fit.context("calibrating")), 2);
        let parse = anyhow::Error::new(eoattn_core::Error::Parse {
            line: 4,
            msg: "x".into(),
        });
        assert_eq!(exit_code(&parse), 1);
        assert_eq!(exit_code(&UserError::msg("bad")), 1);
    }

    #[test]
    fn cli_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let c = Cli::try_parse_from([
            "eoattn", "train", "--config", "a.toml", "--seed", "4", "--out", "o",
        ])
        .unwrap();
        assert!(c.command == Command::Train && c.seed == Some(4));
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use manifold_mc_cli::commands::{self, RunContext};
use manifold_mc_cli::config::{ConfigReader, RawConfig};
use manifold_mc_cli::CliError;

/// MCMC sampling and multi-phase integration on constraint manifolds.
#[derive(Parser)]
#[command(name = "manifold-mc", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a density on a manifold and write samples, summary and
    /// histograms.
    Sample(RunArgs),
    /// Estimate an integral over a manifold with nested-ball stages.
    Integrate(RunArgs),
    /// Emit the variance-model curves and their minimizers.
    AnalyzeNu(RunArgs),
    /// Run a named validation suite (config key validate.suite).
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// RNG seed; overrides run.seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides output.dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repeatable key=value override applied after the file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

type CmdFn = fn(&mut ConfigReader, &RunContext) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, run_fn): (&RunArgs, CmdFn) =
        match &cli.cmd {
            Cmd::Sample(a) => (a, commands::cmd_sample),
            Cmd::Integrate(a) => (a, commands::cmd_integrate),
            Cmd::AnalyzeNu(a) => (a, commands::cmd_analyze_nu),
            Cmd::Validate(a) => (a, commands::cmd_validate),
        };

    let mut raw = RawConfig::load(&args.config)?;
    for o in &args.overrides {
        raw.apply_override(o)?;
    }
    let mut reader = ConfigReader::new(raw);
    let seed = match args.seed {
        Some(s) => {
            // Still consume the config key so it is not reported unknown.
            let _ = reader.u64_opt("run.seed")?;
            s
        }
        None => reader.u64_or("run.seed", 0)?,
    };
    let out_dir = match &args.out {
        Some(p) => {
            let _ = reader.str_opt("output.dir");
            p.clone()
        }
        None => PathBuf::from(reader.str_or("output.dir", "out")),
    };
    let ctx = RunContext { out_dir, seed, config_hash: reader.hash_hex() };

    run_fn(&mut reader, &ctx)?;
    reader.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

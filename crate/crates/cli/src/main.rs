#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};
use commands::Ctx;
use error::CliError;
use output::Output;
use std::path::PathBuf;
use std::process::ExitCode;

/// Utility maximisation under intrinsic wealth constraints.
#[derive(Debug, Parser)]
#[command(name = "intrinsic", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when absent.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `-s market.sigma=0.4`.
    #[arg(short = 's', long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (default: run.out_dir, then $INTRINSIC_OUT_DIR, then ./out).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Single-threaded execution.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Floor, binding horizon and utility over a grid of call quantities.
    CallSweep,
    /// Terminal wealth distribution for each configured call quantity.
    CallCdf {
        /// P, Q or Qbar; overrides call.measure.
        #[arg(long)]
        measure: Option<String>,
    },
    /// One-touch utility over initial wealth for each hedging mode.
    OnetouchUtility,
    /// Certainty equivalent of the semi-static hedge over hedge strikes.
    OnetouchCeK,
    /// Static consistency of a `strike,price` call curve.
    ArbCheck {
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Passage and survival densities for a line.
    Densities,
    /// Invariant and oracle checks.
    Verify,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CallSweep => "call-sweep",
            Command::CallCdf { .. } => "call-cdf",
            Command::OnetouchUtility => "onetouch-utility",
            Command::OnetouchCeK => "onetouch-ce-k",
            Command::ArbCheck { .. } => "arb-check",
            Command::Densities => "densities",
            Command::Verify => "verify",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut overrides = cli.set.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    if cli.sequential {
        overrides.push("run.sequential=true".into());
    }
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    let out = Output::new(cli.command.name(), cli.out.as_deref(), &cfg)?;
    let mut ctx = Ctx { cfg: &cfg, out };
    let result = match &cli.command {
        Command::CallSweep => commands::call_sweep(&mut ctx),
        Command::CallCdf { measure } => commands::call_cdf(&mut ctx, measure.as_deref()),
        Command::OnetouchUtility => commands::onetouch_utility(&mut ctx),
        Command::OnetouchCeK => commands::onetouch_ce_k(&mut ctx),
        Command::ArbCheck { curve } => commands::arb_check(&mut ctx, curve.as_deref()),
        Command::Densities => commands::densities(&mut ctx),
        Command::Verify => commands::verify(&mut ctx),
    };
    ctx.out.finish(&cfg)?;
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

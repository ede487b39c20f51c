//! `pivotlab`: generate instances, run pivot rules, sweep switch counts,
//! verify the property suite and drive the flux LP.
//!
//! Exit codes: 0 success, 2 property failure, 3 invariant abort, 4 usage,
//! 1 I/O failure.

mod commands;
mod instance;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::instance::{Family, InstanceArgs};

#[derive(Parser, Debug)]
#[command(name = "pivotlab", version, about = "Exact policy iteration and simplex pivot-rule experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write an instance as JSON (plus the gadget map for D).
    Gen(GenArgs),
    /// Run policy iteration from the initial policy and write a JSONL trace.
    Run(RunArgs),
    /// Run a grid of experiments and write one CSV row per cell.
    Sweep(SweepArgs),
    /// Run the property suite and print one line per property.
    Verify(VerifyArgs),
    /// Flux LP export, simplex runs and comparison with policy iteration.
    Lp {
        #[command(subcommand)]
        action: LpAction,
    },
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    out: PathBuf,
    /// Gadget map output; defaults to `<out stem>.gadgets.json`.
    #[arg(long)]
    gadget_map: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// bland, dantzig, li, mix:<seed>, sched:<file> or sched:<rule,rule,...>
    #[arg(long, default_value = "bland")]
    rule: String,
    /// Defaults to 2^(n+6) on B and 2^(n+8) on D.
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "B")]
    families: Vec<Family>,
    /// Comma-separated; `mix` expands over --seeds.
    #[arg(long, value_delimiter = ',', required = true)]
    rules: Vec<String>,
    #[arg(long, default_value_t = 1)]
    n_min: u32,
    #[arg(long)]
    n_max: u32,
    #[arg(long, value_delimiter = ',', default_value = "7")]
    seeds: Vec<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    csv: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=12))]
    n_max: u32,
    /// Largest n for gadget-family checks (default min(n-max, 5)).
    #[arg(long)]
    d_max: Option<u32>,
    /// Largest n for Largest Increase on D (default min(n-max, 4)).
    #[arg(long)]
    li_max: Option<u32>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum LpAction {
    /// Write the flux LP.
    Export {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: LpFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the exact simplex from the basis of a policy.
    Run {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value = "bland")]
        rule: String,
        #[arg(long, value_enum, default_value = "initial")]
        start: Start,
        #[arg(long)]
        max_pivots: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run both engines with one rule and diff the switch and pivot sequences.
    Compare {
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value = "bland")]
        rule: String,
        #[arg(long)]
        max_iters: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LpFormat {
    /// Exact rationals.
    Json,
    /// CPLEX-style text with decimal coefficients.
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Start {
    Initial,
    Optimal,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Core(pivotlab::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        use pivotlab::Error as E;
        match self {
            CliError::Usage(_) => 4,
            CliError::Io(_) => 1,
            CliError::Core(E::Parse(_) | E::Domain(_) | E::BadProbability(_) | E::InvalidMdp(_) | E::InvalidPolicy(_)) => 4,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<pivotlab::Error> for CliError {
    fn from(e: pivotlab::Error) -> Self {
        CliError::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(4),
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a.instance, &a.out, a.gadget_map.as_deref()),
        Command::Run(a) => commands::run(&a.instance, &a.rule, a.max_iters, a.out.as_deref()),
        Command::Sweep(a) => commands::sweep(&commands::SweepPlan {
            families: a.families,
            rules: a.rules,
            n_min: a.n_min,
            n_max: a.n_max,
            seeds: a.seeds,
            max_iters: a.max_iters,
            csv: a.csv,
        }),
        Command::Verify(a) => commands::verify(a.n_max, a.d_max, a.li_max, a.samples, a.seed),
        Command::Lp { action } => match action {
            LpAction::Export { instance, format, out } => {
                commands::lp_export(&instance, matches!(format, LpFormat::Json), &out)
            }
            LpAction::Run { instance, rule, start, max_pivots, out } => {
                commands::lp_run(&instance, &rule, start == Start::Optimal, max_pivots, out.as_deref())
            }
            LpAction::Compare { instance, rule, max_iters } => commands::lp_compare(&instance, &rule, max_iters),
        },
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("pivotlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

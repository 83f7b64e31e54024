//! Command-line front end of `wheelsim`: experiment configuration plus the
//! `train`, `eval`, `gen-map` and `replay` commands.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::RunConfig;
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "wheelsim", version, about = "Train and evaluate wheeled-robot policies in simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy and write a run directory.
    Train(TrainArgs),
    /// Roll out a checkpoint and write a report with trajectories.
    Eval(EvalArgs),
    /// Generate a traversability map or heightfield.
    GenMap(GenMapArgs),
    /// Summarize a trajectory file and export per-turn telemetry.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Dotted-key override, e.g. `env.num_envs=64`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Shorthand for `--set run.seed=N`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory. Defaults to `<root>/<name>-<unix seconds>`, where the
    /// root is `run.output_dir`, then the environment variable, then `runs`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ControllerKind {
    /// Policy mean action.
    #[default]
    Policy,
    /// Uniform random actions.
    Random,
    /// Zero action.
    Zero,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Run configuration supplying the `eval` section. Defaults to
    /// `config.toml` of the checkpoint's run directory when present.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override of the `eval` section; `env.*` keys address `eval.env.*`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    pub controller: ControllerKind,
    /// Output directory. Defaults to `<checkpoint stem>.eval` beside the
    /// checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MapTask {
    Visual,
    Elevation,
}

#[derive(Debug, Args)]
pub struct GenMapArgs {
    /// Task whose scene to generate; taken from the configuration if absent.
    #[arg(long, value_enum)]
    pub task: Option<MapTask>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Per-turn table path. Defaults to `<trajectory stem>.turns.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => commands::train(&a).map(|_| ()),
        Command::Eval(a) => commands::eval(&a).map(|_| ()),
        Command::GenMap(a) => commands::gen_map(&a),
        Command::Replay(a) => commands::replay(&a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod report;

use commands::CliError;
use tempdiag::atemporal::DEFAULT_CANDIDATE_CAP;
use tempdiag::{ExplanationCriterion, ThresholdMode};

/// Temporal model-based diagnosis over Markov-chain mode evolutions.
#[derive(Parser, Debug)]
#[command(name = "tempdiag", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: RunConfig,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a model file and, optionally, an observation file against it.
    Validate { model: PathBuf, observations: Option<PathBuf> },
    /// State and fault classification of every component's chain.
    Classify { model: PathBuf },
    /// Mode distribution of every component at the requested instants.
    Propagate { model: PathBuf },
    /// Ranked temporal diagnoses for an observation stream.
    Diagnose {
        model: PathBuf,
        observations: Option<PathBuf>,
        /// Explicit candidate layers, used instead of solving the observations.
        #[arg(long, conflicts_with = "observations")]
        candidates: Option<PathBuf>,
    },
    /// Sample mode trajectories and the observation streams they produce.
    Simulate {
        model: PathBuf,
        /// Number of trajectories, seeded `seed, seed + 1, ...`.
        #[arg(long, default_value_t = 1)]
        count: u64,
        /// Print only the first trajectory's observation stream.
        #[arg(long)]
        stream_only: bool,
    },
    /// Joint-probability table for explicitly given trajectories.
    Rank { model: PathBuf, trajectories: PathBuf },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum ThresholdArg {
    Global,
    PerComponent,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum CriterionArg {
    Abductive,
    ConsistencyBased,
}

#[derive(Args, Debug)]
pub struct RunConfig {
    /// Plausibility threshold; a decimal or a fraction such as 1/100.
    #[arg(long, global = true, default_value = "0")]
    pub sigma: String,
    #[arg(long, global = true, value_enum, default_value = "global")]
    pub threshold_mode: ThresholdArg,
    #[arg(long, global = true, value_enum, default_value = "abductive")]
    pub criterion: CriterionArg,
    /// Revise probabilities against the admitted diagnoses.
    #[arg(long, global = true)]
    pub revise: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub horizon: Option<u64>,
    /// Comma-separated time points.
    #[arg(long, global = true, value_delimiter = ',')]
    pub instants: Option<Vec<u64>>,
    /// Upper bound on enumerated assignments and trajectories.
    #[arg(long, global = true, default_value_t = DEFAULT_CANDIDATE_CAP)]
    pub cap: u64,
}

impl RunConfig {
    pub fn threshold_mode(&self) -> ThresholdMode {
        match self.threshold_mode {
            ThresholdArg::Global => ThresholdMode::Global,
            ThresholdArg::PerComponent => ThresholdMode::PerComponent,
        }
    }

    pub fn criterion(&self) -> ExplanationCriterion {
        match self.criterion {
            CriterionArg::Abductive => ExplanationCriterion::Abductive,
            CriterionArg::ConsistencyBased => ExplanationCriterion::ConsistencyBased,
        }
    }
}

// A closed stdout (e.g. piped into `head`) is not an error worth a panic.
fn emit(json: &str) {
    let _ = writeln!(io::stdout().lock(), "{json}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(out) => {
            emit(&out.json);
            eprint!("{}", out.summary);
            ExitCode::SUCCESS
        }
        Err(err) => {
            let CliError(body) = &err;
            emit(&err.to_json());
            match &body.file {
                Some(file) => eprintln!("error: {file}: {} [{}]: {}", body.element, body.rule, body.message),
                None => eprintln!("error: {} [{}]: {}", body.element, body.rule, body.message),
            }
            ExitCode::from(body.exit_code)
        }
    }
}

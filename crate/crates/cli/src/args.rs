use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "fvmc", version, about = "Tabular MDP solving and first-visit Monte-Carlo experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration for the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed; overrides the one in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for replicate-level parallelism.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,

    /// Directory for artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Encoding of tables and traces [default: csv]. Reports are always JSON.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

impl GlobalArgs {
    pub fn table_format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal values and Q-function of an MDP file.
    Solve {
        mdp: PathBuf,
        /// Skip the exact rational solve.
        #[arg(long)]
        float_only: bool,
    },
    /// Check an MDP file against every model invariant.
    Validate { mdp: PathBuf },
    /// First-visit Monte-Carlo control with a running mean.
    RunFva,
    /// Monte-Carlo control with visit-count step sizes.
    RunGeneral,
    /// Run the exact divergent-control automaton.
    Counterexample {
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Exact sweep of the ε-greedy policy-operator bound.
    CheckContraction {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Robbins-Monro recursion over several seeds.
    CheckRobbinsMonro,
    /// Abstract stochastic approximation with its dominating recursion.
    CheckAbstractSa,
    /// Write a seeded random MDP.
    GenMdp,
    /// Compare infinite- and finite-episode runs on shared random streams.
    CoupleCheck,
}

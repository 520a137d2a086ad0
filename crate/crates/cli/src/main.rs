use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod args;
mod checks;
mod cx;
mod error;
mod experiment;
mod io;
mod model;

use args::{Cli, Command};
use error::{CliError, CliResult};

fn dispatch(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Solve { mdp, float_only } => model::solve(g, mdp, *float_only),
        Command::Validate { mdp } => model::validate(g, mdp),
        Command::GenMdp => model::gen_mdp(g),
        Command::RunFva => experiment::run_experiment(g, false),
        Command::RunGeneral => experiment::run_experiment(g, true),
        Command::CoupleCheck => experiment::couple_check(g),
        Command::Counterexample { steps } => cx::counterexample(g, *steps),
        Command::CheckContraction { count } => checks::check_contraction(g, *count),
        Command::CheckRobbinsMonro => checks::check_robbins_monro(g),
        Command::CheckAbstractSa => checks::check_abstract_sa(g),
    }
}

/// Errors go to stderr as one JSON line; the exit code is 2.
fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.render().to_string().trim().to_string())),
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

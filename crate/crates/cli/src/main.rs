//! Command-line front end: estimation, cross-validation, RDA and experiment
//! reproduction.

mod args;
mod commands;
mod error;
mod io;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => commands::estimate(a),
        Command::Cv(a) => commands::cv(a),
        Command::RdaTrain(a) => commands::rda_train(a),
        Command::RdaPredict(a) => commands::rda_predict(a),
        Command::Reproduce(a) => commands::reproduce(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

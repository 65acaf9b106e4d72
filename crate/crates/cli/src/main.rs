mod acceptance;
mod analyze;
mod args;
mod error;
mod front;
mod output;
mod sample;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::FkppFront(a) => front::run(a),
        Command::BbmSample(a) => sample::run(a),
        Command::Analyze(a) => analyze::run(a),
        Command::Acceptance(a) => acceptance::run(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

use std::process::ExitCode;

use clap::Parser;
use tricomp_core::{Error, ErrorCategory};

mod args;
mod commands;

use args::{Cli, Command};

fn exit_code(err: &Error) -> u8 {
    match err.category() {
        ErrorCategory::Usage => 2,
        ErrorCategory::Data => 3,
        ErrorCategory::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::EstimatePrior(a) => commands::estimate_prior(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::BoundCurve(a) => commands::bound_curve(a),
        Command::Bound(a) => commands::bound(a),
        Command::Experiment(a) => commands::experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // single line: error[<code>]: <message>
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {}", e.code(), message);
            ExitCode::from(exit_code(&e))
        }
    }
}

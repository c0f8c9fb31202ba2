use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = pwalk::Args::parse();
    ExitCode::from(pwalk::run(&args))
}

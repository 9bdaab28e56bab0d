mod args;
mod commands;
mod error;
mod remote;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, EvalCommand, RegistryCommand};
use error::CliError;

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Edit(a) => commands::edit(a),
        Command::Eval { command: EvalCommand::Run(a) } => commands::eval_run(a),
        Command::Registry { command: RegistryCommand::Validate { dir } } => commands::registry_validate(dir),
        Command::Registry { command: RegistryCommand::Index { dir, out, dim } } => {
            commands::registry_index(dir, out.as_deref(), *dim)
        }
        Command::Serve(a) => commands::serve(a),
        Command::Export(a) => commands::export(a),
        Command::Session { command } => remote::run(cli.server.as_deref(), command),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if cli.json_errors {
                eprintln!("{}", e.to_json());
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::FAILURE
        }
    }
}

use std::io::{IsTerminal, Write};
use std::process::ExitCode;

use clap::Parser;
use ddbforge_cli::{run, CliConfig, EXIT_INPUT};

fn main() -> ExitCode {
    let mut config = match CliConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    config.no_color |= !std::io::stdout().is_terminal();
    let outcome = run(&config);
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    ExitCode::from(outcome.code as u8)
}

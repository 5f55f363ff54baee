use std::path::PathBuf;
use std::process::ExitCode;

use biharm::cli::{run, Cli, EXIT_USAGE};
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    let env_out = std::env::var_os("BIHARM_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    let outcome = run(cli, env_out);
    print!("{}", outcome.stdout);
    eprint!("{}", outcome.stderr);
    ExitCode::from(outcome.code as u8)
}

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use lqmle::{run, Cli, CliError};

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn main_inner(cli: &Cli) -> Result<(), CliError> {
    let art = run(cli)?;
    match cli.command.out() {
        Some(path) => {
            write(path, &art.body)?;
            if let Some(side) = &art.sidecar {
                let mut name = path.as_os_str().to_owned();
                name.push(".manifest.json");
                write(Path::new(&name), side)?;
            }
        }
        None => {
            std::io::stdout()
                .write_all(art.body.as_bytes())
                .map_err(|e| CliError::io("<stdout>", e))?;
            if let Some(side) = &art.sidecar {
                eprint!("{side}");
            }
        }
    }
    match art.deferred {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match main_inner(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lqmle: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

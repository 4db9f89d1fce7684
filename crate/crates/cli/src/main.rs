use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use dpncaret_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("DPNCARET_LOG")).init();
    let cli = Cli::parse();
    let outcome = match run(cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let written = match &outcome.out {
        Some(p) => std::fs::write(p, &outcome.text)
            .map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => std::io::stdout()
            .write_all(outcome.text.as_bytes())
            .map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    ExitCode::from(outcome.code as u8)
}

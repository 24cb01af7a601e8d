use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use rdl_cli::{exit_code, run, ExperimentConfig};

fn main() -> ExitCode {
    let config = ExperimentConfig::parse();
    match run(&config) {
        Ok(report) => {
            // A closed pipe (e.g. `| head`) is not an error of the run.
            let _ = writeln!(std::io::stdout(), "{}", report.to_json_pretty());
            ExitCode::from(report.exit_code)
        }
        Err(e) => {
            let msg = serde_json::json!({ "error": e.code(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::process::ExitCode;

use rosenau_fp_cli::{configure_threads, parse_config, run_experiment, write_outcome, UsageError};

fn usage_exit(e: &UsageError) -> ExitCode {
    match e {
        UsageError::Args(err) => {
            let _ = err.print();
            if err.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        _ => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    if let Err(e) = configure_threads() {
        return usage_exit(&e);
    }
    let cfg = match parse_config(std::env::args_os().skip(1), None) {
        Ok(cfg) => cfg,
        Err(e) => return usage_exit(&e),
    };
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(3);
        }
    };
    if let Err(e) = write_outcome(&cfg, &outcome) {
        eprintln!("error: {e:#}");
        return ExitCode::from(3);
    }
    match outcome.passed {
        Some(false) => {
            eprintln!("assertion failed: see the pass column of the report");
            ExitCode::from(1)
        }
        _ => ExitCode::SUCCESS,
    }
}

use std::process::ExitCode;

use ldrate_cli::error::exit;
use ldrate_cli::{output, parse_and_validate, run, CliError};

const THREADS_VAR: &str = "LDP_RATE_THREADS";

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_VAR} must be a nonnegative integer, got `{value}`"))?;
    // 0 keeps the hardware default
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("cannot configure worker pool: {e}"))
}

fn run_cli() -> Result<i32, CliError> {
    let cfg = parse_and_validate(std::env::args_os())?;
    let outcome = run::execute(&cfg)?;
    output::emit(&cfg, &outcome.report)?;
    if cfg.output.is_some() {
        for line in &outcome.report.summary {
            println!("{line}");
        }
    }
    if outcome.order_missed {
        eprintln!("ldrate: fitted order misses the declared target");
        return Ok(exit::ORDER_MISS);
    }
    Ok(exit::SUCCESS)
}

fn main() -> ExitCode {
    if let Err(msg) = configure_threads() {
        eprintln!("ldrate: {msg}");
        return ExitCode::from(exit::VALIDATION as u8);
    }
    let code = match run_cli() {
        Ok(code) => code,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            CliError::Usage(e).exit_code()
        }
        Err(e) => {
            eprintln!("ldrate: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

use std::process::ExitCode;

use clap::Parser;
use sparse_align_cli::Cli;

fn main() -> ExitCode {
    // Exit codes: 0 success, 1 input error, 2 solver failure, 3 verification
    // failure. clap's default error code is 2, which belongs to the solver
    // here, so parse errors are remapped to 1 (help/version stay 0).
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match sparse_align_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

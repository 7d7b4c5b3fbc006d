use std::process::ExitCode;

use clap::Parser;
use covpath_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match covpath_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let report = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": code,
            });
            eprintln!("{report}");
            ExitCode::from(code as u8)
        }
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VARSEG_LOG", "warn"))
        .format_timestamp(None)
        .init();
    match varseg_cli::app::run_from(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("varseg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

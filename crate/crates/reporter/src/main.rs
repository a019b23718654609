use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ietf_reporter::cli::run(std::env::args_os()) as u8)
}

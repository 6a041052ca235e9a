use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fibreflow::cli::run(std::env::args_os()))
}

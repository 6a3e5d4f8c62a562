use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(wcs_cli::main_with(std::env::args().collect()))
}

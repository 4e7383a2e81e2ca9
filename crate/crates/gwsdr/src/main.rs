use std::process::ExitCode;

fn main() -> ExitCode {
    gwsdr::cli::main_with_args(std::env::args_os())
}

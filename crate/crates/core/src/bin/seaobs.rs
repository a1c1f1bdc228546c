use std::process::ExitCode;

fn main() -> ExitCode {
    seaobs::cli::main_with_args(std::env::args_os())
}

use std::process::ExitCode;

fn main() -> ExitCode {
    rankroute_cli::cli::main_with_args(std::env::args_os())
}

use std::process::ExitCode;

fn main() -> ExitCode {
    crowdlabel_cli::run(std::env::args_os())
}

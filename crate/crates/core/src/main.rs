use std::process::ExitCode;

fn main() -> ExitCode {
    readseq::cli::main_with_args(std::env::args_os())
}

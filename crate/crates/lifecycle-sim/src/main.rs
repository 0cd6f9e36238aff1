use std::process::ExitCode;

fn main() -> ExitCode {
    lifecycle_sim::cli::dispatch(std::env::args())
}

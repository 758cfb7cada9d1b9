use std::process::ExitCode;

fn main() -> ExitCode {
    painscope::cli::run()
}

use std::process::ExitCode;

fn main() -> ExitCode {
    mript_core::cli::main()
}

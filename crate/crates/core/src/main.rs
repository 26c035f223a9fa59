use std::process::ExitCode;

fn main() -> ExitCode {
    psps::cli::main()
}

use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let exit =
        euler_forms::cli::run_args(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock());
    ExitCode::from(exit as u8)
}

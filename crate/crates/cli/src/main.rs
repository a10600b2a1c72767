use std::io::{stderr, stdout};
use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = cyrep_cli::main_with(std::env::args(), &mut stdout().lock(), &mut stderr().lock());
    ExitCode::from(code)
}

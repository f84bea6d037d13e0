use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cmd = match qh_cli::parse_args(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = cmd
        .into_config(std::env::var(qh_cli::OUTPUT_DIR_ENV).ok())
        .and_then(|cfg| qh_cli::run(&cfg));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qh: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

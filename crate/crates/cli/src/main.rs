use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use zeroscope_cli::{execute, CliArgs};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = CliArgs::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot size the worker pool: {e}");
            return ExitCode::from(zeroscope_cli::EXIT_CONFIG as u8);
        }
    }
    let result = args.resolve().and_then(|(config, out)| execute(&config, &out));
    match result {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            let _ = write!(stdout, "{}", outcome.summary);
            for f in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

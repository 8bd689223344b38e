mod commands;

use clap::Parser;

use commands::{Cli, ExitCode};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap's own exit code for bad usage is 2; the scripting contract wants 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { ExitCode::Usage as i32 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            std::process::exit(e.code as i32);
        }
    }
}

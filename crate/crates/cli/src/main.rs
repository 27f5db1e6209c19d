use clap::Parser;
use mmdsel_cli::commands::{run, Cli, Command};

fn main() {
    let cli = Cli::parse();
    let default_level = match cli.command {
        // Thousands of trials would repeat the same block-remainder warning.
        Command::Simulate { .. } | Command::Bench { .. } => "error",
        _ => "warn",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();
    if let Err(e) = run(cli) {
        eprintln!("mmdsel: {e}");
        std::process::exit(e.exit_code());
    }
}

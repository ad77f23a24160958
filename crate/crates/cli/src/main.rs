use clap::Parser;
use tmarl_cli::{error_json, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        eprintln!("{}", error_json(&e));
        std::process::exit(e.exit_code());
    }
}

use clap::Parser;
use signal_routing::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::exit(run(Cli::parse()));
}

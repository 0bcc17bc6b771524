use clap::Parser;
use dirac_spectral::cli::{self, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Cli::parse();
    cli::init_threads();
    std::process::exit(cli::run(&args));
}

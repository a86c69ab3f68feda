use clap::Parser;
use sed_sim::cli::{dispatch, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SED_LOG", "warn")).init();
    let cli = Cli::parse();
    let started = std::time::Instant::now();
    let result = dispatch(cli.verb);
    log::info!("wall time {:.3} s", started.elapsed().as_secs_f64());
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

use clap::Parser;

use active_diffusion_cli::app::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AD_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            if !out.is_empty() {
                println!("{out}");
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

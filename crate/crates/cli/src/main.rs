use clap::Parser;

fn main() {
    let cli = scenesmc_cli::Cli::parse();
    if let Err(e) = scenesmc_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

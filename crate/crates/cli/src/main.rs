use clap::Parser;
use etdf_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("etdf: {e}");
        std::process::exit(e.exit_code());
    }
}

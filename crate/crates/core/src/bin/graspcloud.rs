use clap::Parser;
use graspcloud::cli::{run, Cli};

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("graspcloud: {e}");
        std::process::exit(e.exit_code());
    }
}

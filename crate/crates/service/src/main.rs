use clap::Parser;
use epiportrait::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}

use clap::Parser;

use ncvpath::cli::{main_with, Cli};

fn main() {
    env_logger::init();
    std::process::exit(main_with(Cli::parse()));
}

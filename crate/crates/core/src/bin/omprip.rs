use clap::Parser;
use omprip::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let (command, config) = cli.command.split();
    std::process::exit(execute(command, config));
}

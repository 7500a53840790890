use std::io;

use clap::Parser;
use interest_refresh::commands::{run, Cli};

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let stdin = io::stdin();
    run(cli, &mut stdin.lock(), &mut io::stdout().lock())
}

use clap::Parser;

use faultline::cli::{run, Cli};

fn main() {
    // clap exits with status 2 on usage errors before we get here.
    if let Err(error) = run(Cli::parse()) {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}

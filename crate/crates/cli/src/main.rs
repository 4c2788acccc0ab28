use clap::Parser;

use mcf_cli::cli::{run, Cli};
use mcf_cli::exit_code;

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => print!("{out}"),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            std::process::exit(exit_code(&e));
        }
    }
}

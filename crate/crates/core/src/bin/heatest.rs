use clap::Parser;
use heatest::cli::{error_json, run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default()),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            std::process::exit(1);
        }
    }
}

use std::process::ExitCode;

use clap::Parser;
use cr_augment::cli::{run, ExperimentConfig};

fn main() -> ExitCode {
    let config = ExperimentConfig::parse();
    match run(&config) {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            for note in &outcome.notes {
                eprintln!("note: {note}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

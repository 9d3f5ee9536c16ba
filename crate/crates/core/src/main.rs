use std::process::ExitCode;

use clap::Parser;
use oect_core::cli::{run, Cli, ExitStatus};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let status = if e.use_stderr() { ExitStatus::Usage } else { ExitStatus::Success };
            return ExitCode::from(status as u8);
        }
    };
    match run(cli) {
        Ok(output) => {
            print!("{}", output.summary);
            println!("wrote {} files", output.manifest.outputs.len() + 1);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status as u8)
        }
    }
}

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use htm_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.rendered.as_bytes());
            for f in &out.written {
                eprintln!("wrote {f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("htm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

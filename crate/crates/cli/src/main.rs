use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = llweak_cli::cli::Args::parse();
    match llweak_cli::cli::run(args, &mut std::io::stdout().lock()) {
        Ok(notes) => {
            for n in notes {
                eprintln!("note: {n}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let cat = e.category();
            eprintln!("error[{cat}]: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(cat.exit_code() as u8)
        }
    }
}

use std::io::{self, IsTerminal, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use zplus::cli::{Session, SessionConfig};

/// Default reasoning with variable-strength rules.
///
/// Without --script, commands are read from standard input.
#[derive(Parser, Debug)]
#[command(name = "zplus", version)]
struct Args {
    /// Rule file to load and compile at startup.
    #[arg(long, value_name = "FILE")]
    kb: Option<PathBuf>,
    /// Run commands from FILE instead of standard input.
    #[arg(long, value_name = "FILE")]
    script: Option<PathBuf>,
    /// Stop at the first failing command.
    #[arg(long)]
    strict: bool,
    /// Cross-check answers against world enumeration.
    #[arg(long)]
    oracle: bool,
    /// Re-check admissibility when loading compiled rule bases.
    #[arg(long)]
    verify: bool,
    /// Print satisfiability call counts after each command.
    #[arg(long)]
    trace_sat: bool,
    /// Largest vocabulary the world enumerator will accept.
    #[arg(long, value_name = "N", default_value_t = zplus::oracle::DEFAULT_MAX_ATOMS as u8,
          value_parser = clap::value_parser!(u8).range(0..=zplus::oracle::DEFAULT_MAX_ATOMS as i64))]
    max_atoms: u8,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut session = Session::new(SessionConfig {
        strict: args.strict,
        oracle: args.oracle,
        verify: args.verify,
        trace_sat: args.trace_sat,
        max_atoms: usize::from(args.max_atoms),
    });
    let stdout = io::stdout();
    let mut out = stdout.lock();

    let mut run = || -> io::Result<i32> {
        let mut status = 0;
        if let Some(kb) = &args.kb {
            let startup = format!("load {}\ncompile\n", kb.display());
            status = session.run_lines(startup.as_bytes(), &mut out, false)?;
            if status != 0 && args.strict {
                return Ok(status);
            }
        }
        let rest = match &args.script {
            Some(path) => session.run_script(path, &mut out)?,
            None => {
                let stdin = io::stdin();
                let prompt = stdin.is_terminal();
                session.run_lines(stdin.lock(), &mut out, prompt)?
            }
        };
        out.flush()?;
        Ok(if status != 0 { status } else { rest })
    };
    match run() {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("zplus: {e}");
            ExitCode::from(5)
        }
    }
}

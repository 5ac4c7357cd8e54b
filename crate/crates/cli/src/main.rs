use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use micromaser_cli::{parse_with_overrides, run, write_table, EXIT_IO, EXIT_NUMERIC, EXIT_PARSE};

/// Runs a micromaser parameter sweep described by a `key = value` file.
#[derive(Debug, Parser)]
#[command(name = "micromaser", version)]
struct Args {
    /// Sweep configuration file.
    config: PathBuf,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn threads() -> Result<Option<usize>, String> {
    match std::env::var("MICROMASER_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("MICROMASER_THREADS must be a positive integer, got `{v}`")),
        },
    }
}

fn fail(code: i32, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("micromaser: {message}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_PARSE, format!("{}: {e}", args.config.display())),
    };
    let config = match parse_with_overrides(&text, &args.set) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_PARSE, format!("{}: {e}", args.config.display())),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    match threads() {
        Ok(Some(n)) => pool = pool.num_threads(n),
        Ok(None) => {}
        Err(e) => return fail(EXIT_PARSE, e),
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return fail(EXIT_IO, e),
    };
    let table = pool.install(|| run(&config));

    let written = match &config.output {
        Some(path) => File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            write_table(&mut w, &config, &table)?;
            w.flush()
        }),
        None => write_table(&mut io::stdout().lock(), &config, &table),
    };
    if let Err(e) = written {
        return fail(EXIT_IO, e);
    }
    if table.failures > 0 {
        let first = table.first_failure.as_deref().unwrap_or("unknown error");
        return fail(EXIT_NUMERIC, format!("{} values failed numerically (first: {first})", table.failures));
    }
    ExitCode::SUCCESS
}

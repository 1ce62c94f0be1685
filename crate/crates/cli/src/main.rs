//! `lcd`: shoots generating curves, tabulates measures and runs the
//! verification suites, writing CSV/JSON artifacts tagged with the hash of
//! the run specification.

mod commands;
mod output;
mod spec;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{execute, Failure};
use output::Sink;
use spec::{Command, RunSpec, DEFAULT_SEED};

const EXIT_SPEC: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "lcd", version, about = "Generating curves and isoperimetric checks for radial log-convex densities")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the canonical run specification and exit.
    #[arg(long, global = true)]
    print_spec: bool,
    #[command(subcommand)]
    cmd: Top,
}

#[derive(Subcommand)]
enum Top {
    #[command(flatten)]
    Direct(Command),
    /// Execute a run specification stored as JSON.
    Run { spec: PathBuf },
}

fn fail(code: u8, kind: &str, message: &str, details: serde_json::Value) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message, "details": details }));
    ExitCode::from(code)
}

fn thread_pool() -> Result<(), String> {
    let Ok(v) = std::env::var("LCD_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("LCD_THREADS must be a positive integer, got {v:?}"))?;
    if n == 0 {
        return Err("LCD_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn load(path: &PathBuf) -> Result<RunSpec, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = thread_pool() {
        return fail(EXIT_SPEC, "invalid_spec", &e, serde_json::Value::Null);
    }
    let mut spec = match cli.cmd {
        Top::Direct(command) => RunSpec { command, seed: DEFAULT_SEED, out: None },
        Top::Run { spec } => match load(&spec) {
            Ok(s) => s,
            Err(e) => return fail(EXIT_SPEC, "invalid_spec", &e, serde_json::Value::Null),
        },
    };
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    if let Some(o) = cli.out {
        spec.out = Some(o);
    }
    if let Err(e) = spec.validate() {
        return fail(EXIT_SPEC, "invalid_spec", &e, spec.canonical());
    }
    if cli.print_spec {
        let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&spec.canonical()).expect("spec serializes"));
        return ExitCode::SUCCESS;
    }

    let dir = spec.out.clone().unwrap_or_else(|| PathBuf::from("lcd-out"));
    let mut sink = match Sink::new(&dir, spec.provenance()) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_NUMERIC, "io", &format!("{e:#}"), serde_json::Value::Null),
    };
    match execute(&spec, &mut sink) {
        Ok(line) => {
            // A closed pipe on stdout is not a failure of the run.
            let mut w = std::io::stdout().lock();
            let _ = writeln!(w, "{line}");
            for p in &sink.written {
                let _ = writeln!(w, "wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Spec(m)) => fail(EXIT_SPEC, "invalid_spec", &m, spec.canonical()),
        Err(Failure::Numeric { message, details }) => {
            let diag = json!({ "error": "numeric_failure", "message": message, "details": details });
            if let Err(e) = sink.json("diagnostic.json", &diag) {
                eprintln!("could not write the diagnostic: {e:#}");
            }
            fail(EXIT_NUMERIC, "numeric_failure", &message, details)
        }
    }
}

//! Command-line front end: validation, theorem-instance checking,
//! construction of limit algebras, and seeded instance generation.
//!
//! Reports are JSON on stdout (or `--out`); the exit code is 0 exactly
//! when every executed check passed.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use msa_core::generate::{generate, GeneratorConfig};
use msa_core::report::{cmd_check, cmd_construct, cmd_validate, CheckKind, ConstructKind};

#[derive(Parser)]
#[command(name = "msa", version, about = "Finite many-sorted algebra engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ReportOut {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit the report as JSON (the default; kept for explicitness).
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run all structural validators over an instance file.
    Validate {
        file: PathBuf,
        #[command(flatten)]
        out: ReportOut,
    },
    /// Run theorem-instance checks over every applicable declaration.
    Check {
        file: PathBuf,
        /// all | prop25 | prop28 | prop29 | retraction | naturality |
        /// cylinder | composition
        #[arg(long = "check", default_value = "all")]
        which: String,
        /// Node cap for the isomorphism backtracking search.
        #[arg(long = "max-iso-search", default_value_t = 1_000_000)]
        max_iso_search: usize,
        #[command(flatten)]
        out: ReportOut,
    },
    /// Compute a limit or (reduced/ultra) product and emit it as a new
    /// instance file.
    Construct {
        file: PathBuf,
        /// projlim | indlim | ultraproduct | reducedproduct
        #[arg(long)]
        what: String,
        /// The declaration (system or family) to construct from.
        #[arg(long)]
        name: String,
        /// Where to write the emitted `.msa` file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded random instance file.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        sorts: usize,
        #[arg(long, default_value_t = 3)]
        carrier: usize,
        #[arg(long, default_value_t = 3)]
        ops: usize,
        #[arg(long, default_value_t = 4)]
        index: usize,
        #[arg(long)]
        force_constant_support: bool,
        #[arg(long)]
        force_surjective_transitions: bool,
        #[arg(long)]
        inject_support_violation: bool,
        /// Where to write the generated `.msa` file (stdout otherwise).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit_report(report: &msa_core::report::Report, out: &ReportOut) -> std::io::Result<()> {
    let body = report.to_json();
    match &out.out {
        Some(path) => {
            fs::write(path, body)?;
            println!(
                "{}: {}",
                report.command,
                if report.pass() { "pass" } else { "FAIL" }
            );
        }
        None => println!("{body}"),
    }
    Ok(())
}

fn run() -> std::io::Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { file, out } => {
            let text = fs::read_to_string(file)?;
            let report = cmd_validate(&text);
            emit_report(&report, &out)?;
            Ok(report.pass())
        }
        Command::Check {
            file,
            which,
            max_iso_search,
            out,
        } => {
            let Some(kind) = CheckKind::parse(&which) else {
                eprintln!("unknown check `{which}`");
                return Ok(false);
            };
            let text = fs::read_to_string(file)?;
            let report = cmd_check(&text, kind, max_iso_search);
            emit_report(&report, &out)?;
            Ok(report.pass())
        }
        Command::Construct {
            file,
            what,
            name,
            out,
        } => {
            let Some(kind) = ConstructKind::parse(&what) else {
                eprintln!("unknown construction `{what}`");
                return Ok(false);
            };
            let text = fs::read_to_string(file)?;
            match cmd_construct(&text, kind, &name) {
                Ok((report, emitted)) => {
                    match out {
                        Some(path) => fs::write(path, &emitted)?,
                        None => print!("{emitted}"),
                    }
                    eprintln!("{}", report.to_json());
                    Ok(report.pass())
                }
                Err(report) => {
                    eprintln!("{}", report.to_json());
                    Ok(false)
                }
            }
        }
        Command::Gen {
            seed,
            sorts,
            carrier,
            ops,
            index,
            force_constant_support,
            force_surjective_transitions,
            inject_support_violation,
            out,
        } => {
            let config = GeneratorConfig {
                seed,
                max_sorts: sorts,
                max_carrier: carrier,
                max_ops: ops,
                max_index: index,
                force_constant_support,
                force_surjective_transitions,
                inject_support_violation,
            };
            match generate(&config) {
                Ok(file) => {
                    let text = msa_core::dsl::serialize(&file);
                    match out {
                        Some(path) => fs::write(path, &text)?,
                        None => print!("{text}"),
                    }
                    Ok(true)
                }
                Err(e) => {
                    eprintln!("{e}");
                    Ok(false)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}

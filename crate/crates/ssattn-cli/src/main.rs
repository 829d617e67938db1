//! `ssattn` — run exact, Nystrom, and spectral-shift attention approximations
//! on seeded or file-provided inputs and emit machine-readable reports.
//!
//! Exit codes: 0 success, 2 usage errors, 3 numerical failures, 4 I/O errors.

mod commands;
mod io;
mod report;

use clap::{Parser, Subcommand};

use crate::commands::{approx, bench, bound, lemma1, spectrum};
use crate::report::CliError;

#[derive(Parser)]
#[command(
    name = "ssattn",
    version,
    about = "Landmark spectral-shift attention approximation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one approximation method and emit a JSON report.
    Approx(approx::ApproxArgs),
    /// Emit spectrum CSVs for the exact and approximate attention matrices.
    Spectrum(spectrum::SpectrumArgs),
    /// Time methods across sequence lengths; CSV runtimes plus JSON slopes.
    Bench(bench::BenchArgs),
    /// Flat-tail reconstruction accuracy: spectral shifting vs plain Nystrom.
    Lemma1(lemma1::Lemma1Args),
    /// Evaluate the iterative-pseudoinverse error bound against the measured error.
    Bound(bound::BoundArgs),
}

fn main() {
    let cli = Cli::parse();
    let result: Result<(), CliError> = match cli.command {
        Command::Approx(args) => approx::run(args),
        Command::Spectrum(args) => spectrum::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Lemma1(args) => lemma1::run(args),
        Command::Bound(args) => bound::run(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

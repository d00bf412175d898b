//! `fbe`: scan price series for LPPL bubble signatures, publish critical-time
//! forecast windows, analyse what followed, and seal forecast documents.
//!
//! Exit status: 0 success, 1 domain negative (no bubble, H1 only, failed
//! verification), 2 usage or input error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "fbe",
    version,
    about = "LPPL bubble scanning, forecasting and sealed forecast documents"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "FBE_OUTPUT_DIR", default_value = ".")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    /// CSV of `date,price` rows.
    pub csv: PathBuf,
    /// Asset name; defaults to the file stem.
    #[arg(long)]
    pub asset: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit every window of the grid and list the best qualified fits.
    Scan {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Scan, bootstrap the best fits and write a forecast record.
    Forecast {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Drawdown, up-day fraction and growth rate after a forecast date.
    Analyze {
        #[command(flatten)]
        series: SeriesArgs,
        #[arg(long)]
        from_date: NaiveDate,
        /// Up-day fraction windows, e.g. `30,60,90`.
        #[arg(long)]
        windows: Option<String>,
    },
    /// Assemble forecast fragments into a canonical forecast document.
    Compose {
        fragments: Vec<PathBuf>,
        #[arg(long)]
        created_on: NaiveDate,
        /// H1 asset names, repeatable.
        #[arg(long = "h1")]
        h1: Vec<String>,
        #[arg(long)]
        notes: Option<PathBuf>,
        /// Output file name inside the output directory.
        #[arg(long, default_value = "forecast_document.txt")]
        name: String,
    },
    /// Write SHA-256/SHA-512 checksum files and table for a document.
    Seal {
        document: PathBuf,
        #[arg(long, requires = "reveal_due")]
        sealed_on: Option<NaiveDate>,
        #[arg(long, requires = "sealed_on")]
        reveal_due: Option<NaiveDate>,
    },
    /// Check a document against a checksum file.
    Verify {
        document: PathBuf,
        checksums: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scan { series, top_k } => commands::scan(&cli.global, &series, top_k),
        Command::Forecast { series, top_k } => commands::forecast(&cli.global, &series, top_k),
        Command::Analyze {
            series,
            from_date,
            windows,
        } => commands::analyze(&cli.global, &series, from_date, windows.as_deref()),
        Command::Compose {
            fragments,
            created_on,
            h1,
            notes,
            name,
        } => commands::compose(
            &cli.global,
            &fragments,
            created_on,
            &h1,
            notes.as_deref(),
            &name,
        ),
        Command::Seal {
            document,
            sealed_on,
            reveal_due,
        } => commands::seal(&cli.global, &document, sealed_on.zip(reveal_due)),
        Command::Verify {
            document,
            checksums,
        } => commands::verify(&document, &checksums),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::exit;

use clap::{Parser, Subcommand};
use liquid_scorecard_cli::commands;

#[derive(Parser)]
#[command(
    name = "liquid-scorecard",
    version,
    about = "Fit and inspect additive scorecards whose continuous parts are shape-constrained B-splines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a scorecard and write coefficients.csv, report.json, and plot CSVs
    Fit {
        /// Scorecard spec (JSON)
        #[arg(long)]
        spec: PathBuf,
        /// Input data (CSV with header row)
        #[arg(long)]
        data: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Print the report as JSON on stdout
        #[arg(long)]
        json: bool,
    },
    /// Score a stored coefficient file and print its divergence per split
    Validate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// coefficients.csv from a previous fit
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Rebuild plot CSVs from a stored coefficient file
    Plot {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of axis intervals per characteristic
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// Evaluate the B-spline basis on a uniform grid
    Basis {
        /// Comma-separated knot list, e.g. "0,5,25,35,300,1000"
        #[arg(long)]
        knots: String,
        /// Spline order 1-4
        #[arg(long)]
        order: u8,
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Generate a seeded synthetic dataset
    Gen {
        /// Generator config (JSON)
        #[arg(long = "seed-config")]
        seed_config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit { spec, data, out, json } => commands::cmd_fit(spec, data, out, *json),
        Command::Validate { spec, data, coeffs, json } => {
            commands::cmd_validate(spec, data, coeffs, *json)
        }
        Command::Plot { spec, coeffs, out, points } => {
            commands::cmd_plot(spec, coeffs, out, *points)
        }
        Command::Basis { knots, order, points, out, json } => {
            commands::cmd_basis(knots, *order, *points, out.as_deref(), *json)
        }
        Command::Gen { seed_config, out } => commands::cmd_gen(seed_config, out),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        exit(e.code());
    }
}

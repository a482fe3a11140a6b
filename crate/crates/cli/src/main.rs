//! `multizip`: dimension, rendering, axiom checks and transversality scans
//! for graph-directed similarity systems and multizippers.
//!
//! Exit codes: 0 every verdict passed, 2 validation failure, 3 a theorem
//! check failed, 4 I/O, parse or usage error.

mod commands;
mod render;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use commands::{CliError, ScanArgs};

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "MULTIZIP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "multizip", version, about = "Graph-directed similarity systems and multizippers")]
struct Cli {
    /// Report format on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Similarity dimension and the spectral radius of B(1).
    Dimension { spec: PathBuf },
    /// Write a depth-k sample of one component as SVG or CSV.
    Render {
        spec: PathBuf,
        /// Vertex name; defaults to the first vertex.
        #[arg(long)]
        vertex: Option<String>,
        #[arg(long, default_value_t = 5)]
        depth: usize,
        /// Output file, `.svg` or `.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the zipper axioms, the length identity and the segment criterion.
    Verify { spec: PathBuf },
    /// Monotone projection count and transverse-point density of one arc.
    Scan {
        spec: PathBuf,
        #[arg(long)]
        vertex: Option<String>,
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// Number of grid normals; defaults depend on the dimension.
        #[arg(long)]
        grid: Option<usize>,
        /// Dyadic depth; defaults to the deepest level up to 4 the sample supports.
        #[arg(long)]
        dyadic: Option<usize>,
        /// Transversality slack; defaults to the depth-k cell diameter bound.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Project a zipper onto an invariant normal line.
    Project {
        spec: PathBuf,
        /// Comma-separated coordinates, normalised before use.
        #[arg(long, allow_hyphen_values = true)]
        normal: String,
        /// Write the projected spec here instead of embedding it in the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the built-in example specs.
    Catalog {
        #[arg(long, default_value = "catalog")]
        out: PathBuf,
        #[arg(long, default_value_t = multizip::catalog::DEFAULT_CESARO_APEX_DEG)]
        cesaro_apex: f64,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR}={value:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))
}

fn run(cli: Cli, echo: Vec<String>) -> Result<report::Report, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Dimension { spec } => commands::dimension(echo, &spec),
        Command::Render { spec, vertex, depth, out } => commands::render(echo, &spec, vertex.as_deref(), depth, &out),
        Command::Verify { spec } => commands::verify(echo, &spec),
        Command::Scan { spec, vertex, depth, grid, dyadic, tol } => {
            commands::scan(echo, &spec, ScanArgs { vertex: vertex.as_deref(), depth, grid, dyadic, tol })
        }
        Command::Project { spec, normal, out } => commands::project(echo, &spec, &normal, out.as_deref()),
        Command::Catalog { out, cesaro_apex } => commands::catalog_cmd(echo, &out, cesaro_apex),
    }
}

fn main() -> ExitCode {
    let echo: Vec<String> = std::env::args().skip(1).collect();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(4),
            };
        }
    };
    let format = cli.format;
    match run(cli, echo) {
        Ok(report) => {
            let text = match format {
                Format::Text => report.to_text(),
                Format::Json => report.to_json(),
            };
            print!("{text}");
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nlp_cli::demo::{run_demo, DEMOS};
use nlp_cli::export::write_json;
use nlp_cli::kernel_check::{run_kernel_check, KernelCheckSpec};
use nlp_cli::scenario::{run_scenario, RunOutcome};
use nlp_cli::{CliError, CliResult};

/// Solvers and certificates for heat equations with nonlocal flux.
///
/// Exit status: 0 success, 2 ran but inconclusive, 1 error (JSON on stderr
/// and in <out>/error.json). NLP_THREADS caps the worker threads.
#[derive(Debug, Parser)]
#[command(name = "nlp", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file.
    Run { scenario: PathBuf },
    /// Kernel normalization and sign on a node grid, plus kernel slices.
    KernelCheck {
        #[arg(long = "L", default_value_t = 1.0)]
        length: f64,
        #[arg(long, default_value_t = 1e-3)]
        tmin: f64,
        /// Series length; from the tail bound at tmin when absent.
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long, default_value_t = 400)]
        n_cells: usize,
        /// Time gaps to check (comma separated).
        #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-2, 1e-1, 1.0])]
        gaps: Vec<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
    /// Run a bundled demo.
    Demo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(DEMOS))]
        name: String,
    },
}

fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("NLP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("NLP_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn dispatch(cli: &Cli, out: &Path) -> CliResult<RunOutcome> {
    init_threads()?;
    match &cli.command {
        Command::Run { scenario } => run_scenario(scenario, cli.out.as_deref()),
        Command::KernelCheck {
            length,
            tmin,
            modes,
            n_cells,
            gaps,
            tolerance,
        } => {
            let spec = KernelCheckSpec {
                length: *length,
                tmin: *tmin,
                modes: *modes,
                n_cells: *n_cells,
                gaps: gaps.clone(),
                tolerance: *tolerance,
            };
            let (report, written) = run_kernel_check(&spec, out)?;
            Ok(RunOutcome {
                exit_code: if report.passed { 0 } else { 2 },
                written,
            })
        }
        Command::Demo { name } => run_demo(name, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    match dispatch(&cli, &out) {
        Ok(outcome) => {
            for p in &outcome.written {
                println!("{}", p.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            let doc = e.to_json();
            eprintln!("{doc}");
            let _ = write_json(&out.join("error.json"), &doc);
            ExitCode::from(1)
        }
    }
}

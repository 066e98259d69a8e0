use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use homlab::{Neighborhood, RationalDirection};
use homlab_cli::config::{ExperimentConfig, ExperimentKind};
use homlab_cli::report::{emit_report, load_record, summary_text, FAILURES_FILE};
use homlab_cli::runner::{run_with_threads, threads_from_env, RunRecord};

#[derive(Parser)]
#[command(
    name = "homlab",
    version,
    about = "Stochastic homogenization cell-formula estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NeighborhoodArg {
    N4,
    N8,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment config file.
    Run {
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite with default settings.
    Verify {
        #[arg(long)]
        quick: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Metrication factor of a lattice neighborhood for a rational normal.
    Calibrate {
        /// Normal as `[a,b]/d` or `a,b/d`.
        #[arg(long)]
        nu: String,
        #[arg(long, value_enum, default_value = "n4")]
        neighborhood: NeighborhoodArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate report files from a run directory and print the summary.
    Report { run_dir: PathBuf },
}

fn parse_nu(s: &str) -> anyhow::Result<RationalDirection> {
    let s = s.trim();
    let text = if s.starts_with('[') {
        s.to_string()
    } else {
        let (num, den) = s.rsplit_once('/').context("expected <a,b>/<d>")?;
        format!("[{num}]/{den}")
    };
    text.parse::<RationalDirection>()
        .map_err(|e| anyhow::anyhow!("invalid --nu {s}: {e}"))
}

fn execute(config: ExperimentConfig, out: Option<PathBuf>) -> anyhow::Result<RunRecord> {
    let dir = out.unwrap_or_else(|| config.output.clone());
    let record = run_with_threads(&config, threads_from_env())?;
    emit_report(&record, &dir)?;
    print!("{}", summary_text(&record));
    println!("output = {}", dir.display());
    if !record.passed() {
        eprintln!("failures listed in {}", dir.join(FAILURES_FILE).display());
    }
    Ok(record)
}

fn main_inner() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    let record = match cli.command {
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let parsed = homlab_cli::parse_config(&text)
                .with_context(|| format!("parsing {}", config.display()))?;
            execute(parsed, out)?
        }
        Command::Verify { quick, out } => execute(ExperimentConfig::verify_defaults(quick), out)?,
        Command::Calibrate {
            nu,
            neighborhood,
            out,
        } => {
            let mut c = ExperimentConfig::defaults(ExperimentKind::Calibrate);
            c.nu = vec![parse_nu(&nu)?];
            c.zeta = vec![vec![1.0]];
            c.solver.neighborhood = match neighborhood {
                NeighborhoodArg::N4 => Neighborhood::N4,
                NeighborhoodArg::N8 => Neighborhood::n8(),
            };
            execute(c, out)?
        }
        Command::Report { run_dir } => {
            let record = load_record(&run_dir)?;
            emit_report(&record, &run_dir)?;
            print!("{}", summary_text(&record));
            record
        }
    };
    Ok(record.passed())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use bvdual_cli::{load_instance, run, Settings};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Report,
    Table,
}

/// Numerical certification of conjugate duality for integral functionals of
/// bounded-variation paths.
#[derive(Debug, Parser)]
#[command(name = "bvdual", version)]
struct Cli {
    /// check-duality, check-interchange, check-subdiff, check-jensen,
    /// check-ibp, check-var, decompose, project, recession, corollaries, all
    command: String,
    /// Instance file (JSON, version bvdual-instance/1).
    #[arg(long)]
    instance: PathBuf,
    /// Relative tolerance for formula-vs-oracle comparisons.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oracle refinement levels; one duality row per level.
    #[arg(long)]
    refine: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Report)]
    format: Format,
    /// Run suites concurrently; rows are then ordered by check name.
    #[arg(long)]
    parallel: bool,
    /// Named dual (decompose) or raw process (project) from the instance.
    #[arg(long)]
    process: Option<String>,
    /// Record per-check runtime (makes output run-dependent).
    #[arg(long)]
    timings: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    let (loaded, bytes) = load_instance(&cli.instance)?;
    let settings = Settings {
        seed: cli.seed,
        tol: cli.tol,
        refine: cli.refine,
        process: cli.process.clone(),
        timings: cli.timings,
        parallel: cli.parallel,
    };
    let report = run(&cli.command, &loaded, &bytes, &settings)?;
    let text = match cli.format {
        Format::Report => report.to_json(),
        Format::Table => report.to_table(),
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(report.all_pass())
}

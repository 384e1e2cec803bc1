//! `pnrbench`: run detector benchmarks from a TOML config and write CSV or
//! JSON tables.

mod config;
mod error;
mod output;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Format, RunConfig, Task};
use error::CliError;

/// Environment variable overriding the output directory of the config.
const OUT_DIR_ENV: &str = "PNRBENCH_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "pnrbench",
    version,
    about = "Benchmark photon-number-resolving detectors against multiplexed on-off detectors"
)]
struct Args {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task to run; overrides `task` in the config.
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// Output directory; overrides the config and PNRBENCH_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Seed of the witness optimizer restarts.
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum Fock truncation.
    #[arg(long)]
    n_max: Option<usize>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: Args) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(task) = args.task {
        cfg.task = Some(task);
    }
    if let Some(format) = args.format {
        cfg.format = format;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n_max) = args.n_max {
        cfg.n_max = Some(n_max);
    }
    cfg.validate()?;
    if let Some(threads) = args.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    let out_dir = args
        .out
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("pnrbench-out"));

    let task = cfg.task()?;
    log::info!("running {task} into {}", out_dir.display());
    let tables = tasks::run(&cfg, &out_dir)?;
    let mut written = Vec::new();
    for t in &tables {
        let name = if tables.len() == 1 {
            format!("{task}.{}", cfg.format.extension())
        } else {
            format!("{task}-{}.{}", t.name, cfg.format.extension())
        };
        output::write_atomic(&out_dir, &name, &t.render(cfg.format)?)?;
        written.push(out_dir.join(name));
    }
    Ok(written)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pnrbench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

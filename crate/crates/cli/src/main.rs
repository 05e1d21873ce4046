//! Command-line front end: runs bound-verification experiments described by
//! flat key-value config files and persists JSON reports (optionally with CSV
//! curves). Exit codes: 0 all checks pass, 1 a bound check failed, 2 invalid
//! configuration.

mod config;
mod report;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Task};
use report::ExperimentReport;

#[derive(Parser)]
#[command(name = "qac-lab", version, about = "Adiabatic state-preparation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments described by one or more config files.
    Run {
        /// Config files (flat key-value documents, schema_version = 1).
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Override the seed in every config.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for report files (defaults next to each config).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Worker threads for parallel sections (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Override the task named in every config.
        #[arg(long)]
        task: Option<String>,
        /// Report format.
        #[arg(long, default_value = "json", value_parser = ["json", "csv"])]
        format: String,
        /// Include wall-clock timings in reports (breaks byte-for-byte
        /// reproducibility across machines).
        #[arg(long)]
        timings: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            configs,
            seed,
            output_dir,
            threads,
            task,
            format,
            timings,
        } => {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
            let mut any_failed = false;
            for path in &configs {
                match run_one(path, seed, output_dir.as_deref(), task.as_deref(), &format, timings)
                {
                    Ok(pass) => any_failed |= !pass,
                    Err(err) => {
                        eprintln!("qac-lab: invalid config {}: {err:#}", path.display());
                        return ExitCode::from(2);
                    }
                }
            }
            if any_failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
    }
}

fn run_one(
    path: &std::path::Path,
    seed_override: Option<u64>,
    output_dir: Option<&std::path::Path>,
    task_override: Option<&str>,
    format: &str,
    timings: bool,
) -> anyhow::Result<bool> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = seed_override {
        config.seed = seed;
        config.echo.insert("seed".into(), seed.to_string());
        // reseed the model spec if it carries one
        if let Some(qac_core::models::ModelSpec::RandomGapped { seed: s, .. }) = &mut config.model {
            *s = seed;
        }
    }
    if let Some(name) = task_override {
        config.task = Task::parse(name)?;
        config.echo.insert("task".into(), name.to_string());
    }
    let started = Instant::now();
    let records = tasks::run_task(&config)?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    let mut report = ExperimentReport::new(
        config.task.name(),
        config.seed,
        config.echo.clone(),
        records,
    );
    if timings {
        let mut map = std::collections::BTreeMap::new();
        map.insert("task".to_string(), elapsed_ms);
        report.timings_ms = Some(map);
    }
    let out_path = match (&config.output, output_dir) {
        (Some(rel), Some(dir)) => dir.join(rel),
        (Some(rel), None) => path.parent().unwrap_or(std::path::Path::new(".")).join(rel),
        (None, Some(dir)) => dir.join(format!(
            "{}_{}.json",
            path.file_stem().and_then(|s| s.to_str()).unwrap_or("report"),
            config.task.name()
        )),
        (None, None) => path.with_extension("report.json"),
    };
    report.write(&out_path, format == "csv")?;
    if let Some(fail) = report.first_failure() {
        eprintln!(
            "qac-lab: bound check failed in {}: {} ({}) lhs = {:.6e} > rhs = {:.6e}",
            path.display(),
            fail.name,
            fail.bound,
            fail.lhs,
            fail.rhs
        );
    }
    println!(
        "{}: {} ({} records) -> {}",
        config.task.name(),
        if report.pass { "pass" } else { "FAIL" },
        report.records.len(),
        out_path.display()
    );
    Ok(report.pass)
}

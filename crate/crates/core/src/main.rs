use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use ood_lab::config::{parse_seeds, ExperimentConfig, Suite};
use ood_lab::report::{emit_report, load_summary, load_verdicts, render_summary};
use ood_lab::{harness, par, Execution};

#[derive(Parser)]
#[command(name = "ood-lab", version, about = "Semantic vs covariate shift experiments for OOD scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite and write results.csv, verdicts.json, summary.json and traces.
    Run {
        #[arg(long)]
        suite: Suite,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds, overriding the config.
        #[arg(long)]
        seeds: Option<String>,
        /// Disable the worker pool.
        #[arg(long)]
        sequential: bool,
    },
    /// Print the tables and verdicts of a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print the effective configuration.
    PrintConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> ood_lab::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> ood_lab::Result<bool> {
    match cli.command {
        Command::Run {
            suite,
            config,
            out,
            seeds,
            sequential,
        } => {
            let mut cfg = load_config(config.as_ref())?;
            cfg.suite = suite;
            if let Some(s) = seeds {
                cfg.seeds = parse_seeds(&s)?;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(n) = par::configure_threads_from_env() {
                info!("worker pool bounded to {n} threads");
            }
            let exec = if sequential { Execution::Sequential } else { Execution::default() };
            let report = harness::run(&cfg, exec)?;
            for path in emit_report(&report, &cfg.output_dir)? {
                info!("wrote {}", path.display());
            }
            let summary = report.summary();
            print!("{}", render_summary(&summary, &report.verdicts));
            Ok(suite != Suite::Verify || report.all_verdicts_pass())
        }
        Command::Report { input } => {
            let summary = load_summary(&input)?;
            let verdicts = load_verdicts(&input)?;
            print!("{}", render_summary(&summary, &verdicts));
            Ok(true)
        }
        Command::PrintConfig { config } => {
            print!("{}", load_config(config.as_ref())?.to_config_string());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

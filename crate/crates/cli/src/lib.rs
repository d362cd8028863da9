//! The `pfl` workflow: `generate` a scenario directory, `run` an algorithm
//! over it for several seeds, then `report` mean±std tables.

pub mod config;
pub mod error;
pub mod generate;
pub mod report;
pub mod run;
pub mod summary;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ConfigFile, ExperimentConfig, ModelKind, RunArgs};
pub use error::{exit, CliError, Result};
pub use generate::{cmd_generate, histogram_table, GenerateArgs};
pub use report::{cmd_report, format_cell, Table};
pub use run::cmd_run;
pub use summary::{mean_std, AttackReport, PsnrStats, Summary};

#[derive(Debug, Parser)]
#[command(name = "pfl", version, about = "Federated-learning scenario generator and experiment runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition a dataset into a scenario directory.
    Generate(GenerateArgs),
    /// Run an algorithm over a scenario for one or more seeds.
    Run(RunArgs),
    /// Merge run summaries into a comparison table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct ReportArgs {
    /// Output directories of previous runs.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Also write the table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Executes one command, returning the text to print on stdout.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Generate(args) => {
            let s = cmd_generate(args)?;
            Ok(histogram_table(&s))
        }
        Command::Run(args) => {
            let cfg = ExperimentConfig::resolve(args)?;
            let s = cmd_run(&cfg)?;
            let mut text = format!(
                "{} on {}: final {} (best {}) over {} run(s)\n",
                s.algo,
                s.scenario,
                format_cell(s.final_acc_mean, s.final_acc_std),
                format_cell(s.best_acc_mean, s.best_acc_std),
                s.reps
            );
            if let Some(p) = &s.psnr {
                text.push_str(&format!(
                    "attack on head input: {} attempt(s), {} exact, mean PSNR {}, labels {:.0}% correct\n",
                    p.attacks,
                    p.exact,
                    p.mean_db.map_or("n/a".into(), |m| format!("{m:.2} dB")),
                    p.label_accuracy * 100.0
                ));
            }
            Ok(text)
        }
        Command::Report(args) => {
            let table = cmd_report(&args.dirs)?.render();
            if let Some(path) = &args.out {
                run::write_atomic(path, table.as_bytes())?;
            }
            Ok(table)
        }
    }
}

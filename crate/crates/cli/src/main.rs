use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vega_cli::{load_config, run_ablate, run_rank, run_score, run_synth, run_validate, Overrides};

/// Rank vision-language models on an unlabeled task from precomputed
/// embedding bundles.
#[derive(Parser)]
#[command(name = "vega", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScoringFlags {
    /// Scoring config (JSON). Defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Score features as stored, without L2 normalization.
    #[arg(long)]
    no_normalize: bool,
    /// Leave self-edges out of the edge correlation.
    #[arg(long)]
    exclude_diagonal: bool,
    /// Number of models scored concurrently (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl ScoringFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            no_normalize: self.no_normalize,
            exclude_diagonal: self.exclude_diagonal,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a bundle directory; exits 1 if it cannot be loaded.
    Validate { dir: PathBuf },
    /// Score every model in a zoo manifest.
    Score {
        #[arg(long)]
        zoo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: ScoringFlags,
    },
    /// Ranking metrics of one report column against accuracy.
    Rank {
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value = "vega")]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic zoo of bundles plus its manifest.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Node/edge ablation and temperature sweep over a labeled zoo.
    Ablate {
        #[arg(long)]
        zoo: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flags: ScoringFlags,
    },
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Validate { dir } => {
            let report = run_validate(&dir);
            println!("{}", serde_json::to_string_pretty(&report)?);
            return Ok(if report.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            });
        }
        Command::Score { zoo, out, flags } => {
            let config = load_config(flags.config.as_deref(), flags.overrides())?;
            let report = run_score(&zoo, &config, &out, flags.workers)?;
            let failed = report.rows.iter().filter(|r| r.error.is_some()).count();
            eprintln!(
                "scored {} model(s), {failed} failed -> {}",
                report.rows.len(),
                out.display()
            );
            for r in report.rows.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "  {}: {}",
                    r.model_id,
                    r.error.as_deref().unwrap_or_default()
                );
            }
        }
        Command::Rank {
            report,
            method,
            out,
        } => {
            let result = run_rank(&report, &method, &out)?;
            println!("{}", serde_json::to_string_pretty(&result.metrics)?);
        }
        Command::Synth { config, out } => {
            let manifest = run_synth(&config, &out)?;
            eprintln!(
                "wrote {} bundle(s) to {}",
                manifest.entries.len(),
                out.display()
            );
        }
        Command::Ablate { zoo, out, flags } => {
            let config = load_config(flags.config.as_deref(), flags.overrides())?;
            let table = run_ablate(&zoo, &config, &out, flags.workers)?;
            println!("{}", serde_json::to_string_pretty(&table.variants)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

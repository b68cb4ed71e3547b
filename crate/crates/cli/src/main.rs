use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpp_rerank::{MatchMode, SimTransform};
use dpp_rerank_cli::commands::{self, EvaluateArgs, Mode, RerankConfig};
use dpp_rerank_cli::{formats, selfcheck, CliError, EXIT_INPUT_ERROR, EXIT_PROPERTY_FAILURE};

#[derive(Parser, Debug)]
#[command(version, about = "Diversity-aware passage re-ranking with determinantal point processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Re-rank candidate passages and write a run file.
    Rerank {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "dpp")]
        mode: Mode,
        #[arg(long)]
        k: usize,
        #[arg(long = "sim-transform", default_value = "affine")]
        sim_transform: SimTransform,
        #[arg(long = "quality-floor", default_value_t = dpp_rerank::kernel::DEFAULT_QUALITY_FLOOR)]
        quality_floor: f64,
        /// Diagonal ridge; defaults to 1e-10 (affine) or 1e-6 (clamp).
        #[arg(long)]
        ridge: Option<f64>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a run file with MRECALL@k and Recall@k.
    Evaluate {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        passages: PathBuf,
        /// Comma-separated cutoffs.
        #[arg(long, default_value = "5,10")]
        k: String,
        /// Match answers on whole words only.
        #[arg(long = "word-boundary")]
        word_boundary: bool,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the randomized property suite.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Rerank {
            input,
            mode,
            k,
            sim_transform,
            quality_floor,
            ridge,
            output,
        } => {
            let config = RerankConfig {
                mode,
                k,
                transform: sim_transform,
                floor: quality_floor,
                ridge,
            };
            warn(&commands::rerank_command(&input, &config, &output)?);
        }
        Command::Evaluate {
            run,
            gold,
            passages,
            k,
            word_boundary,
            output,
        } => {
            let args = EvaluateArgs {
                run,
                gold,
                passages,
                cutoffs: commands::parse_cutoffs(&k).map_err(CliError::Argument)?,
                mode: if word_boundary {
                    MatchMode::WordBoundary
                } else {
                    MatchMode::Substring
                },
            };
            let out = commands::evaluate_command(&args)?;
            warn(&out.warnings);
            print!("{}", out.report.table());
            let json = serde_json::to_string_pretty(&out.report).expect("serializable report");
            match output {
                Some(path) => formats::write_file(&path, &(json + "\n"))?,
                None => println!("{json}"),
            }
        }
        Command::Selfcheck { seed, trials } => {
            let report = selfcheck::run_selfcheck(seed, trials);
            warn(&report.warnings);
            print!("{}", report.summary());
            if !report.passed() {
                return Ok(ExitCode::from(EXIT_PROPERTY_FAILURE));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT_ERROR)
        }
    }
}

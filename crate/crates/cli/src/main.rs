use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gdf_cli::commands::{cmd_evaluate, cmd_generate, cmd_sweep, cmd_train};
use gdf_cli::config::{ConfigFile, Overrides, ProblemKind, Settings};
use gdf_cli::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "gdf", version, about = "Outage forecasting and grid-resilience decisions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides every random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Decision/prediction trade-off; a comma-separated list for `sweep`.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    problem: Option<ProblemKind>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic event dataset.
    Generate(Common),
    /// Pretrain and finetune on a dataset's training split.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset directory written by `generate` or in the same layout.
        #[arg(long)]
        data: PathBuf,
    },
    /// Score checkpoints and baselines on a dataset's test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Dataset directory written by `generate` or in the same layout.
        #[arg(long)]
        data: PathBuf,
        /// Directory holding `gdf.ckpt` and `two_stage.ckpt`.
        #[arg(long)]
        checkpoints: PathBuf,
    },
    /// Train and score over seeds and lambda values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Use this dataset instead of per-seed synthetic benchmarks.
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn settings(c: &Common) -> CliResult<Settings> {
    let file = match &c.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    file.resolve(&Overrides {
        seed: c.seed,
        lambdas: c.lambda.clone(),
        problem: c.problem,
    })
}

fn single_lambda(c: &Common) -> CliResult<()> {
    match &c.lambda {
        Some(l) if l.len() != 1 => Err(CliError::Config("--lambda takes one value outside `sweep`".into())),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Generate(c) => {
            single_lambda(&c)?;
            let n = cmd_generate(&settings(&c)?, &c.out)?;
            Ok(format!("wrote {n} events to {}", c.out.display()))
        }
        Command::Train { common, data } => {
            single_lambda(&common)?;
            cmd_train(&settings(&common)?, &data, &common.out)?;
            Ok(format!("wrote checkpoints to {}", common.out.display()))
        }
        Command::Evaluate {
            common,
            data,
            checkpoints,
        } => {
            single_lambda(&common)?;
            let report = cmd_evaluate(&settings(&common)?, &data, &checkpoints, &common.out)?;
            let mut text = String::new();
            for s in &report.summary {
                let regret = s.regret.map_or("-".to_string(), |r| format!("{r:.4}"));
                text.push_str(&format!("{:<14} regret {regret}\n", s.method));
            }
            Ok(text.trim_end().to_string())
        }
        Command::Sweep { common, data } => {
            let recs = cmd_sweep(&settings(&common)?, data.as_deref().map(Path::new), &common.out)?;
            Ok(format!("wrote {} sweep rows to {}", recs.len(), common.out.display()))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

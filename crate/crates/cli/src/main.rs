use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lagoon_chl::ingest::parse_date;
use lagoon_chl::pipeline::{Pipeline, PipelineConfig, StageOutcome};
use lagoon_chl::Error;

/// Chlorophyll-a retrieval pipeline over a JSON configuration.
#[derive(Debug, Parser)]
#[command(name = "lagoon-chl", version)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "lagoon-chl.json")]
    config: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bin buoy records by depth and filter the scene catalog.
    Ingest,
    /// Build every (set, window, depth) feature table.
    Features,
    /// Screen, tune and cross-validate models on each depth bin.
    Train,
    /// Choose and fit the mapped model of each depth bin.
    Select,
    /// Map chlorophyll on one date.
    Infer {
        /// Scene date, YYYY-MM-DD.
        #[arg(long)]
        date: String,
    },
    /// Write result tables of datasets × models.
    Report,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::MissingInput(_) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<StageOutcome, Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let p = Pipeline::new(cfg)?;
    match cli.command {
        Command::Ingest => p.ingest(),
        Command::Features => p.features(),
        Command::Train => p.train(),
        Command::Select => p.select(),
        Command::Infer { date } => p.infer(parse_date(&date).map_err(|e| Error::Config(format!("--date: {e}")))?),
        Command::Report => p.report(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let verb = if out.skipped { "up to date" } else { "done" };
            println!("{}: {verb}, {} outputs", out.stage, out.outputs.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shiftlab_cli::{exit, run, Command, ExperimentConfig};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  invalid command-line arguments
  3  invalid configuration (the message names the offending key)
  4  dataset error (missing or empty data, too few samples per class, category shift, undecodable image)
  5  I/O error
  6  training error (shape mismatch, non-finite values, malformed batch)
  7  annotation pool exhausted
  8  every grid cell failed
  9  significance input unusable (malformed results file or missing runs)";

#[derive(Parser)]
#[command(name = "shiftlab", version, about = "Domain adaptation and active learning experiments", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, clap::Args)]
struct Common {
    /// Experiment config (`key = value` lines); an empty file uses defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: config `out`, then $SHIFTLAB_OUT, then ./results].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated run seeds, overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Parallel worker threads for seeds and strategy arms.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the configured mode once per seed; writes train.csv (one row per epoch) and train_summary.csv.
    Train(Common),
    /// Active learning per strategy and seed; writes al.csv (one row per round).
    Al(Common),
    /// Learning-rate and L2 grid scored on target validation accuracy; writes grid.csv and grid_best.csv.
    Grid(Common),
    /// Pairwise t-tests between strategies per round from an al.csv; writes significance.csv.
    Significance(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Train(a) => (Command::Train, a),
        Cmd::Al(a) => (Command::Al, a),
        Cmd::Grid(a) => (Command::Grid, a),
        Cmd::Significance(a) => (Command::Significance, a),
    };
    let result = ExperimentConfig::from_path(&args.config).and_then(|mut cfg| {
        if let Some(s) = args.seeds {
            cfg.seeds = Some(s);
        }
        if let Some(w) = args.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        let out = args
            .out
            .or_else(|| cfg.out.clone())
            .or_else(|| std::env::var_os("SHIFTLAB_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("results"));
        run(&cfg, cmd, &out)
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(exit::OK as u8)
        }
        Err(e) => {
            eprintln!("shiftlab {cmd}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

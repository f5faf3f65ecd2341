use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lon_cli::commands::{self, ProbeParams};
use lon_cli::{CliError, ExperimentConfig, Result};
use lon_core::train::Split;

#[derive(Debug, Parser)]
#[command(name = "lon", version, about = "Locally orderless network experiments")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes the dataset described by --config into --out.
    Generate,
    /// Trains one model per learning rate on a generated dataset.
    Train {
        /// Dataset directory; its own config is used when --config is absent.
        #[arg(long)]
        data: PathBuf,
    },
    /// Evaluates a checkpoint and dumps per-sample predictions.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
    },
    /// Input-gradient saliency maps and boundary-mass ratios.
    Saliency {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated sample ids in manifest order; an empty list is allowed.
        #[arg(long, conflicts_with = "test")]
        ids: Option<String>,
        /// Use every test sample.
        #[arg(long)]
        test: bool,
    },
    /// Finite-difference check of every architecture variant at 5x5.
    Gradcheck {
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Local histogram at one pixel of an image (LONR or PGM).
    Probe {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        x: usize,
        #[arg(long)]
        y: usize,
        /// Scale of the Gaussian filter K; 0 is the identity.
        #[arg(long, default_value_t = 0.0)]
        k_scale: f64,
        /// Scale of the aggregation window W; 0 is a single pixel.
        #[arg(long, default_value_t = 2.0)]
        w_scale: f64,
        #[arg(long, default_value_t = 16)]
        bins: usize,
        /// Tonal scale; defaults to the bin spacing.
        #[arg(long)]
        sigma: Option<f64>,
    },
}

fn load_config(cli: &Cli, fallback: Option<PathBuf>) -> Result<ExperimentConfig> {
    let path = cli.config.clone().or(fallback).ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn parse_ids(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Usage(format!("bad sample id {s:?}"))))
        .collect()
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate => {
            let cfg = load_config(cli, None)?;
            let rows = commands::generate(&cfg, &cli.out)?;
            println!("wrote {} samples to {} (config {})", rows.len(), cli.out.display(), cfg.hash());
        }
        Command::Train { data } => {
            let cfg = load_config(cli, Some(data.join(lon_cli::dataset::CONFIG_FILE)))?;
            let report = commands::train(&cfg, data, &cli.out)?;
            for r in &report.runs {
                let status = match &r.divergence {
                    Some(d) => format!("diverged at {d}"),
                    None => format!("test {:?}", r.test),
                };
                println!("{} lr {}: {status}", report.model, r.lr);
            }
            if let Some(b) = report.best_run() {
                println!("best lr {} ({})", b.lr, cli.out.join("model.lonc").display());
            }
        }
        Command::Eval { checkpoint, data, split } => {
            let r = commands::eval(checkpoint, data, (*split).into(), &cli.out)?;
            println!(
                "{} on {} ({} samples, {} params): loss {} accuracy {:?}",
                r.model,
                r.split.as_str(),
                r.samples,
                r.params.actual,
                r.metrics.loss,
                r.metrics.accuracy
            );
        }
        Command::Saliency { checkpoint, data, ids, test } => {
            let ids = match (ids, test) {
                (_, true) => commands::test_ids(data)?,
                (Some(list), false) => parse_ids(list)?,
                (None, false) => return Err(CliError::Usage("give --ids or --test".into())),
            };
            let rows = commands::saliency(checkpoint, data, &ids, &cli.out)?;
            println!("wrote {} saliency maps to {}", rows.len(), cli.out.join("saliency").display());
        }
        Command::Gradcheck { step, tolerance } => {
            let seed = match (&cli.config, cli.seed) {
                (_, Some(s)) => s,
                (Some(_), None) => load_config(cli, None)?.seed,
                (None, None) => 0,
            };
            let result = commands::gradcheck(seed, *step, *tolerance, &cli.out);
            if let Ok(rows) = &result {
                let worst = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
                println!("{} groups passed, max relative error {worst:e}", rows.len());
            }
            result?;
        }
        Command::Probe { image, x, y, k_scale, w_scale, bins, sigma } => {
            let p = ProbeParams { x: *x, y: *y, k_scale: *k_scale, w_scale: *w_scale, bins: *bins, sigma: *sigma };
            for (b, v) in commands::probe(image, &p, &cli.out)? {
                println!("{b:>12.6} {v:.6}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

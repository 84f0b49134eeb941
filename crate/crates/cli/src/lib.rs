//! `tabkit` command-line front end.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod prepare;
pub mod report;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use tabkit_core::classify::ModelKind;

use commands::SynthKind;
use config::RunConfig;
use error::{CliError, CliResult, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "tabkit", version, about = "Segmentation and prediction on tabular data")]
pub struct Cli {
    /// Key-value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Treat warnings as failures.
    #[arg(long, global = true)]
    strict: bool,
    /// Write SVG charts next to the plot-data CSVs.
    #[arg(long, global = true)]
    svg: bool,
    /// Config override, repeatable; wins over the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Audit and summary statistics.
    Describe { input: PathBuf },
    /// Encode, cap and standardize the segmentation features.
    Preprocess { input: PathBuf },
    /// Principal components of the segmentation features.
    Pca {
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        /// Keep the fewest components reaching this variance fraction.
        #[arg(long)]
        variance: Option<f64>,
    },
    /// Inertia and silhouette across the configured k range.
    Selectk { input: PathBuf },
    /// k-means on the principal components.
    Cluster {
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Cross-validated grid search for one model kind.
    Gridsearch {
        input: PathBuf,
        #[arg(long)]
        model: ModelKind,
        /// e.g. "n_neighbors=3,5;weights=uniform,distance"
        #[arg(long)]
        grid: Option<String>,
    },
    /// Grid search, then save the best model as model.json.
    Train {
        input: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        grid: Option<String>,
    },
    /// Metrics for a saved model on labelled rows, or for a predictions file.
    Evaluate {
        input: Option<PathBuf>,
        #[arg(long, conflicts_with = "predictions")]
        model: Option<PathBuf>,
        /// CSV with y_true,y_pred and optionally score.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// SHAP summary of a saved model.
    Explain {
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long)]
        n: usize,
    },
    /// Both branches end to end.
    Pipeline,
}

fn build_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    cfg.strict |= cli.strict;
    cfg.svg |= cli.svg;
    if cfg.threads == Some(0) {
        return Err(CliError::Usage("threads must be >= 1".into()));
    }
    Ok(cfg)
}

fn dispatch(cli: Cli, cfg: RunConfig) -> CliResult<i32> {
    use Command::*;
    match cli.command {
        Describe { input } => commands::describe_cmd(&cfg, &input)?,
        Preprocess { input } => commands::preprocess_cmd(cfg, &input)?,
        Pca { input, k, variance } => commands::pca_cmd(cfg, &input, commands::pca_select(k, variance)?)?,
        Selectk { input } => commands::selectk_cmd(cfg, &input)?,
        Cluster { input, k } => commands::cluster_cmd(cfg, &input, k)?,
        Gridsearch { input, model, grid } => commands::gridsearch_cmd(cfg, &input, model, grid.as_deref(), false)?,
        Train { input, model, grid } => commands::gridsearch_cmd(cfg, &input, model, grid.as_deref(), true)?,
        Evaluate {
            input,
            model,
            predictions,
        } => commands::evaluate_cmd(cfg, model.as_deref(), input.as_deref(), predictions.as_deref())?,
        Explain { input, model } => commands::explain_cmd(cfg, &model, &input)?,
        Synth { kind, n } => {
            let path = commands::synth_cmd(&cfg, kind, n)?;
            println!("{}", path.display());
        }
        Pipeline => {
            cfg.validate()?;
            return pipeline::run_and_write(&cfg, &cfg.out.clone());
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = build_config(&cli).and_then(|cfg| {
        let threads = cfg.threads;
        let go = move || dispatch(cli, cfg);
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?
                .install(go),
            None => go(),
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("tabkit: {e}");
            e.exit_code()
        }
    }
}

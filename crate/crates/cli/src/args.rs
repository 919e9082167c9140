use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hydra_core::models::Architecture;

use crate::config::{within, RunConfig};
use crate::error::{CliError, CliResult};
use crate::{evaluate, report, sweep, synth};

/// Probabilistic next-day discharge forecasting with Hydra-LSTMs.
///
/// Exit status: 0 success, 1 i/o or internal error, 2 invalid configuration,
/// 3 invalid or missing data, 4 training failure.
#[derive(Debug, Parser)]
#[command(name = "hydra", version)]
pub struct Cli {
    /// Directory every relative path is resolved against.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,

    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic catchment CSVs.
    Synth(SynthArgs),
    /// Train one model on a single fold and score its test year.
    Train(RunArgs),
    /// Leave-one-year-out cross-validation.
    Crossval(CrossvalArgs),
    /// Grid search over hyperparameters on a train/validation split.
    Sweep(RunArgs),
    /// Comparison table, CQES distributions and hydrographs from run outputs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for the CSVs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub catchments: Option<usize>,
    #[arg(long)]
    pub years: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Catchment CSV directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub architecture: Option<Architecture>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden_size: Option<usize>,
    #[arg(long)]
    pub num_layers: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Hidden size of every Hydra head.
    #[arg(long)]
    pub head_hidden_size: Option<usize>,
    #[arg(long)]
    pub head_num_layers: Option<usize>,
    /// Catchment-specific input variables, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub extras: Option<Vec<String>>,
    /// Use no catchment-specific inputs.
    #[arg(long, conflicts_with = "extras")]
    pub no_extras: bool,
    /// Lookback window in days.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Restrict forecast dates to these calendar months, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub months: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    pub validation_years: Option<Vec<i32>>,
    /// Test year of a `train` run.
    #[arg(long)]
    pub test_year: Option<i32>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Number of withheld test years.
    #[arg(long)]
    pub folds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories produced by `train` or `crossval`.
    #[arg(long, required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl SynthArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.data_dir, self.out.clone());
        set(&mut cfg.synth.catchments, self.catchments);
        set(&mut cfg.synth.years, self.years);
        set(&mut cfg.synth.seed, self.seed);
    }
}

impl RunArgs {
    pub fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        set(&mut cfg.data_dir, self.data.clone());
        set(&mut cfg.output_dir, self.out.clone());
        if let Some(arch) = self.architecture {
            if arch != cfg.model.architecture {
                cfg.model.architecture = arch;
                cfg.model.hyperparameters = None;
                cfg.model.extras = None;
            }
        }
        set(&mut cfg.model.seed, self.seed);
        let mut hp = cfg.model.experiment().spec.hyperparameters;
        set(&mut hp.hidden_size, self.hidden_size);
        set(&mut hp.num_layers, self.num_layers);
        set(&mut hp.learning_rate, self.learning_rate);
        set(&mut hp.dropout, self.dropout);
        if self.head_hidden_size.is_some() || self.head_num_layers.is_some() {
            let head = hp
                .head
                .as_mut()
                .ok_or_else(|| CliError::Config(format!("{} has no heads", cfg.model.architecture)))?;
            set(&mut head.hidden_size, self.head_hidden_size);
            set(&mut head.num_layers, self.head_num_layers);
        }
        cfg.model.hyperparameters = Some(hp);
        if self.no_extras {
            cfg.model.extras = Some(Vec::new());
        }
        set(&mut cfg.model.extras, self.extras.clone().map(Some));
        set(&mut cfg.train.window, self.window);
        set(&mut cfg.train.batch_size, self.batch_size);
        set(&mut cfg.train.max_epochs, self.max_epochs);
        set(&mut cfg.train.patience, self.patience);
        set(&mut cfg.train.months, self.months.clone().map(Some));
        set(&mut cfg.evaluation.validation_years, self.validation_years.clone().map(Some));
        set(&mut cfg.evaluation.test_year, self.test_year.map(Some));
        set(&mut cfg.evaluation.jobs, self.jobs);
        Ok(())
    }
}

/// Loads the config file (if any), applies flags and runs the command.
pub fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(&within(&cli.workdir, path))?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Synth(a) => {
            a.apply(&mut cfg);
            synth::run_synth(&cfg, &cli.workdir)?;
        }
        Command::Train(a) => {
            a.apply(&mut cfg)?;
            evaluate::run_train(&cfg, &cli.workdir)?;
        }
        Command::Crossval(a) => {
            a.run.apply(&mut cfg)?;
            set(&mut cfg.evaluation.folds, a.folds);
            evaluate::run_crossval(&cfg, &cli.workdir)?;
        }
        Command::Sweep(a) => {
            a.apply(&mut cfg)?;
            sweep::run_sweep(&cfg, &cli.workdir)?;
        }
        Command::Report(a) => {
            let runs: Vec<PathBuf> = a.runs.iter().map(|r| within(&cli.workdir, r)).collect();
            let rows = report::run_report(&runs, &within(&cli.workdir, &a.out))?;
            for r in rows {
                println!(
                    "{:<24} {:<32} mean CQES {:>8} coverage q10 {:.3} q90 {:.3}",
                    r.run,
                    r.variant,
                    r.mean_cqes.map_or("n/a".into(), |v| format!("{v:.3}")),
                    r.coverage_q10,
                    r.coverage_q90
                );
            }
        }
    }
    Ok(())
}

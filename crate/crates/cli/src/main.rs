mod config;

use std::path::{Path, PathBuf};

use alpha_rim::data::{generate_synthetic, prepare, PipelineOptions, PreparedData, SynthSpec};
use alpha_rim::gradcheck::DEFAULT_EPS;
use alpha_rim::model::{BaselineConfig, Forecaster, ModelConfig, ModelKind};
use alpha_rim::rim::{RimConfig, HORIZON};
use alpha_rim::train::{
    baseline_grid, emit_report, evaluate, parse_report, sample_hyper_dicts, train, ts_cross_validate,
    Checkpoint, ExperimentReport, ModelReport, ReportFormat, SplitEntry, Timings,
};
use alpha_rim::{Execution, SeededRng};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "arim", version, about = "alpha_t-RIM forecasting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic price/sentiment pair of CSV files.
    Synth(SynthArgs),
    /// Train one or more models and print their report.
    Train(TrainArgs),
    /// Walk-forward cross-validation over the hyperparameter grid.
    GridSearch(GridArgs),
    /// Score a saved checkpoint on every split.
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Render a saved JSON report.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => ReportFormat::Table,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for prices.csv and sentiment.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Look-back window.
    #[arg(long, value_parser = ["5", "10", "21"])]
    lookback: Option<String>,
    /// Price only.
    #[arg(long, conflicts_with = "bivariate")]
    univariate: bool,
    /// Price and sentiment.
    #[arg(long)]
    bivariate: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    sentiment: Option<PathBuf>,
    /// Disable data-parallel execution.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn experiment(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(l) = &self.lookback {
            cfg.data.lookback = l.parse()?;
        }
        if self.univariate {
            cfg.data.bivariate = false;
        }
        if self.bivariate {
            cfg.data.bivariate = true;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.training.seed = cfg.seed;
        if let Some(epochs) = self.epochs {
            cfg.training.epochs = epochs;
        }
        if let Some(p) = &self.prices {
            cfg.data.prices = Some(p.clone());
        }
        if let Some(s) = &self.sentiment {
            cfg.data.sentiment = Some(s.clone());
        }
        if self.sequential {
            cfg.training.execution = Execution::Sequential;
        }
        Ok(cfg)
    }
}

fn load_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let series = cfg.data.load_series()?;
    let split = cfg.data.split.resolve(&series)?;
    let opts = PipelineOptions {
        lookback: cfg.data.lookback,
        horizon: HORIZON,
        bivariate: cfg.data.bivariate,
        kernel_width: cfg.data.kernel_width,
    };
    Ok(prepare(&series, &split, &opts)?)
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Model kinds to train, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    model: Vec<ModelKind>,
    /// Save the trained parameters (single model only).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Save the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: alpha_rim::Error| e.to_string())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let cfg = args.run.experiment()?;
    let kinds: Vec<Option<ModelKind>> = if args.model.is_empty() {
        vec![None]
    } else {
        args.model.iter().copied().map(Some).collect()
    };
    if args.checkpoint.is_some() && kinds.len() > 1 {
        bail!("--checkpoint needs a single --model");
    }
    let data = load_data(&cfg)?;
    let mut report = ExperimentReport::new(title(&cfg), HORIZON);
    for kind in kinds {
        let model_cfg = cfg.model_for(kind)?;
        let result = train(&model_cfg, &data, &cfg.training)?;
        if let Some(path) = &args.checkpoint {
            Checkpoint::capture(&result.forecaster, cfg.seed, Some(data.stats.clone()))
                .save(path)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        report.push(result.report)?;
    }
    finish_report(&report, args.report.as_deref(), args.format)
}

fn title(cfg: &ExperimentConfig) -> String {
    format!(
        "{} metrics of {} lags input (seed {})",
        if cfg.data.bivariate { "Bivariate" } else { "Univariate" },
        cfg.data.lookback,
        cfg.seed
    )
}

fn finish_report(report: &ExperimentReport, save: Option<&Path>, format: Format) -> Result<()> {
    if let Some(path) = save {
        std::fs::write(path, emit_report(report, ReportFormat::Json))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", emit_report(report, format.into()));
    Ok(())
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_parser = parse_kind, default_value = "alpha_t_rim")]
    model: ModelKind,
    /// Randomized dicts drawn for the alpha_t-RIM.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Defaults to 3 for the alpha_t-RIM and 5 for the baselines.
    #[arg(long)]
    folds: Option<usize>,
    /// Search the full baseline grid instead of the reduced one.
    #[arg(long)]
    full_grid: bool,
}

fn run_grid(args: GridArgs) -> Result<()> {
    let cfg = args.run.experiment()?;
    let data = load_data(&cfg)?;
    let (dicts, folds) = match args.model {
        ModelKind::AlphaTRim => {
            let mut rng = SeededRng::new(cfg.seed).fork(0x4752);
            (sample_hyper_dicts(&mut rng, args.samples)?, args.folds.unwrap_or(3))
        }
        _ => (baseline_grid(!args.full_grid), args.folds.unwrap_or(5)),
    };
    let features = data.train.features();
    let candidates = dicts
        .iter()
        .map(|d| d.to_model_config(args.model, cfg.data.lookback, features))
        .collect::<alpha_rim::Result<Vec<_>>>()?;
    let result = ts_cross_validate(&candidates, &data.train, folds, &cfg.training)?;
    for (i, score) in result.scores.iter().enumerate() {
        eprintln!("candidate {i:>3}  mean val MSE {score:.6}");
    }
    let best = serde_json::json!({
        "index": result.best_index,
        "hyper": dicts[result.best_index],
        "model": result.best,
    });
    println!("{}", serde_json::to_string_pretty(&best)?);
    Ok(())
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let mut cfg = args.run.experiment()?;
    let stored = Checkpoint::load(&args.checkpoint)?;
    let model = stored.restore(None)?;
    cfg.data.lookback = model.config.lookback();
    cfg.data.bivariate = model.config.features() == 2;
    let data = load_data(&cfg)?;
    if stored.norm_stats.as_ref().is_some_and(|s| s != &data.stats) {
        eprintln!("warning: data normalization differs from the one stored in the checkpoint");
    }
    let splits = alpha_rim::data::SplitKind::ALL
        .iter()
        .map(|&split| {
            Ok(SplitEntry {
                split,
                metrics: evaluate(&model, data.split(split), cfg.training.execution)?,
            })
        })
        .collect::<alpha_rim::Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new(title(&cfg), HORIZON);
    report.push(ModelReport {
        name: model.kind().label().to_string(),
        config: model.config.clone(),
        seed: stored.seed,
        epochs_run: 0,
        best_epoch: None,
        splits,
        timings: Timings::default(),
    })?;
    finish_report(&report, None, args.format)
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    model: Vec<ModelKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn gradcheck_config(kind: ModelKind) -> ModelConfig {
    let baseline = BaselineConfig {
        units: 3,
        l1: 1e-3,
        dropout: 0.2,
        lookback: 4,
        horizon: HORIZON,
        features: 2,
    };
    match kind {
        ModelKind::Rnn => ModelConfig::Rnn(baseline),
        ModelKind::Lstm => ModelConfig::Lstm(baseline),
        ModelKind::AlphaTRim => ModelConfig::AlphaTRim(RimConfig {
            units: 3,
            num_modules: 3,
            num_active: 2,
            input_heads: 1,
            input_key_size: 2,
            input_value_size: 2,
            input_query_size: 2,
            input_keep_prob: 0.8,
            comm_heads: 2,
            comm_key_size: 2,
            comm_value_size: 2,
            comm_query_size: 2,
            comm_keep_prob: 0.8,
            lookback: 4,
            horizon: HORIZON,
            features: 2,
            include_self_in_comm: true,
        }),
    }
}

fn run_gradcheck(args: GradcheckArgs) -> Result<bool> {
    let kinds = if args.model.is_empty() {
        ModelKind::ALL.to_vec()
    } else {
        args.model
    };
    let mut rng = SeededRng::new(args.seed);
    let mut ok = true;
    for kind in kinds {
        let model = Forecaster::new(gradcheck_config(kind), args.seed)?;
        let window = rng.normal_matrix(4, 2);
        let target: Vec<f64> = (0..HORIZON).map(|_| rng.normal()).collect();
        let err = model.gradient_check(&window, &target, args.seed, DEFAULT_EPS)?;
        let pass = err <= args.tolerance;
        ok &= pass;
        println!(
            "{:<12} max relative error {err:.3e}  {}",
            kind.to_string(),
            if pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(ok)
}

#[derive(Args)]
struct ReportArgs {
    /// JSON report written by `train --report`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

fn run_report(args: ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let report = parse_report(&text)?;
    print!("{}", emit_report(&report, args.format.into()));
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let mut spec = SynthSpec::default();
    if let Some(n) = args.length {
        spec.length = n;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let series = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    let prices = args.out.join("prices.csv");
    let sentiment = args.out.join("sentiment.csv");
    series.write_prices(&prices)?;
    series.write_sentiment(&sentiment)?;
    println!("wrote {} rows to {} and {}", series.len(), prices.display(), sentiment.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth(a) => run_synth(a),
        Command::Train(a) => run_train(a),
        Command::GridSearch(a) => run_grid(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Gradcheck(a) => {
            if !run_gradcheck(a)? {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::Report(a) => run_report(a),
    }
}

//! Command-line front end. Parsing and validation live here; all actual
//! work happens in [`crate::experiment`].
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors
//! (unknown flags, bad value names). Value names are validated during
//! parsing so typos surface as usage errors, not runtime failures.

use crate::attribution::DEFAULT_IG_STEPS;
use crate::error::Result;
use crate::experiment::{
    cmd_calibrate, cmd_evaluate, cmd_explain, cmd_generate_data, cmd_report, cmd_sweep, cmd_train,
    MethodChoice, ModelSize, Overrides, Preset, RunOptions,
};
use crate::labels::LabelMode;
use crate::metrics::DEFAULT_BINS;
use crate::training::{OptimizerKind, SchedulerKind, SweepParameter};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "painscope",
    version,
    about = "Pain classification toolkit: training with soft labels, calibration audits, and attribution maps"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand, mirroring the config file fields.
/// Explicit flags override the config file, which overrides the preset.
#[derive(Args, Debug, Default)]
struct SharedFlags {
    /// JSON config file with the same fields as these flags.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Root seed; every random stream derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $PAINSCOPE_OUT, then ./painscope-out).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// "synthetic" or a path to a dataset manifest.
    #[arg(long)]
    data: Option<String>,
    /// Synthetic data: number of subjects.
    #[arg(long)]
    subjects: Option<usize>,
    /// Synthetic data: images per subject.
    #[arg(long)]
    per_subject: Option<usize>,
    /// Input image side length (default set by --model-size).
    #[arg(long)]
    image_size: Option<usize>,
    /// Input channels: 1 or 3.
    #[arg(long)]
    channels: Option<usize>,
    /// original | tuned | custom.
    #[arg(long, value_parser = valid_preset)]
    preset: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// sgd | rmsprop | adam | adagrad.
    #[arg(long, value_parser = valid_optimizer)]
    optimizer: Option<String>,
    /// none | step | exponential | cosine_annealing.
    #[arg(long, value_parser = valid_scheduler)]
    scheduler: Option<String>,
    /// hard | nfcs | a smoothing epsilon such as 0.3.
    #[arg(long, value_parser = valid_labels)]
    labels: Option<String>,
    /// Cross-validation fold count; also used to rebuild splits when
    /// reading checkpoints back.
    #[arg(long)]
    folds: Option<usize>,
    /// Upper bound on folds trained concurrently.
    #[arg(long)]
    parallel_folds: Option<usize>,
    /// full | compact | tiny.
    #[arg(long, value_parser = valid_model_size)]
    model_size: Option<String>,
    /// Dropout probability on the dense layer.
    #[arg(long)]
    dropout: Option<f64>,
    /// Augmented copies per training image; 0 disables augmentation.
    #[arg(long)]
    augment_count: Option<usize>,
}

impl SharedFlags {
    fn into_overrides(self) -> Overrides {
        Overrides {
            data: self.data,
            subjects: self.subjects,
            per_subject: self.per_subject,
            image_size: self.image_size,
            channels: self.channels,
            preset: self.preset,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
            scheduler: self.scheduler,
            labels: self.labels,
            folds: self.folds,
            parallel_folds: self.parallel_folds,
            model_size: self.model_size,
            dropout: self.dropout,
            augment_count: self.augment_count,
            seed: self.seed,
            out: self.out,
        }
    }

    fn resolve(self) -> Result<RunOptions> {
        let file = match &self.config {
            Some(path) => Overrides::from_file(path)?,
            None => Overrides::default(),
        };
        file.overlay(self.into_overrides()).resolve()
    }
}

fn valid_preset(s: &str) -> std::result::Result<String, String> {
    s.parse::<Preset>()
        .map(|_| s.to_string())
        .map_err(|e| e.to_string())
}

fn valid_optimizer(s: &str) -> std::result::Result<String, String> {
    s.parse::<OptimizerKind>()
        .map(|_| s.to_string())
        .map_err(|e| e.to_string())
}

fn valid_scheduler(s: &str) -> std::result::Result<String, String> {
    s.parse::<SchedulerKind>()
        .map(|_| s.to_string())
        .map_err(|e| e.to_string())
}

fn valid_labels(s: &str) -> std::result::Result<String, String> {
    s.parse::<LabelMode>()
        .map(|_| s.to_string())
        .map_err(|e| e.to_string())
}

fn valid_model_size(s: &str) -> std::result::Result<String, String> {
    s.parse::<ModelSize>()
        .map(|_| s.to_string())
        .map_err(|e| e.to_string())
}

fn parse_hyperparameter(s: &str) -> std::result::Result<SweepParameter, String> {
    s.parse::<SweepParameter>().map_err(|e| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<MethodChoice, String> {
    s.parse::<MethodChoice>().map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset (images plus manifest) to the output dir.
    GenerateData {
        #[command(flatten)]
        shared: SharedFlags,
    },
    /// Train one model per fold; write checkpoints, histories, metrics.
    Train {
        #[command(flatten)]
        shared: SharedFlags,
    },
    /// Score hyperparameter candidates one at a time against the baseline.
    Sweep {
        #[command(flatten)]
        shared: SharedFlags,
        /// image_size | optimizer | epochs | label_smoothing | scheduler.
        #[arg(long, value_parser = parse_hyperparameter)]
        hyperparameter: SweepParameter,
        /// Comma-separated candidate values, e.g. 0.1,0.3,0.5,nfcs.
        #[arg(long, required = true, value_delimiter = ',')]
        candidates: Vec<String>,
    },
    /// Compute held-out metrics for a checkpoint set, optionally compared
    /// against a second set with a paired t-test over per-fold F1.
    Evaluate {
        #[command(flatten)]
        shared: SharedFlags,
        /// Directory holding fold_*.ckpt files.
        #[arg(long, value_name = "DIR")]
        checkpoints: PathBuf,
        /// Baseline checkpoint directory to compare against.
        #[arg(long, value_name = "DIR")]
        against: Option<PathBuf>,
    },
    /// Audit confidence calibration: reliability bins, ECE, histogram.
    Calibrate {
        #[command(flatten)]
        shared: SharedFlags,
        #[arg(long, value_name = "DIR")]
        checkpoints: PathBuf,
        /// Number of equal-width confidence bins.
        #[arg(long, default_value_t = DEFAULT_BINS)]
        bins: usize,
    },
    /// Export attribution maps for held-out images of one fold.
    Explain {
        #[command(flatten)]
        shared: SharedFlags,
        #[arg(long, value_name = "DIR")]
        checkpoints: PathBuf,
        /// Fold whose held-out images are explained.
        #[arg(long, default_value_t = 0)]
        fold: usize,
        /// Number of images to explain.
        #[arg(long, default_value_t = 4)]
        count: usize,
        /// grad_cam | integrated_gradients | both.
        #[arg(long, default_value = "both", value_parser = parse_method)]
        method: MethodChoice,
        /// Path steps for integrated gradients.
        #[arg(long, default_value_t = DEFAULT_IG_STEPS)]
        steps: usize,
    },
    /// Collect the artifacts of a finished run into one Markdown report.
    Report {
        #[command(flatten)]
        shared: SharedFlags,
        /// Run directory whose artifacts are collected.
        #[arg(long, value_name = "DIR")]
        run: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData { shared } => {
            let opts = shared.resolve()?;
            let manifest = cmd_generate_data(&opts)?;
            println!("manifest: {}", manifest.display());
        }
        Command::Train { shared } => {
            let opts = shared.resolve()?;
            let out = opts.out.clone();
            let report = cmd_train(&opts)?;
            for fold in &report.folds {
                println!(
                    "fold {:02}: best epoch {:3}, test loss {:.4}, f1 {:.4}",
                    fold.fold, fold.best_epoch, fold.best_test_loss, fold.metrics.f1
                );
            }
            println!("mean f1 {:.4}, pooled f1 {:.4}", report.mean_f1, report.pooled.f1);
            println!("artifacts: {}", out.display());
        }
        Command::Sweep {
            shared,
            hyperparameter,
            candidates,
        } => {
            let opts = shared.resolve()?;
            let out = opts.out.clone();
            let result = cmd_sweep(&opts, hyperparameter, &candidates)?;
            println!(
                "baseline {} = {}: f1 {:.4}",
                result.hyperparameter, result.baseline_value, result.baseline_f1
            );
            println!("{:<20} {:>8} {:>9} {:>9}", "candidate", "f1", "delta_f1", "selected");
            for candidate in &result.candidates {
                println!(
                    "{:<20} {:>8.4} {:>+9.4} {:>9}",
                    candidate.value,
                    candidate.mean_f1,
                    candidate.delta_f1,
                    if candidate.value == result.selected { "*" } else { "" }
                );
            }
            println!("selected: {}", result.selected);
            println!("artifacts: {}", out.display());
        }
        Command::Evaluate {
            shared,
            checkpoints,
            against,
        } => {
            let opts = shared.resolve()?;
            let out = opts.out.clone();
            let evaluation = cmd_evaluate(&opts, &checkpoints, against.as_deref())?;
            let pooled = &evaluation.primary.pooled;
            println!(
                "primary: accuracy {:.4}, f1 {:.4}, precision {:.4}, recall {:.4}",
                pooled.accuracy, pooled.f1, pooled.precision, pooled.recall
            );
            if let Some(baseline) = &evaluation.baseline {
                let pooled = &baseline.pooled;
                println!(
                    "baseline: accuracy {:.4}, f1 {:.4}, precision {:.4}, recall {:.4}",
                    pooled.accuracy, pooled.f1, pooled.precision, pooled.recall
                );
            }
            if let Some(delta) = &evaluation.delta {
                println!(
                    "delta: accuracy {:+.4}, f1 {:+.4}, precision {:+.4}, recall {:+.4}",
                    delta.accuracy, delta.f1, delta.precision, delta.recall
                );
            }
            if let Some(t_test) = &evaluation.f1_t_test {
                println!(
                    "paired t-test on per-fold f1: t = {:.4}, p = {:.4}",
                    t_test.t_statistic, t_test.p_value
                );
            }
            println!("artifacts: {}", out.display());
        }
        Command::Calibrate {
            shared,
            checkpoints,
            bins,
        } => {
            let opts = shared.resolve()?;
            let out = opts.out.clone();
            let summary = cmd_calibrate(&opts, &checkpoints, bins)?;
            println!(
                "ece {:.4} over {} held-out predictions in {} bins",
                summary.ece, summary.record_count, summary.bin_count
            );
            for fold in &summary.per_fold_ece {
                println!("fold {:02}: ece {:.4}", fold.fold, fold.ece);
            }
            println!("artifacts: {}", out.display());
        }
        Command::Explain {
            shared,
            checkpoints,
            fold,
            count,
            method,
            steps,
        } => {
            let opts = shared.resolve()?;
            let out = opts.out.clone();
            let explanations = cmd_explain(&opts, &checkpoints, fold, count, method, steps)?;
            for explanation in &explanations {
                println!(
                    "fold {:02} sample {:03} ({}): predicted {} at {:.2}, {} files",
                    explanation.fold,
                    explanation.sample,
                    explanation.subject_id,
                    explanation.predicted,
                    explanation.confidence,
                    explanation.files.len()
                );
            }
            println!("artifacts: {}", out.display());
        }
        Command::Report { shared, run } => {
            let opts = shared.resolve()?;
            let path = cmd_report(&opts, &run)?;
            println!("report: {}", path.display());
        }
    }
    Ok(())
}

/// Parses arguments and runs the selected command, mapping failures to
/// process exit codes.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(1)
        }
    }
}

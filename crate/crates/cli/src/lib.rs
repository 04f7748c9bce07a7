//! Command-line front end: generate → relabel → train-base →
//! train-incremental → evaluate → compare, plus a gradient self-check.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use protoner::diagnostics::hybrid_gradient_check;
use protoner::encoder::EncoderConfig;
use protoner::eval::{compare, evaluate, MetricsReport};
use protoner::synthdocs::{
    generate_corpus, read_corpus, relabel_to_other, write_corpus, GenConfig,
};
use protoner::trainer::{
    train_base, train_incremental, Checkpoint, HeadKind, TrainConfig, TrainMode, BASE_LR,
    DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_INCREMENTAL_DOCS, INCREMENTAL_LR,
};
use protoner::{Error, KeyClass, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "protoner",
    version,
    about = "Few-shot class-incremental key-value extraction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic purchase-order corpus (JSON lines).
    GenData {
        #[arg(long, default_value_t = 600)]
        docs: usize,
        #[arg(long, default_value_t = 12)]
        templates: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace every label outside --keep with OTHER.
    Relabel {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, value_parser = class)]
        keep: Vec<KeyClass>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on --classes; other labels in the corpus become OTHER.
    TrainBase {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, value_parser = class)]
        classes: Vec<KeyClass>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long, default_value_t = BASE_LR)]
        lr: f64,
    },
    /// Add --new-classes to a trained checkpoint from the first --docs documents.
    TrainIncremental {
        /// Parent checkpoint.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_delimiter = ',', required = true, value_parser = class)]
        new_classes: Vec<KeyClass>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INCREMENTAL_DOCS)]
        docs: usize,
        #[arg(long, default_value = "protoner", value_parser = mode)]
        mode: TrainMode,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long, default_value_t = INCREMENTAL_LR)]
        lr: f64,
    },
    /// Score a checkpoint on a corpus; writes a JSON report and prints a table.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "knn", value_parser = head)]
        head: HeadKind,
        #[arg(long)]
        out: PathBuf,
        /// Model name in the report; defaults to the checkpoint file stem.
        #[arg(long)]
        model: Option<String>,
    },
    /// Print reports side by side.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
    },
    /// Check the training gradient against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        configs: usize,
    },
}

#[derive(Args, Debug)]
struct TrainFlags {
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, default_value_t = 50)]
    prototypes: usize,
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainFlags {
    fn config(&self, lr: f64, mode: TrainMode) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr,
            batch_size: self.batch_size,
            prototypes_per_class: self.prototypes,
            knn_k: self.knn_k,
            seed: self.seed,
            mode,
        }
    }
}

fn class(s: &str) -> std::result::Result<KeyClass, String> {
    s.trim().parse().map_err(|e: Error| e.to_string())
}

fn mode(s: &str) -> std::result::Result<TrainMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn head(s: &str) -> std::result::Result<HeadKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenData {
            docs,
            templates,
            seed,
            out,
        } => {
            let cfg = GenConfig {
                n_docs: docs,
                n_templates: templates,
                seed,
                ..GenConfig::default()
            };
            let corpus = generate_corpus(&cfg)?;
            write_corpus(&out, &corpus)?;
            log::info!("wrote {} documents to {}", corpus.len(), out.display());
        }
        Command::Relabel { corpus, keep, out } => {
            let docs = read_corpus(&corpus)?;
            write_corpus(&out, &relabel_to_other(&docs, &keep)?)?;
        }
        Command::TrainBase {
            corpus,
            classes,
            out,
            train,
            lr,
        } => {
            let docs = relabel_to_other(&read_corpus(&corpus)?, &classes)?;
            let enc = EncoderConfig {
                seed: train.seed,
                ..EncoderConfig::default()
            };
            let ckpt = train_base(
                &docs,
                &classes,
                &enc,
                &train.config(lr, TrainMode::Protoner),
            )?;
            ckpt.save(&out)?;
            log_trace(&ckpt);
        }
        Command::TrainIncremental {
            checkpoint,
            corpus,
            new_classes,
            out,
            docs,
            mode,
            train,
            lr,
        } => {
            let parent = Checkpoint::load(&checkpoint)?;
            let all = read_corpus(&corpus)?;
            if docs == 0 || docs > all.len() {
                return Err(Error::Config(format!(
                    "--docs {docs} but the corpus has {} documents",
                    all.len()
                )));
            }
            let mut keep = parent.label_space.key_classes().to_vec();
            keep.extend(&new_classes);
            let small = relabel_to_other(&all[..docs], &keep)?;
            let ckpt = train_incremental(&parent, &small, &new_classes, &train.config(lr, mode))?;
            ckpt.save(&out)?;
            log_trace(&ckpt);
        }
        Command::Evaluate {
            checkpoint,
            corpus,
            head,
            out,
            model,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let docs = read_corpus(&corpus)?;
            let name = model.unwrap_or_else(|| {
                checkpoint
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "model".into())
            });
            let report = evaluate(&ckpt, &docs, head, &name)?;
            write_text(&out, &(report.to_json()? + "\n"))?;
            print!("{}", compare(std::slice::from_ref(&report)));
        }
        Command::Compare { reports } => {
            let parsed = reports
                .iter()
                .map(|p| MetricsReport::from_json(&fs::read_to_string(p)?))
                .collect::<Result<Vec<_>>>()?;
            print!("{}", compare(&parsed));
        }
        Command::Gradcheck { seed, configs } => {
            let mut worst: f64 = 0.0;
            for i in 0..configs {
                let hidden = [8, 64][i % 2];
                let protos = [1, 5, 50][i % 3];
                let r = hybrid_gradient_check(hidden, protos, seed.wrapping_add(i as u64))?;
                println!(
                    "H={:<3} prototypes={:<3} parameters={:<5} max_rel_error={:.3e}",
                    r.hidden_dim, r.prototypes, r.parameters, r.max_rel_error
                );
                worst = worst.max(r.max_rel_error);
            }
            println!("worst {worst:.3e}");
            if worst.is_nan() || worst >= 1e-4 {
                return Err(Error::Numerics(format!(
                    "gradient check failed: {worst:.3e} >= 1e-4"
                )));
            }
        }
    }
    Ok(())
}

fn log_trace(ckpt: &Checkpoint) {
    if let Some(last) = ckpt.loss_trace.last() {
        log::info!(
            "epoch {}: loss {:.4} (ce {:.4}, proto {:.4}), {} prototypes",
            last.epoch,
            last.mean_total,
            last.mean_ce,
            last.mean_proto,
            ckpt.pool.len()
        );
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

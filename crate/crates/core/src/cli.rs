//! Command-line front end. Every command writes the fully resolved
//! configuration next to its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::dataset::{
    preprocess, read_metadata, read_observations, read_raw_records, write_ndjson,
};
use crate::error::{Error, Result};
use crate::export::{attention_tables, write_modal_csv, write_temporal_csv};
use crate::model::Variant;
use crate::synth::{generate_cohort, summarize_cohort};
use crate::train::{cross_validate, evaluate, run_ablation, train};

pub const RECORDS_FILE: &str = "records.ndjson";
pub const METADATA_FILE: &str = "metadata.ndjson";
pub const OBSERVATIONS_FILE: &str = "observations.ndjson";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Debug, Parser)]
#[command(
    name = "odernn",
    version,
    about = "Multimodal ODE-RNN screening pipeline"
)]
pub struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort (raw records and subject metadata).
    Synth(SynthArgs),
    /// Clean signals, synchronize tests and apply cohort filters.
    Preprocess(PreprocessArgs),
    /// Train one model on a preprocessed dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint, or cross-validate when no checkpoint is given.
    Eval(EvalArgs),
    /// Cross-validate several architecture variants on shared folds.
    Ablate(AblateArgs),
    /// Write per-step temporal and per-modality attention weights as CSV.
    ExportAttention(ExportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub signal_strength: Option<f64>,
    #[arg(long)]
    pub noise_level: Option<f64>,
    #[arg(long)]
    pub pd_fraction: Option<f64>,
    #[arg(long)]
    pub missing_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub metadata: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Preprocessed observation sequences.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Architecture variant (full, no-modal, no-temporal, ode-rnn, rnn-dt).
    #[arg(long)]
    pub variant: Option<Variant>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "full,no-modal,no-temporal,ode-rnn,rnn-dt"
    )]
    pub variants: Vec<Variant>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Unified subject ID (`participant+medication_point`); all subjects when omitted.
    #[arg(long)]
    pub subject: Option<String>,
}

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => 1,
        e if e.is_numeric() => 3,
        _ => 2,
    }
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn override_opt<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Synth(a) => {
            override_opt(&mut cfg.synth.n_subjects, a.subjects);
            override_opt(&mut cfg.synth.seed, a.seed);
            override_opt(&mut cfg.synth.signal_strength, a.signal_strength);
            override_opt(&mut cfg.synth.noise_level, a.noise_level);
            override_opt(&mut cfg.synth.pd_fraction, a.pd_fraction);
            override_opt(&mut cfg.synth.missing_rate, a.missing_rate);
            cfg.validate()?;
            prepare_out_dir(&a.out_dir)?;
            let cohort = generate_cohort(&cfg.synth)?;
            write_ndjson(&a.out_dir.join(RECORDS_FILE), &cohort.records)?;
            write_ndjson(&a.out_dir.join(METADATA_FILE), &cohort.metadata)?;
            cfg.write_resolved(&a.out_dir)?;
            print!(
                "{}",
                summarize_cohort(&cohort.records, &cohort.metadata, cfg.sync.window_hours)
            );
        }
        Command::Preprocess(a) => {
            cfg.validate()?;
            let records = read_raw_records(&a.records)?;
            let metadata = read_metadata(&a.metadata)?;
            prepare_out_dir(&a.out_dir)?;
            let (sequences, report) = preprocess(&records, &metadata, &cfg.signal, &cfg.sync)?;
            write_ndjson(&a.out_dir.join(OBSERVATIONS_FILE), &sequences)?;
            write_json(&a.out_dir.join("preprocess_report.json"), &report)?;
            cfg.write_resolved(&a.out_dir)?;
            println!(
                "kept {} subjects; dropped: another_time records {}, no active segment {}, missing metadata {}, age {}, min tests {}",
                report.kept_subjects,
                report.dropped_another_time,
                report.dropped_no_active_segment,
                report.dropped_missing_metadata,
                report.dropped_age,
                report.dropped_min_tests
            );
        }
        Command::Train(a) => {
            override_opt(&mut cfg.train.epochs, a.epochs);
            override_opt(&mut cfg.train.seed, a.seed);
            if let Some(v) = a.variant {
                cfg.model = cfg.model.with_variant(v);
            }
            cfg.validate()?;
            let data = read_observations(&a.data)?;
            prepare_out_dir(&a.out_dir)?;
            let outcome = train(&data, &cfg.model, &cfg.train)?;
            checkpoint::save(&a.out_dir.join(CHECKPOINT_FILE), &outcome.params)?;
            write_json(&a.out_dir.join("loss_history.json"), &outcome.history)?;
            cfg.write_resolved(&a.out_dir)?;
            let last = outcome.history.last().map(|r| r.train_loss);
            println!(
                "trained {} epochs (kept epoch {:?}), final training loss {:?}",
                outcome.history.len(),
                outcome.best_epoch,
                last
            );
        }
        Command::Eval(a) => {
            override_opt(&mut cfg.cv.folds, a.folds);
            override_opt(&mut cfg.train.epochs, a.epochs);
            override_opt(&mut cfg.train.seed, a.seed);
            cfg.validate()?;
            let data = read_observations(&a.data)?;
            prepare_out_dir(&a.out_dir)?;
            match &a.checkpoint {
                Some(path) => {
                    let params = checkpoint::load(path)?;
                    let eval = evaluate(&params, &data)?;
                    write_json(&a.out_dir.join("metrics.json"), &eval)?;
                    let m = eval.metrics;
                    println!("auc {:.4} aupr {:.4} f1 {:.4}", m.auc, m.aupr, m.f1);
                }
                None => {
                    let report = cross_validate(&data, cfg.cv.folds, &cfg.model, &cfg.train)?;
                    write_json(&a.out_dir.join("metrics.json"), &report)?;
                    let s = report.summary;
                    println!(
                        "auc {:.4} ± {:.4} aupr {:.4} ± {:.4} f1 {:.4} ± {:.4}",
                        s.auc.mean, s.auc.std, s.aupr.mean, s.aupr.std, s.f1.mean, s.f1.std
                    );
                }
            }
            cfg.write_resolved(&a.out_dir)?;
        }
        Command::Ablate(a) => {
            override_opt(&mut cfg.cv.folds, a.folds);
            override_opt(&mut cfg.train.epochs, a.epochs);
            override_opt(&mut cfg.train.seed, a.seed);
            cfg.validate()?;
            let data = read_observations(&a.data)?;
            prepare_out_dir(&a.out_dir)?;
            let rows = run_ablation(&data, &a.variants, cfg.cv.folds, &cfg.model, &cfg.train)?;
            write_json(&a.out_dir.join("ablation.json"), &rows)?;
            let mut table = String::from("variant\tauc\tauc_std\taupr\taupr_std\tf1\tf1_std\n");
            for r in &rows {
                let s = r.report.summary;
                table.push_str(&format!(
                    "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                    r.variant, s.auc.mean, s.auc.std, s.aupr.mean, s.aupr.std, s.f1.mean, s.f1.std
                ));
            }
            let path = a.out_dir.join("ablation.tsv");
            fs::write(&path, &table).map_err(|e| Error::io(path, e))?;
            cfg.write_resolved(&a.out_dir)?;
            print!("{table}");
        }
        Command::ExportAttention(a) => {
            cfg.validate()?;
            let params = checkpoint::load(&a.checkpoint)?;
            let mut data = read_observations(&a.data)?;
            if let Some(id) = &a.subject {
                data.retain(|s| &s.unified_id.to_string() == id);
                if data.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "subject {id} not found in {}",
                        a.data.display()
                    )));
                }
            }
            prepare_out_dir(&a.out_dir)?;
            let tables = attention_tables(&params, &data)?;
            write_temporal_csv(&a.out_dir.join("attention_temporal.csv"), &tables.temporal)?;
            write_modal_csv(&a.out_dir.join("attention_modal.csv"), &tables.modal)?;
            cfg.write_resolved(&a.out_dir)?;
            info!("exported attention for {} subjects", data.len());
            println!(
                "{} temporal rows, {} modal rows",
                tables.temporal.len(),
                tables.modal.len()
            );
        }
    }
    Ok(())
}

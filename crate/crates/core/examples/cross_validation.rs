//! Stratified 5-fold cross-validation with per-fold and summary metrics.

use odernn::dataset::preprocess;
use odernn::model::ModelConfig;
use odernn::signal::SignalConfig;
use odernn::sync::SyncConfig;
use odernn::synth::{generate_cohort, SynthConfig};
use odernn::train::{cross_validate, TrainConfig};

fn main() -> odernn::Result<()> {
    let strength = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(1.0);
    let cohort = generate_cohort(&SynthConfig {
        n_subjects: 100,
        signal_strength: strength,
        max_seq_len: 20,
        max_samples: 600,
        seed: 2,
        ..SynthConfig::default()
    })?;
    let signal = SignalConfig {
        max_segment_len: 128,
        ..SignalConfig::default()
    };
    let (subjects, _) = preprocess(
        &cohort.records,
        &cohort.metadata,
        &signal,
        &SyncConfig::default(),
    )?;

    let model = ModelConfig {
        hidden_size: 16,
        ode_width: 32,
        embed_dim: 8,
        tcn_channels: 8,
        modal_attention_width: 8,
        temporal_attention_width: 8,
        ..ModelConfig::default()
    };
    let report = cross_validate(
        &subjects,
        5,
        &model,
        &TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        },
    )?;
    for f in &report.folds {
        println!(
            "fold {}: auc {:.3} after {} epochs",
            f.fold, f.metrics.auc, f.epochs_run
        );
    }
    let s = report.summary;
    println!(
        "signal strength {strength}: auc {:.3} ± {:.3}, aupr {:.3} ± {:.3}",
        s.auc.mean, s.auc.std, s.aupr.mean, s.aupr.std
    );
    Ok(())
}

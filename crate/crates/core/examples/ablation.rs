//! Compares the five architecture variants on shared folds.

use odernn::dataset::preprocess;
use odernn::model::{ModelConfig, Variant};
use odernn::signal::SignalConfig;
use odernn::sync::SyncConfig;
use odernn::synth::{generate_cohort, SynthConfig};
use odernn::train::{run_ablation, TrainConfig};

fn main() -> odernn::Result<()> {
    let cohort = generate_cohort(&SynthConfig {
        n_subjects: 60,
        max_seq_len: 15,
        max_samples: 400,
        seed: 3,
        ..SynthConfig::default()
    })?;
    let signal = SignalConfig {
        max_segment_len: 96,
        ..SignalConfig::default()
    };
    let (subjects, _) = preprocess(
        &cohort.records,
        &cohort.metadata,
        &signal,
        &SyncConfig::default(),
    )?;

    let model = ModelConfig {
        hidden_size: 8,
        ode_width: 16,
        embed_dim: 6,
        tcn_channels: 6,
        modal_attention_width: 6,
        temporal_attention_width: 6,
        ..ModelConfig::default()
    };
    let rows = run_ablation(
        &subjects,
        &Variant::ALL,
        3,
        &model,
        &TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        },
    )?;
    println!("{:<12}{:>8}{:>8}{:>8}", "variant", "auc", "aupr", "f1");
    for r in &rows {
        let s = r.report.summary;
        println!(
            "{:<12}{:>8.3}{:>8.3}{:>8.3}",
            r.variant.name(),
            s.auc.mean,
            s.aupr.mean,
            s.f1.mean
        );
    }
    Ok(())
}

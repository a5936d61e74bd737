//! Trains the full model on a small synthetic cohort and scores a held-out
//! part of it.

use odernn::dataset::preprocess;
use odernn::model::ModelConfig;
use odernn::signal::SignalConfig;
use odernn::sync::SyncConfig;
use odernn::synth::{generate_cohort, SynthConfig};
use odernn::train::{evaluate, train, TrainConfig};

fn main() -> odernn::Result<()> {
    let cohort = generate_cohort(&SynthConfig {
        n_subjects: 80,
        max_seq_len: 20,
        max_samples: 600,
        seed: 1,
        ..SynthConfig::default()
    })?;
    let signal = SignalConfig {
        max_segment_len: 128,
        ..SignalConfig::default()
    };
    let (subjects, report) = preprocess(
        &cohort.records,
        &cohort.metadata,
        &signal,
        &SyncConfig::default(),
    )?;
    println!(
        "{} subjects after preprocessing ({} tests kept)",
        subjects.len(),
        report.kept_tests
    );

    let (train_set, test_set): (Vec<_>, Vec<_>) = subjects
        .into_iter()
        .enumerate()
        .partition(|(i, _)| i % 4 != 0);
    let train_set: Vec<_> = train_set.into_iter().map(|(_, s)| s).collect();
    let test_set: Vec<_> = test_set.into_iter().map(|(_, s)| s).collect();

    let model = ModelConfig {
        hidden_size: 16,
        ode_width: 32,
        embed_dim: 8,
        tcn_channels: 8,
        modal_attention_width: 8,
        temporal_attention_width: 8,
        ..ModelConfig::default()
    };
    let outcome = train(
        &train_set,
        &model,
        &TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        },
    )?;
    for r in &outcome.history {
        println!(
            "epoch {:>2}  train {:.4}  validation {:.4}",
            r.epoch,
            r.train_loss,
            r.validation_loss.unwrap_or(f64::NAN)
        );
    }
    println!("kept parameters from epoch {:?}", outcome.best_epoch);

    let m = evaluate(&outcome.params, &test_set)?.metrics;
    println!(
        "held out: auc {:.3}  aupr {:.3}  f1 {:.3}",
        m.auc, m.aupr, m.f1
    );
    Ok(())
}

//! Trains briefly, then writes the temporal and modal attention tables of
//! every subject as CSV into a directory (default: the system temp dir).

use std::path::PathBuf;

use odernn::dataset::preprocess;
use odernn::export::{attention_tables, write_modal_csv, write_temporal_csv};
use odernn::model::ModelConfig;
use odernn::signal::SignalConfig;
use odernn::sync::SyncConfig;
use odernn::synth::{generate_cohort, SynthConfig};
use odernn::train::{train, TrainConfig};

fn main() -> odernn::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    let cohort = generate_cohort(&SynthConfig {
        n_subjects: 40,
        max_seq_len: 12,
        max_samples: 400,
        seed: 4,
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
        ..ModelConfig::default()
    };
    let outcome = train(
        &subjects,
        &model,
        &TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        },
    )?;
    let tables = attention_tables(&outcome.params, &subjects)?;

    let temporal = out.join("attention_temporal.csv");
    let modal = out.join("attention_modal.csv");
    write_temporal_csv(&temporal, &tables.temporal)?;
    write_modal_csv(&modal, &tables.modal)?;
    println!("wrote {} and {}", temporal.display(), modal.display());

    // the most attended step of the first subject
    let first = &subjects[0].unified_id.to_string();
    if let Some(top) = tables
        .temporal
        .iter()
        .filter(|r| &r.subject == first)
        .max_by(|a, b| a.weight.total_cmp(&b.weight))
    {
        println!(
            "{first}: step {} (day {:.1}) carries weight {:.3}",
            top.step, top.time_days, top.weight
        );
    }
    Ok(())
}

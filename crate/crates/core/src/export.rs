//! Flat CSV tables of attention weights, one row per (subject, step) or
//! (subject, step, modality).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{predict, ModelParams};
use crate::signal::Modality;
use crate::sync::ObservationSequence;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalRow {
    pub subject: String,
    pub step: usize,
    pub time_days: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalRow {
    pub subject: String,
    pub step: usize,
    pub time_days: f64,
    pub modality: Modality,
    pub present: bool,
    pub weight: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttentionTables {
    pub temporal: Vec<TemporalRow>,
    pub modal: Vec<ModalRow>,
}

/// Runs the model on each subject and collects its attention weights. Tables
/// stay empty for mechanisms the model does not have.
pub fn attention_tables(
    params: &ModelParams,
    subjects: &[ObservationSequence],
) -> Result<AttentionTables> {
    let mut tables = AttentionTables::default();
    for s in subjects {
        let pred = predict(params, s)?;
        let id = s.unified_id.to_string();
        if let Some(w) = &pred.temporal_weights {
            for (step, (obs, &weight)) in s.observations.iter().zip(w).enumerate() {
                tables.temporal.push(TemporalRow {
                    subject: id.clone(),
                    step,
                    time_days: obs.time_days,
                    weight,
                });
            }
        }
        for (step, (obs, w)) in s.observations.iter().zip(&pred.modal_weights).enumerate() {
            for m in Modality::ALL {
                tables.modal.push(ModalRow {
                    subject: id.clone(),
                    step,
                    time_days: obs.time_days,
                    modality: m,
                    present: obs.is_present(m),
                    weight: w[m.index()],
                });
            }
        }
    }
    Ok(tables)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let fail = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    if rows.is_empty() {
        w.write_record(header).map_err(fail)?;
    }
    for r in rows {
        w.serialize(r).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_temporal_csv(path: &Path, rows: &[TemporalRow]) -> Result<()> {
    write_csv(path, rows, &["subject", "step", "time_days", "weight"])
}

pub fn write_modal_csv(path: &Path, rows: &[ModalRow]) -> Result<()> {
    write_csv(
        path,
        rows,
        &[
            "subject",
            "step",
            "time_days",
            "modality",
            "present",
            "weight",
        ],
    )
}

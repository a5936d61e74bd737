//! On-disk record formats and the raw-records-to-observation-sequences pipeline.
//!
//! All files are newline-delimited JSON. Raw test records carry
//! `participant_id`, `modality`, `timestamp`, `medication_point` and either
//! `samples` (per-channel arrays) with `sample_rate` for accelerometer tests, or
//! `games` (each with `start_time` and four `samples` channels
//! `time, actual, target, score`) for memory tests.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{
    clean_accelerometer, encode_memory_record, AccelSequence, MemoryEvent, MemoryGame, Modality,
    SignalConfig,
};
use crate::sync::{
    build_unified_ids, cmp_channels, filter_cohort, synchronize, MedicationPoint,
    ObservationSequence, RawTestRecord, SyncConfig, Timed,
};

/// One memory game as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGame {
    pub start_time: f64,
    /// Four channels: touch time (seconds from game start), actual cell, target cell, score.
    pub samples: Vec<Vec<f64>>,
}

/// A test record before signal cleanup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub participant_id: String,
    pub modality: Modality,
    pub timestamp: f64,
    pub medication_point: MedicationPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub games: Option<Vec<RawGame>>,
}

fn check_channels(samples: &[Vec<f64>], expected: usize, what: &str) -> Result<()> {
    if samples.len() != expected {
        return Err(Error::InvalidInput(format!(
            "{what} needs {expected} channels, found {}",
            samples.len()
        )));
    }
    let len = samples[0].len();
    if len == 0 || samples.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidInput(format!(
            "{what} channels must be non-empty and equally long"
        )));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} contains a non-finite sample"
        )));
    }
    Ok(())
}

impl RawRecord {
    /// Structural checks that do not need signal processing.
    pub fn validate(&self) -> Result<()> {
        if !(self.timestamp > 0.0 && self.timestamp.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "timestamp must be positive, got {}",
                self.timestamp
            )));
        }
        if self.modality.is_accelerometer() {
            let samples = self.samples.as_ref().ok_or_else(|| {
                Error::InvalidInput(format!("{} record has no samples", self.modality))
            })?;
            check_channels(samples, 3, "accelerometer record")?;
            match self.sample_rate {
                Some(r) if r > 0.0 && r.is_finite() => {}
                _ => {
                    return Err(Error::InvalidInput(
                        "accelerometer record needs a positive sample_rate".into(),
                    ))
                }
            }
        } else {
            match (&self.games, &self.samples) {
                (Some(games), _) if !games.is_empty() => {
                    for g in games {
                        check_channels(&g.samples, 4, "memory game")?;
                    }
                }
                (None, Some(samples)) => check_channels(samples, 4, "memory record")?,
                _ => {
                    return Err(Error::InvalidInput(
                        "memory record needs games or samples".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    fn memory_games(&self) -> Result<Vec<MemoryGame>> {
        let to_game = |start_time: f64, s: &[Vec<f64>]| -> Result<MemoryGame> {
            let events = (0..s[0].len())
                .map(|i| {
                    let cell = |v: f64| -> Result<u32> {
                        if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                            Ok(v as u32)
                        } else {
                            Err(Error::InvalidInput(format!(
                                "memory cell index {v} is not a non-negative integer"
                            )))
                        }
                    };
                    Ok(MemoryEvent {
                        time: s[0][i],
                        actual: cell(s[1][i])?,
                        target: cell(s[2][i])?,
                        score: s[3][i],
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MemoryGame { start_time, events })
        };
        match (&self.games, &self.samples) {
            (Some(games), _) => games
                .iter()
                .map(|g| to_game(g.start_time, &g.samples))
                .collect(),
            (None, Some(samples)) => Ok(vec![to_game(0.0, samples)?]),
            (None, None) => Err(Error::InvalidInput(
                "memory record needs games or samples".into(),
            )),
        }
    }

    /// Signal cleanup. `None` when an accelerometer test has no usable active segment.
    pub fn clean(&self, cfg: &SignalConfig) -> Result<Option<RawTestRecord>> {
        self.validate()?;
        let segment = if self.modality.is_accelerometer() {
            let samples = self.samples.as_ref().expect("validated");
            let triples = (0..samples[0].len())
                .map(|i| [samples[0][i], samples[1][i], samples[2][i]])
                .collect();
            let seq = AccelSequence::new(self.sample_rate.expect("validated"), triples)?;
            match clean_accelerometer(self.modality, &seq, cfg)? {
                Some(s) => s,
                None => return Ok(None),
            }
        } else {
            let mut s = encode_memory_record(&self.memory_games()?)?;
            s.truncate_tail(cfg.max_segment_len);
            s
        };
        Ok(Some(RawTestRecord::new(
            self.participant_id.clone(),
            self.timestamp,
            self.medication_point,
            segment,
        )?))
    }

    fn content(&self) -> Vec<Vec<f64>> {
        match (&self.samples, &self.games) {
            (Some(s), _) => s.clone(),
            (None, Some(games)) => games
                .iter()
                .flat_map(|g| std::iter::once(vec![g.start_time]).chain(g.samples.iter().cloned()))
                .collect(),
            (None, None) => Vec::new(),
        }
    }
}

impl Timed for RawRecord {
    fn timestamp(&self) -> f64 {
        self.timestamp
    }

    fn modality(&self) -> Modality {
        self.modality
    }

    fn content_cmp(&self, other: &Self) -> Ordering {
        self.participant_id
            .cmp(&other.participant_id)
            .then(self.medication_point.cmp(&other.medication_point))
            .then_with(|| cmp_channels(&self.content(), &other.content()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectMeta {
    pub participant_id: String,
    pub age: f64,
    pub gender: String,
    pub professional_diagnosis: bool,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads newline-delimited JSON, skipping blank lines. Errors carry the 1-based line number.
pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_ndjson_with(path, |_, item| Ok(item))
}

fn read_ndjson_with<T: DeserializeOwned, U>(
    path: &Path,
    mut check: impl FnMut(&str, T) -> Result<U>,
) -> Result<Vec<U>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let data_err = |message: String| Error::Data {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let item: T = serde_json::from_str(&line).map_err(|e| data_err(e.to_string()))?;
        out.push(check(&line, item).map_err(|e| data_err(e.to_string()))?);
    }
    Ok(out)
}

pub fn write_ndjson<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads and validates raw test records.
pub fn read_raw_records(path: &Path) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let data_err = |message: String| Error::Data {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| {
            if line.contains("\"unified_id\"") {
                data_err(
                    "this is an already preprocessed observation sequence, not a raw test record"
                        .into(),
                )
            } else {
                data_err(e.to_string())
            }
        })?;
        record.validate().map_err(|e| data_err(e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_metadata(path: &Path) -> Result<Vec<SubjectMeta>> {
    read_ndjson_with(path, |_, m: SubjectMeta| {
        if !m.age.is_finite() || m.age < 0.0 {
            return Err(Error::InvalidInput(format!(
                "age must be a non-negative number, got {}",
                m.age
            )));
        }
        Ok(m)
    })
}

pub fn read_observations(path: &Path) -> Result<Vec<ObservationSequence>> {
    read_ndjson_with(path, |_, s: ObservationSequence| {
        if s.observations.is_empty() {
            return Err(Error::InvalidInput(format!(
                "subject {} has no observations",
                s.unified_id
            )));
        }
        Ok(s)
    })
}

/// Counts of everything dropped between raw records and the final cohort.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub raw_records: usize,
    pub dropped_another_time: usize,
    pub dropped_no_active_segment: usize,
    /// Unified IDs whose participant is absent from the metadata.
    pub dropped_missing_metadata: usize,
    pub dropped_age: usize,
    pub dropped_min_tests: usize,
    pub kept_subjects: usize,
    pub kept_observations: usize,
    pub kept_tests: usize,
}

/// Signal cleanup, unified IDs, synchronization and cohort filters.
pub fn preprocess(
    records: &[RawRecord],
    metadata: &[SubjectMeta],
    signal: &SignalConfig,
    sync: &SyncConfig,
) -> Result<(Vec<ObservationSequence>, PreprocessReport)> {
    signal.validate()?;
    let mut report = PreprocessReport {
        raw_records: records.len(),
        ..Default::default()
    };
    let mut cleaned = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if r.medication_point == MedicationPoint::AnotherTime {
            report.dropped_another_time += 1;
            continue;
        }
        match r
            .clean(signal)
            .map_err(|e| Error::InvalidInput(format!("record {}: {e}", i + 1)))?
        {
            Some(t) => cleaned.push(t),
            None => report.dropped_no_active_segment += 1,
        }
    }
    let meta: BTreeMap<&str, &SubjectMeta> = metadata
        .iter()
        .map(|m| (m.participant_id.as_str(), m))
        .collect();
    let mut sequences = Vec::new();
    for (id, recs) in build_unified_ids(cleaned) {
        let Some(m) = meta.get(id.participant_id.as_str()) else {
            warn!(
                "no metadata for participant {}, dropping {id}",
                id.participant_id
            );
            report.dropped_missing_metadata += 1;
            continue;
        };
        let observations = synchronize(&recs, sync.window_hours)?;
        sequences.push(ObservationSequence {
            unified_id: id,
            label: m.professional_diagnosis,
            age: m.age,
            observations,
        });
    }
    let (kept, drops) = filter_cohort(sequences, sync.min_age, sync.min_tests);
    report.dropped_age = drops.age;
    report.dropped_min_tests = drops.min_tests;
    report.kept_subjects = kept.len();
    report.kept_observations = kept.iter().map(|s| s.observations.len()).sum();
    report.kept_tests = kept.iter().map(ObservationSequence::test_count).sum();
    Ok((kept, report))
}

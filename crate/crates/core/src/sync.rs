//! Unified subject IDs, 24-hour synchronization into multimodal observation
//! points, and cohort filters.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{CleanSegment, Modality};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedicationPoint {
    BeforeMedication,
    AfterMedication,
    NoMedication,
    AnotherTime,
}

impl MedicationPoint {
    pub fn name(self) -> &'static str {
        match self {
            MedicationPoint::BeforeMedication => "before_medication",
            MedicationPoint::AfterMedication => "after_medication",
            MedicationPoint::NoMedication => "no_medication",
            MedicationPoint::AnotherTime => "another_time",
        }
    }
}

/// A cleaned activity test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawTestRecord {
    pub participant_id: String,
    pub modality: Modality,
    /// Seconds since the epoch.
    pub timestamp: f64,
    pub medication_point: MedicationPoint,
    pub payload: CleanSegment,
}

impl RawTestRecord {
    pub fn new(
        participant_id: impl Into<String>,
        timestamp: f64,
        medication_point: MedicationPoint,
        payload: CleanSegment,
    ) -> Result<Self> {
        if !(timestamp > 0.0 && timestamp.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "timestamp must be positive, got {timestamp}"
            )));
        }
        Ok(Self {
            participant_id: participant_id.into(),
            modality: payload.modality,
            timestamp,
            medication_point,
            payload,
        })
    }

    pub fn unified_id(&self) -> UnifiedId {
        UnifiedId {
            participant_id: self.participant_id.clone(),
            medication_point: self.medication_point,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnifiedId {
    pub participant_id: String,
    pub medication_point: MedicationPoint,
}

impl std::fmt::Display for UnifiedId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}+{}",
            self.participant_id,
            self.medication_point.name()
        )
    }
}

/// A kept test inside an observation point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalObservation {
    pub timestamp: f64,
    pub segment: CleanSegment,
}

/// One synchronized multimodal snapshot. A modality is present iff its slot
/// holds an observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationPoint {
    /// Days since the subject's first observation point.
    pub time_days: f64,
    pub walking: Option<ModalObservation>,
    pub tapping: Option<ModalObservation>,
    pub memory: Option<ModalObservation>,
}

impl ObservationPoint {
    pub fn get(&self, modality: Modality) -> Option<&ModalObservation> {
        match modality {
            Modality::Walking => self.walking.as_ref(),
            Modality::Tapping => self.tapping.as_ref(),
            Modality::Memory => self.memory.as_ref(),
        }
    }

    pub fn slot_mut(&mut self, modality: Modality) -> &mut Option<ModalObservation> {
        match modality {
            Modality::Walking => &mut self.walking,
            Modality::Tapping => &mut self.tapping,
            Modality::Memory => &mut self.memory,
        }
    }

    pub fn is_present(&self, modality: Modality) -> bool {
        self.get(modality).is_some()
    }

    pub fn mask(&self) -> [bool; 3] {
        Modality::ALL.map(|m| self.is_present(m))
    }

    pub fn present_count(&self) -> usize {
        self.mask().iter().filter(|&&p| p).count()
    }
}

/// One unified subject's time-ordered observations with label and age.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationSequence {
    pub unified_id: UnifiedId,
    /// True for a PD diagnosis.
    pub label: bool,
    pub age: f64,
    pub observations: Vec<ObservationPoint>,
}

impl ObservationSequence {
    /// Total kept tests across all observation points.
    pub fn test_count(&self) -> usize {
        self.observations
            .iter()
            .map(ObservationPoint::present_count)
            .sum()
    }

    /// The records that survived deduplication, in observation order.
    pub fn kept_records(&self) -> Vec<RawTestRecord> {
        let mut out = Vec::new();
        for obs in &self.observations {
            for m in Modality::ALL {
                if let Some(o) = obs.get(m) {
                    out.push(RawTestRecord {
                        participant_id: self.unified_id.participant_id.clone(),
                        modality: m,
                        timestamp: o.timestamp,
                        medication_point: self.unified_id.medication_point,
                        payload: o.segment.clone(),
                    });
                }
            }
        }
        out
    }
}

/// Anything that can be grouped into observation windows.
pub trait Timed {
    fn timestamp(&self) -> f64;
    fn modality(&self) -> Modality;
    /// Total order on content, used only to break exact timestamp ties so that
    /// grouping does not depend on input order.
    fn content_cmp(&self, other: &Self) -> Ordering;
}

pub(crate) fn cmp_channels(a: &[Vec<f64>], b: &[Vec<f64>]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                x.len().cmp(&y.len()).then_with(|| {
                    x.iter()
                        .zip(y)
                        .map(|(p, q)| p.total_cmp(q))
                        .find(|o| o.is_ne())
                        .unwrap_or(Ordering::Equal)
                })
            })
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

impl<T: Timed> Timed for &T {
    fn timestamp(&self) -> f64 {
        (**self).timestamp()
    }

    fn modality(&self) -> Modality {
        (**self).modality()
    }

    fn content_cmp(&self, other: &Self) -> Ordering {
        (**self).content_cmp(*other)
    }
}

impl Timed for RawTestRecord {
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
            .then_with(|| cmp_channels(&self.payload.channels, &other.payload.channels))
    }
}

/// Partitions records by participant and medication point, dropping
/// `another_time` records.
pub fn build_unified_ids(records: Vec<RawTestRecord>) -> BTreeMap<UnifiedId, Vec<RawTestRecord>> {
    let mut out: BTreeMap<UnifiedId, Vec<RawTestRecord>> = BTreeMap::new();
    for r in records {
        if r.medication_point == MedicationPoint::AnotherTime {
            continue;
        }
        out.entry(r.unified_id()).or_default().push(r);
    }
    out
}

fn sorted<T: Timed>(items: &[T]) -> Vec<&T> {
    let mut refs: Vec<&T> = items.iter().collect();
    refs.sort_by(|a, b| {
        a.timestamp()
            .total_cmp(&b.timestamp())
            .then(a.modality().cmp(&b.modality()))
            .then_with(|| a.content_cmp(b))
    });
    refs
}

/// Greedy windows: a record joins the current group while it lies within
/// `window_secs` of the group's first record.
fn group_windows<'a, T: Timed>(items: &[&'a T], window_secs: f64) -> Vec<Vec<&'a T>> {
    let mut groups: Vec<Vec<&T>> = Vec::new();
    for &item in items {
        match groups.last_mut() {
            Some(g) if item.timestamp() - g[0].timestamp() <= window_secs => g.push(item),
            _ => groups.push(vec![item]),
        }
    }
    groups
}

/// Resolves duplicate modalities inside one window.
///
/// Records (in time order) are dealt into candidate sets, a new set opening
/// whenever the current one already holds that modality. For every modality the
/// copy from the set with the latest mean timestamp is kept.
fn dedup_group<'a, T: Timed>(group: &[&'a T]) -> [Option<&'a T>; 3] {
    let mut sets: Vec<[Option<&T>; 3]> = vec![[None; 3]];
    for &item in group {
        let slot = item.modality().index();
        if sets.last().unwrap()[slot].is_some() {
            sets.push([None; 3]);
        }
        sets.last_mut().unwrap()[slot] = Some(item);
    }
    let set_time = |set: &[Option<&T>; 3]| {
        let times: Vec<f64> = set.iter().flatten().map(|r| r.timestamp()).collect();
        times.iter().sum::<f64>() / times.len() as f64
    };
    let mut kept: [Option<&T>; 3] = [None; 3];
    let mut kept_time = [f64::NEG_INFINITY; 3];
    for set in &sets {
        let t = set_time(set);
        for (slot, item) in set.iter().enumerate() {
            if let Some(item) = item {
                // Later sets win ties because they come later in time order.
                if t >= kept_time[slot] {
                    kept[slot] = Some(*item);
                    kept_time[slot] = t;
                }
            }
        }
    }
    kept
}

/// Windowed, deduplicated groups: each entry holds the kept item per modality
/// slot and the group time (mean timestamp of kept items, in seconds).
pub fn synchronized_groups<T: Timed>(
    items: &[T],
    window_hours: f64,
) -> Vec<(f64, [Option<&T>; 3])> {
    let ordered = sorted(items);
    group_windows(&ordered, window_hours * 3600.0)
        .iter()
        .map(|g| {
            let kept = dedup_group(g);
            let times: Vec<f64> = kept.iter().flatten().map(|r| r.timestamp()).collect();
            (times.iter().sum::<f64>() / times.len() as f64, kept)
        })
        .collect()
}

/// Groups one unified ID's records into observation points.
pub fn synchronize(records: &[RawTestRecord], window_hours: f64) -> Result<Vec<ObservationPoint>> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no records to synchronize".into()));
    }
    if !(window_hours > 0.0) {
        return Err(Error::config("sync.window_hours", "must be positive"));
    }
    let first_id = records[0].unified_id();
    if records.iter().any(|r| r.unified_id() != first_id) {
        return Err(Error::InvalidInput(
            "synchronize expects records of a single unified ID".into(),
        ));
    }
    let groups = synchronized_groups(records, window_hours);
    let origin = groups[0].0;
    Ok(groups
        .into_iter()
        .map(|(time, kept)| {
            let mut point = ObservationPoint {
                time_days: (time - origin) / SECONDS_PER_DAY,
                walking: None,
                tapping: None,
                memory: None,
            };
            for r in kept.into_iter().flatten() {
                *point.slot_mut(r.modality) = Some(ModalObservation {
                    timestamp: r.timestamp,
                    segment: r.payload.clone(),
                });
            }
            point
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncConfig {
    pub window_hours: f64,
    pub min_age: f64,
    pub min_tests: usize,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            window_hours: 24.0,
            min_age: 45.0,
            min_tests: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortDrops {
    pub age: usize,
    pub min_tests: usize,
}

/// Keeps sequences with `age >= min_age` and at least `min_tests` kept tests.
pub fn filter_cohort(
    sequences: Vec<ObservationSequence>,
    min_age: f64,
    min_tests: usize,
) -> (Vec<ObservationSequence>, CohortDrops) {
    let mut drops = CohortDrops::default();
    let kept = sequences
        .into_iter()
        .filter(|s| {
            if s.age < min_age {
                drops.age += 1;
                false
            } else if s.test_count() < min_tests {
                drops.min_tests += 1;
                false
            } else {
                true
            }
        })
        .collect();
    (kept, drops)
}

//! Raw test signal cleanup: gravity removal, change-point segmentation,
//! active-segment selection and memory-game packaging.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One activity test type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Walking,
    Tapping,
    Memory,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Walking, Modality::Tapping, Modality::Memory];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Walking => "walking",
            Modality::Tapping => "tapping",
            Modality::Memory => "memory",
        }
    }

    /// Input channel count of the cleaned segment.
    pub fn channels(self) -> usize {
        match self {
            Modality::Walking | Modality::Tapping => 3,
            Modality::Memory => 4,
        }
    }

    pub fn is_accelerometer(self) -> bool {
        !matches!(self, Modality::Memory)
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown modality {s:?}")))
    }
}

/// Accelerometer readings in G, one `(x, y, z)` triple per sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelSequence {
    sample_rate: f64,
    samples: Vec<[f64; 3]>,
}

impl AccelSequence {
    pub fn new(sample_rate: f64, samples: Vec<[f64; 3]>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput(
                "accelerometer sequence is empty".into(),
            ));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("accelerometer sample".into()));
        }
        Ok(Self {
            sample_rate,
            samples,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[[f64; 3]] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Channel-major copy: `[x[..], y[..], z[..]]`.
    pub fn channels(&self) -> Vec<Vec<f64>> {
        (0..3)
            .map(|axis| self.samples.iter().map(|s| s[axis]).collect())
            .collect()
    }

    /// Euclidean norm of each sample.
    pub fn magnitude(&self) -> Vec<f64> {
        self.samples
            .iter()
            .map(|[x, y, z]| (x * x + y * y + z * z).sqrt())
            .collect()
    }
}

/// One touch in a memory game.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryEvent {
    /// Seconds since the game started.
    pub time: f64,
    pub actual: u32,
    pub target: u32,
    pub score: f64,
}

/// A single memory game: touches ordered by time, plus the absolute start time
/// used to order several games within one test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryGame {
    pub start_time: f64,
    pub events: Vec<MemoryEvent>,
}

/// A cleaned, fixed-role sample sequence (channel × time).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanSegment {
    pub modality: Modality,
    pub channels: Vec<Vec<f64>>,
}

impl CleanSegment {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keeps only the most recent `max_len` samples.
    pub fn truncate_tail(&mut self, max_len: usize) {
        let len = self.len();
        if len > max_len {
            for ch in &mut self.channels {
                ch.drain(..len - max_len);
            }
        }
    }
}

/// Settings for the accelerometer cleanup pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    /// Low-pass cutoff of the gravity estimate.
    pub cutoff_hz: f64,
    /// Per-split penalty of the change-point objective (G² units on the norm signal).
    pub penalty: f64,
    /// Pooled standard deviation a segment must exceed to count as active.
    pub std_threshold: f64,
    pub min_segment_len: usize,
    /// Longer segments keep only their most recent samples.
    pub max_segment_len: usize,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            cutoff_hz: 0.3,
            penalty: 1.0,
            std_threshold: 0.05,
            min_segment_len: 50,
            max_segment_len: 2000,
        }
    }
}

impl SignalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_hz > 0.0) {
            return Err(Error::config("signal.cutoff_hz", "must be positive"));
        }
        if !(self.penalty > 0.0) {
            return Err(Error::config("signal.penalty", "must be positive"));
        }
        if !(self.std_threshold >= 0.0) {
            return Err(Error::config(
                "signal.std_threshold",
                "must be non-negative",
            ));
        }
        if self.max_segment_len == 0 {
            return Err(Error::config("signal.max_segment_len", "must be positive"));
        }
        Ok(())
    }
}

/// Smoothing factor of the first-order exponential low-pass at `cutoff_hz`.
pub fn lowpass_alpha(cutoff_hz: f64, sample_rate: f64) -> f64 {
    1.0 - (-2.0 * PI * cutoff_hz / sample_rate).exp()
}

/// Subtracts a first-order exponential low-pass (the gravity estimate) from
/// each axis. The estimate starts at the first sample, so a constant input is
/// removed exactly.
pub fn remove_gravity(seq: &AccelSequence, cutoff_hz: f64) -> Result<AccelSequence> {
    let nyquist = seq.sample_rate / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::InvalidInput(format!(
            "cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    if seq.len() < 2 {
        return Err(Error::InvalidInput(
            "gravity removal needs at least 2 samples".into(),
        ));
    }
    let alpha = lowpass_alpha(cutoff_hz, seq.sample_rate);
    let mut gravity = seq.samples[0];
    let samples = seq
        .samples
        .iter()
        .map(|s| {
            let mut out = [0.0; 3];
            for axis in 0..3 {
                gravity[axis] += alpha * (s[axis] - gravity[axis]);
                out[axis] = s[axis] - gravity[axis];
            }
            out
        })
        .collect();
    AccelSequence::new(seq.sample_rate, samples)
}

/// Prefix sums for O(1) segment cost under the piecewise-constant-mean model.
struct SegmentCost {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl SegmentCost {
    fn new(signal: &[f64]) -> Self {
        let mut sum = Vec::with_capacity(signal.len() + 1);
        let mut sum_sq = Vec::with_capacity(signal.len() + 1);
        sum.push(0.0);
        sum_sq.push(0.0);
        for &x in signal {
            sum.push(sum.last().unwrap() + x);
            sum_sq.push(sum_sq.last().unwrap() + x * x);
        }
        Self { sum, sum_sq }
    }

    /// Sum of squared deviations from the mean over `start..end`.
    fn cost(&self, start: usize, end: usize) -> f64 {
        let n = (end - start) as f64;
        let s = self.sum[end] - self.sum[start];
        let sq = self.sum_sq[end] - self.sum_sq[start];
        (sq - s * s / n).max(0.0)
    }
}

/// Exact penalized least-squares segmentation by dynamic programming.
///
/// Minimizes `Σ segment SSE + penalty · (#splits)` and returns the sorted split
/// indices (each index starts a new segment). Among equal-cost optima the one
/// with the earliest last split is returned.
pub fn detect_change_points(signal: &[f64], penalty: f64) -> Result<Vec<usize>> {
    if signal.len() < 2 {
        return Err(Error::InvalidInput(
            "change-point detection needs at least 2 samples".into(),
        ));
    }
    if !(penalty > 0.0 && penalty.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "penalty must be positive, got {penalty}"
        )));
    }
    let n = signal.len();
    let costs = SegmentCost::new(signal);
    // best[t]: optimal objective for signal[..t], counting a penalty for every
    // segment; one penalty is removed at the end.
    let mut best = vec![0.0; n + 1];
    let mut prev = vec![0usize; n + 1];
    for end in 1..=n {
        let mut best_val = f64::INFINITY;
        let mut best_start = 0;
        for start in 0..end {
            let v = best[start] + costs.cost(start, end) + penalty;
            if v < best_val {
                best_val = v;
                best_start = start;
            }
        }
        best[end] = best_val;
        prev[end] = best_start;
    }
    let mut splits = Vec::new();
    let mut end = n;
    while end > 0 {
        let start = prev[end];
        if start > 0 {
            splits.push(start);
        }
        end = start;
    }
    splits.reverse();
    Ok(splits)
}

/// Objective value of a segmentation, evaluated directly (no prefix sums).
pub fn segmentation_cost(signal: &[f64], splits: &[usize], penalty: f64) -> f64 {
    let mut bounds = Vec::with_capacity(splits.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(splits);
    bounds.push(signal.len());
    let sse: f64 = bounds
        .windows(2)
        .map(|w| {
            let seg = &signal[w[0]..w[1]];
            let mean = seg.iter().sum::<f64>() / seg.len() as f64;
            seg.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
        })
        .sum();
    sse + penalty * splits.len() as f64
}

fn pooled_std(channels: &[Vec<f64>], start: usize, end: usize) -> f64 {
    let n = (end - start) as f64;
    let var_sum: f64 = channels
        .iter()
        .map(|ch| {
            let seg = &ch[start..end];
            let mean = seg.iter().sum::<f64>() / n;
            seg.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
        })
        .sum();
    (var_sum / channels.len() as f64).sqrt()
}

/// Picks the longest segment whose pooled standard deviation (root of the mean
/// per-channel variance) exceeds `std_threshold`; ties go to the earliest.
pub fn extract_active_segment(
    modality: Modality,
    channels: &[Vec<f64>],
    change_points: &[usize],
    std_threshold: f64,
) -> Option<CleanSegment> {
    let len = channels.first()?.len();
    if len == 0 {
        return None;
    }
    let mut bounds = Vec::with_capacity(change_points.len() + 2);
    bounds.push(0);
    bounds.extend(change_points.iter().copied().filter(|&c| c > 0 && c < len));
    bounds.push(len);

    let mut chosen: Option<(usize, usize)> = None;
    for w in bounds.windows(2) {
        let (start, end) = (w[0], w[1]);
        if end <= start || pooled_std(channels, start, end) <= std_threshold {
            continue;
        }
        if chosen.is_none_or(|(s, e)| end - start > e - s) {
            chosen = Some((start, end));
        }
    }
    chosen.map(|(start, end)| CleanSegment {
        modality,
        channels: channels.iter().map(|ch| ch[start..end].to_vec()).collect(),
    })
}

/// Concatenates memory games in start-time order into a 4-channel
/// `(time, actual, target, score)` segment. Each game's touch times are offset
/// by the last emitted time so the time channel never decreases.
pub fn encode_memory_record(games: &[MemoryGame]) -> Result<CleanSegment> {
    if games.is_empty() {
        return Err(Error::InvalidInput("memory record has no games".into()));
    }
    let mut order: Vec<&MemoryGame> = games.iter().collect();
    order.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));

    let mut channels = vec![Vec::new(); 4];
    let mut offset = 0.0;
    for game in order {
        for ev in &game.events {
            channels[0].push(offset + ev.time);
            channels[1].push(f64::from(ev.actual));
            channels[2].push(f64::from(ev.target));
            channels[3].push(ev.score);
        }
        if let Some(&last) = channels[0].last() {
            offset = last;
        }
    }
    if channels[0].is_empty() {
        return Err(Error::InvalidInput("memory record has no touches".into()));
    }
    Ok(CleanSegment {
        modality: Modality::Memory,
        channels,
    })
}

/// Full accelerometer cleanup: gravity removal, segmentation of the magnitude
/// signal, active-segment selection, minimum length check and tail truncation.
/// Returns `None` when no usable segment exists.
pub fn clean_accelerometer(
    modality: Modality,
    seq: &AccelSequence,
    cfg: &SignalConfig,
) -> Result<Option<CleanSegment>> {
    let filtered = remove_gravity(seq, cfg.cutoff_hz)?;
    let cps = detect_change_points(&filtered.magnitude(), cfg.penalty)?;
    let Some(mut segment) =
        extract_active_segment(modality, &filtered.channels(), &cps, cfg.std_threshold)
    else {
        return Ok(None);
    };
    if segment.len() < cfg.min_segment_len {
        return Ok(None);
    }
    segment.truncate_tail(cfg.max_segment_len);
    Ok(Some(segment))
}

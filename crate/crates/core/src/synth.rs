//! Synthetic cohorts with irregular visits, missing modalities and a
//! controllable class signal planted in each modality.
//!
//! Class effects (all scale linearly with `signal_strength`, and vanish at 0):
//! walking gets a 4–6 Hz tremor sinusoid, tapping gets a larger spread of
//! inter-tap intervals and tap amplitudes, memory gets more wrong touches.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{RawGame, RawRecord, SubjectMeta};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::metrics::{mean_std, MeanStd};
use crate::signal::Modality;
use crate::sync::{synchronized_groups, MedicationPoint, SyncConfig, SECONDS_PER_DAY};

const HOUR: f64 = 3600.0;
/// Tests of one visit fall within this many hours of the visit start.
const VISIT_SPREAD_HOURS: f64 = 4.0;
const MEMORY_CELLS: u32 = 9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub pd_fraction: f64,
    /// Expected share of absent (observation, modality) slots.
    pub missing_rate: f64,
    pub mean_seq_len: f64,
    pub seq_len_std: f64,
    pub min_seq_len: usize,
    pub max_seq_len: usize,
    /// Relative propensities of walking, tapping and memory tests.
    pub presence_propensity: [f64; 3],
    pub signal_strength: f64,
    /// Tremor amplitude (G) added to PD walking tests at full strength.
    pub tremor_amplitude: f64,
    /// Relative growth of tap interval and amplitude spread at full strength.
    pub tap_spread_gain: f64,
    /// Extra wrong-touch probability in PD memory games at full strength.
    pub memory_error_gain: f64,
    /// Standard deviation of additive sensor noise, in G.
    pub noise_level: f64,
    /// Share of tests replaced by class-independent junk.
    pub corrupt_rate: f64,
    /// Chance that a test is repeated within the same visit.
    pub duplicate_rate: f64,
    /// Chance that a subject also has a few `another_time` records.
    pub another_time_rate: f64,
    pub sample_rate: f64,
    pub min_samples: usize,
    pub max_samples: usize,
    pub age_mean: f64,
    pub age_std: f64,
    pub min_age: f64,
    pub male_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 200,
            pd_fraction: 0.624,
            missing_rate: 0.576,
            mean_seq_len: 13.75,
            seq_len_std: 23.51,
            min_seq_len: 5,
            max_seq_len: 120,
            presence_propensity: [6.49, 13.26, 1.73],
            signal_strength: 1.0,
            tremor_amplitude: 0.3,
            tap_spread_gain: 3.0,
            memory_error_gain: 0.3,
            noise_level: 0.03,
            corrupt_rate: 0.1,
            duplicate_rate: 0.05,
            another_time_rate: 0.1,
            sample_rate: 100.0,
            min_samples: 200,
            max_samples: 1000,
            age_mean: 60.61,
            age_std: 8.76,
            min_age: 45.0,
            male_fraction: 0.677,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("synth.pd_fraction", self.pd_fraction),
            ("synth.signal_strength", self.signal_strength),
            ("synth.corrupt_rate", self.corrupt_rate),
            ("synth.duplicate_rate", self.duplicate_rate),
            ("synth.another_time_rate", self.another_time_rate),
            ("synth.male_fraction", self.male_fraction),
        ];
        for (field, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(field, format!("must lie in [0, 1], got {v}")));
            }
        }
        if !(0.0..=2.0 / 3.0).contains(&self.missing_rate) {
            return Err(Error::config(
                "synth.missing_rate",
                format!(
                    "must lie in [0, 2/3] since every observation holds a test, got {}",
                    self.missing_rate
                ),
            ));
        }
        if self.n_subjects < 2 {
            return Err(Error::config(
                "synth.n_subjects",
                "needs at least 2 subjects",
            ));
        }
        if !(self.mean_seq_len > 0.0) || !(self.seq_len_std >= 0.0) {
            return Err(Error::config(
                "synth.mean_seq_len",
                "mean must be positive and std non-negative",
            ));
        }
        if self.min_seq_len == 0 || self.max_seq_len < self.min_seq_len {
            return Err(Error::config(
                "synth.max_seq_len",
                "need 1 <= min_seq_len <= max_seq_len",
            ));
        }
        if self.presence_propensity.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::config(
                "synth.presence_propensity",
                "propensities must be positive",
            ));
        }
        if !(self.tremor_amplitude >= 0.0 && self.tap_spread_gain >= 0.0) {
            return Err(Error::config(
                "synth.tremor_amplitude",
                "effect sizes must be non-negative",
            ));
        }
        if !(0.0..=0.6).contains(&self.memory_error_gain) {
            return Err(Error::config(
                "synth.memory_error_gain",
                "must lie in [0, 0.6]",
            ));
        }
        if !(self.noise_level >= 0.0) {
            return Err(Error::config("synth.noise_level", "must be non-negative"));
        }
        if !(self.sample_rate > 12.0) {
            return Err(Error::config(
                "synth.sample_rate",
                "must exceed 12 Hz to carry the tremor band",
            ));
        }
        if self.min_samples < 100 || self.max_samples < self.min_samples {
            return Err(Error::config(
                "synth.max_samples",
                "need 100 <= min_samples <= max_samples",
            ));
        }
        if !(self.age_std >= 0.0) {
            return Err(Error::config("synth.age_std", "must be non-negative"));
        }
        Ok(())
    }

    /// Per-modality presence probabilities that hit `missing_rate` in expectation,
    /// given that every observation holds at least one test.
    pub fn presence_probabilities(&self) -> [f64; 3] {
        let w = self.presence_propensity;
        let target = 3.0 * (1.0 - self.missing_rate);
        let probs = |s: f64| w.map(|w| (s * w).min(1.0));
        let expected_present = |s: f64| {
            let p = probs(s);
            let none: f64 = p.iter().map(|p| 1.0 - p).product();
            p.iter().sum::<f64>() / (1.0 - none)
        };
        let wmin = w.iter().copied().fold(f64::INFINITY, f64::min);
        let (mut lo, mut hi) = (1e-9, 1.0 / wmin);
        if expected_present(hi) <= target {
            return probs(hi);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if expected_present(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        probs(0.5 * (lo + hi))
    }
}

/// Raw records plus the subject metadata table.
#[derive(Clone, Debug, PartialEq)]
pub struct Cohort {
    pub records: Vec<RawRecord>,
    pub metadata: Vec<SubjectMeta>,
}

pub fn generate_cohort(cfg: &SynthConfig) -> Result<Cohort> {
    cfg.validate()?;
    let mut root = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
    let n_pd = (cfg.pd_fraction * cfg.n_subjects as f64).round() as usize;
    let mut labels: Vec<bool> = (0..cfg.n_subjects).map(|i| i < n_pd).collect();
    labels.shuffle(&mut root);

    let presence = cfg.presence_probabilities();
    let mut records = Vec::new();
    let mut metadata = Vec::with_capacity(cfg.n_subjects);
    for (i, &pd) in labels.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1000 + i as u64));
        let pid = format!("S{:05}", i + 1);
        let (meta, recs) = generate_subject(cfg, &pid, pd, &presence, &mut rng)?;
        metadata.push(meta);
        records.extend(recs);
    }
    Ok(Cohort { records, metadata })
}

fn lognormal_from_moments(mean: f64, std: f64) -> Result<LogNormal<f64>> {
    let sigma2 = (1.0 + (std / mean).powi(2)).ln();
    LogNormal::new(mean.ln() - sigma2 / 2.0, sigma2.sqrt())
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

fn generate_subject(
    cfg: &SynthConfig,
    pid: &str,
    pd: bool,
    presence: &[f64; 3],
    rng: &mut ChaCha8Rng,
) -> Result<(SubjectMeta, Vec<RawRecord>)> {
    let age_dist =
        Normal::new(cfg.age_mean, cfg.age_std).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut age = age_dist.sample(rng);
    for _ in 0..1000 {
        if age >= cfg.min_age {
            break;
        }
        age = age_dist.sample(rng);
    }
    let age = (age.max(cfg.min_age) * 10.0).round() / 10.0;
    let gender = if rng.random_bool(cfg.male_fraction) {
        "male"
    } else {
        "female"
    };
    let medication_point = match (pd, rng.random_bool(0.5)) {
        (false, _) => MedicationPoint::NoMedication,
        (true, true) => MedicationPoint::BeforeMedication,
        (true, false) => MedicationPoint::AfterMedication,
    };
    let meta = SubjectMeta {
        participant_id: pid.to_string(),
        age,
        gender: gender.into(),
        professional_diagnosis: pd,
    };

    let len_dist = lognormal_from_moments(cfg.mean_seq_len, cfg.seq_len_std)?;
    let visits = (len_dist.sample(rng).round() as usize).clamp(cfg.min_seq_len, cfg.max_seq_len);
    // Gap dispersion mirrors the sequence-length dispersion; the fixed part keeps
    // consecutive visits in separate synchronization windows.
    let gap_sigma = (1.0 + (cfg.seq_len_std / cfg.mean_seq_len).powi(2))
        .ln()
        .sqrt();
    let gap_dist =
        LogNormal::new(0.0, gap_sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let min_gap = (SyncConfig::default().window_hours + VISIT_SPREAD_HOURS) * HOUR;

    let effect = if pd { cfg.signal_strength } else { 0.0 };
    let mut records = Vec::new();
    let mut visit = 1.5e9 + rng.random_range(0.0..30.0 * SECONDS_PER_DAY);
    for _ in 0..visits {
        let present = loop {
            let p = presence.map(|p| rng.random_bool(p));
            if p.iter().any(|&x| x) {
                break p;
            }
        };
        for m in Modality::ALL {
            if !present[m.index()] {
                continue;
            }
            let copies = if rng.random_bool(cfg.duplicate_rate) {
                2
            } else {
                1
            };
            for _ in 0..copies {
                let t = visit + rng.random_range(0.0..VISIT_SPREAD_HOURS * HOUR);
                records.push(make_record(cfg, pid, m, t, medication_point, effect, rng));
            }
        }
        visit += min_gap + SECONDS_PER_DAY * gap_dist.sample(rng);
    }
    if rng.random_bool(cfg.another_time_rate) {
        let (first, last) = (records[0].timestamp, visit);
        for _ in 0..rng.random_range(1..=3) {
            let m = Modality::ALL[rng.random_range(0..3)];
            let t = rng.random_range(first..last);
            records.push(make_record(
                cfg,
                pid,
                m,
                t,
                MedicationPoint::AnotherTime,
                effect,
                rng,
            ));
        }
    }
    records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok((meta, records))
}

fn make_record(
    cfg: &SynthConfig,
    pid: &str,
    modality: Modality,
    timestamp: f64,
    medication_point: MedicationPoint,
    effect: f64,
    rng: &mut ChaCha8Rng,
) -> RawRecord {
    let corrupt = rng.random_bool(cfg.corrupt_rate);
    let mut record = RawRecord {
        participant_id: pid.to_string(),
        modality,
        timestamp,
        medication_point,
        samples: None,
        sample_rate: None,
        games: None,
    };
    match modality {
        Modality::Walking | Modality::Tapping => {
            record.samples = Some(accelerometer_test(cfg, modality, effect, corrupt, rng));
            record.sample_rate = Some(cfg.sample_rate);
        }
        Modality::Memory => record.games = Some(memory_test(cfg, effect, corrupt, rng)),
    }
    record
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let n = Normal::new(0.0, 1.0).unwrap();
    let v = [n.sample(rng), n.sample(rng), n.sample(rng)];
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.map(|x| x / norm)
}

/// A walking or tapping accelerometer recording: quiet lead-in, active part, quiet tail.
fn accelerometer_test(
    cfg: &SynthConfig,
    modality: Modality,
    effect: f64,
    corrupt: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let fs = cfg.sample_rate;
    let len = rng.random_range(cfg.min_samples..=cfg.max_samples);
    let lead = (len as f64 * rng.random_range(0.1..0.25)) as usize;
    let tail = (len as f64 * rng.random_range(0.1..0.25)) as usize;
    let active = lead..len - tail;

    let tilt = Normal::new(0.0, 0.2).unwrap();
    let g = {
        let v = [tilt.sample(rng), tilt.sample(rng), 1.0];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.map(|x| x / n)
    };
    let noise = Normal::new(0.0, cfg.noise_level.max(1e-12)).unwrap();
    let mut out: Vec<Vec<f64>> = (0..3)
        .map(|axis| {
            (0..len)
                .map(|_| {
                    g[axis]
                        + if cfg.noise_level > 0.0 {
                            noise.sample(rng)
                        } else {
                            0.0
                        }
                })
                .collect()
        })
        .collect();

    if corrupt {
        let amp = rng.random_range(0.1..0.5);
        let junk = Normal::new(0.0, amp).unwrap();
        for ch in &mut out {
            for v in &mut ch[active.clone()] {
                *v += junk.sample(rng);
            }
        }
        return out;
    }

    match modality {
        Modality::Walking => {
            let f = rng.random_range(1.6..2.2);
            let amps = [
                rng.random_range(0.15..0.3),
                rng.random_range(0.1..0.2),
                rng.random_range(0.2..0.4),
            ];
            let phases = [0; 3].map(|_| rng.random_range(0.0..2.0 * PI));
            for (axis, ch) in out.iter_mut().enumerate() {
                for n in active.clone() {
                    ch[n] += amps[axis] * (2.0 * PI * f * n as f64 / fs + phases[axis]).sin();
                }
            }
        }
        Modality::Tapping => {
            let interval_mean = rng.random_range(0.18..0.25);
            let spread = 1.0 + cfg.tap_spread_gain * effect;
            let interval = Normal::new(interval_mean, 0.02 * spread).unwrap();
            let amplitude = Normal::new(0.6, 0.05 * spread).unwrap();
            let dir = [0.2, 0.2, 1.0];
            let mut t = active.start as f64 / fs;
            loop {
                t += interval.sample(rng).max(0.05);
                let start = (t * fs) as usize;
                if start >= active.end {
                    break;
                }
                let a = amplitude.sample(rng).max(0.05);
                for j in 0..8 {
                    if start + j >= active.end {
                        break;
                    }
                    let pulse = a * (-(j as f64) / 2.0).exp();
                    for (axis, ch) in out.iter_mut().enumerate() {
                        ch[start + j] += dir[axis] * pulse;
                    }
                }
            }
        }
        Modality::Memory => unreachable!("memory tests have no accelerometer"),
    }

    if effect > 0.0 && modality == Modality::Walking {
        let f = rng.random_range(4.0..6.0);
        let dir = unit_vector(rng);
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp = cfg.tremor_amplitude * effect;
        for (axis, ch) in out.iter_mut().enumerate() {
            for n in active.clone() {
                ch[n] += amp * dir[axis] * (2.0 * PI * f * n as f64 / fs + phase).sin();
            }
        }
    }
    out
}

/// One to three 3×3 grid games; games are stored in shuffled order.
fn memory_test(
    cfg: &SynthConfig,
    effect: f64,
    corrupt: bool,
    rng: &mut ChaCha8Rng,
) -> Vec<RawGame> {
    let error_rate = if corrupt {
        rng.random_range(0.0..0.8)
    } else {
        0.05 + cfg.memory_error_gain * effect
    };
    let n_games = rng.random_range(1..=3);
    let mut games: Vec<RawGame> = (0..n_games)
        .map(|g| {
            let touches = rng.random_range(3..=8);
            let mut samples = vec![Vec::with_capacity(touches); 4];
            let mut t = 0.0;
            for _ in 0..touches {
                t += rng.random_range(0.4..1.2);
                let target = rng.random_range(0..MEMORY_CELLS);
                let actual = if rng.random_bool(error_rate) {
                    (target + rng.random_range(1..MEMORY_CELLS)) % MEMORY_CELLS
                } else {
                    target
                };
                samples[0].push(t);
                samples[1].push(f64::from(actual));
                samples[2].push(f64::from(target));
                samples[3].push(if actual == target { 1.0 } else { 0.0 });
            }
            RawGame {
                start_time: 30.0 * g as f64,
                samples,
            }
        })
        .collect();
    games.shuffle(rng);
    games
}

/// Table-style statistics of a raw cohort, after unified-ID grouping and
/// synchronization (no signal cleanup or cohort filtering).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub samples: usize,
    pub pd_fraction: f64,
    pub male_fraction: f64,
    pub age: MeanStd,
    pub observations_per_id: MeanStd,
    pub missing_rate: f64,
    /// Walking, tapping and memory tests per ID.
    pub tests_per_id: [MeanStd; 3],
}

fn summarize(values: &[f64]) -> MeanStd {
    mean_std(values).unwrap_or(MeanStd {
        mean: 0.0,
        std: 0.0,
    })
}

pub fn summarize_cohort(
    records: &[RawRecord],
    metadata: &[SubjectMeta],
    window_hours: f64,
) -> CohortSummary {
    let meta: BTreeMap<&str, &SubjectMeta> = metadata
        .iter()
        .map(|m| (m.participant_id.as_str(), m))
        .collect();
    let mut ids: BTreeMap<(&str, MedicationPoint), Vec<&RawRecord>> = BTreeMap::new();
    for r in records {
        if r.medication_point != MedicationPoint::AnotherTime
            && meta.contains_key(r.participant_id.as_str())
        {
            ids.entry((r.participant_id.as_str(), r.medication_point))
                .or_default()
                .push(r);
        }
    }
    let (mut pd, mut male, mut ages, mut lens) = (0usize, 0usize, Vec::new(), Vec::new());
    let mut tests: [Vec<f64>; 3] = Default::default();
    let (mut slots, mut present) = (0usize, 0usize);
    for ((pid, _), recs) in &ids {
        let m = meta[pid];
        pd += m.professional_diagnosis as usize;
        male += (m.gender == "male") as usize;
        ages.push(m.age);
        let groups = synchronized_groups(recs, window_hours);
        lens.push(groups.len() as f64);
        let mut counts = [0usize; 3];
        for (_, kept) in &groups {
            slots += 3;
            for (slot, item) in kept.iter().enumerate() {
                if item.is_some() {
                    present += 1;
                    counts[slot] += 1;
                }
            }
        }
        for (t, c) in tests.iter_mut().zip(counts) {
            t.push(c as f64);
        }
    }
    let n = ids.len();
    let frac = |k: usize, of: usize| if of == 0 { 0.0 } else { k as f64 / of as f64 };
    CohortSummary {
        samples: n,
        pd_fraction: frac(pd, n),
        male_fraction: frac(male, n),
        age: summarize(&ages),
        observations_per_id: summarize(&lens),
        missing_rate: frac(slots - present, slots),
        tests_per_id: tests.each_ref().map(|t| summarize(t)),
    }
}

impl fmt::Display for CohortSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |x: f64| 100.0 * x;
        writeln!(f, "{:<28}{}", "Samples (#)", self.samples)?;
        writeln!(
            f,
            "{:<28}{:.1}% & {:.1}%",
            "PD & non-PD",
            pct(self.pd_fraction),
            pct(1.0 - self.pd_fraction)
        )?;
        writeln!(
            f,
            "{:<28}{:.1}% & {:.1}%",
            "Male & female",
            pct(self.male_fraction),
            pct(1.0 - self.male_fraction)
        )?;
        writeln!(f, "{:<28}{:.2} ± {:.2}", "Age", self.age.mean, self.age.std)?;
        writeln!(
            f,
            "{:<28}{:.2} ± {:.2}",
            "Sequence length", self.observations_per_id.mean, self.observations_per_id.std
        )?;
        writeln!(f, "{:<28}{:.1}%", "Missing rate", pct(self.missing_rate))?;
        for (m, t) in Modality::ALL.iter().zip(&self.tests_per_id) {
            writeln!(
                f,
                "{:<28}{:.2} ± {:.2}",
                format!("{m} tests per ID"),
                t.mean,
                t.std
            )?;
        }
        Ok(())
    }
}

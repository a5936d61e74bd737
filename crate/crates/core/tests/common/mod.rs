#![allow(dead_code)]

use odernn::signal::{CleanSegment, Modality};
use odernn::sync::{
    MedicationPoint, ModalObservation, ObservationPoint, ObservationSequence, UnifiedId,
};
use odernn_autodiff::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), uniform(rng, n, scale)).unwrap()
}

/// Plain matrix-vector product on row-major data.
pub fn matvec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    assert_eq!(m.len(), rows * cols);
    assert_eq!(v.len(), cols);
    (0..rows)
        .map(|i| (0..cols).map(|j| m[i * cols + j] * v[j]).sum())
        .collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn random_segment(rng: &mut ChaCha8Rng, modality: Modality, len: usize) -> CleanSegment {
    CleanSegment {
        modality,
        channels: (0..modality.channels())
            .map(|_| uniform(rng, len, 1.0))
            .collect(),
    }
}

/// A subject whose observations are present per `masks`, at the given day offsets.
pub fn subject(
    rng: &mut ChaCha8Rng,
    id: &str,
    label: bool,
    times: &[f64],
    masks: &[[bool; 3]],
    len: usize,
) -> ObservationSequence {
    let observations = times
        .iter()
        .zip(masks)
        .map(|(&t, mask)| {
            let mut p = ObservationPoint {
                time_days: t,
                walking: None,
                tapping: None,
                memory: None,
            };
            for m in Modality::ALL {
                if mask[m.index()] {
                    *p.slot_mut(m) = Some(ModalObservation {
                        timestamp: 1.5e9 + t * 86_400.0,
                        segment: random_segment(rng, m, len),
                    });
                }
            }
            p
        })
        .collect();
    ObservationSequence {
        unified_id: UnifiedId {
            participant_id: id.into(),
            medication_point: MedicationPoint::NoMedication,
        },
        label,
        age: 60.0,
        observations,
    }
}

/// Operator 2-norm by power iteration on `MᵀM`.
pub fn spectral_norm(m: &[f64], rows: usize, cols: usize) -> f64 {
    let mut v = vec![1.0; cols];
    let mut sigma = 0.0;
    for _ in 0..500 {
        let mv = matvec(m, rows, cols, &v);
        let mut mtmv = vec![0.0; cols];
        for i in 0..rows {
            for j in 0..cols {
                mtmv[j] += m[i * cols + j] * mv[i];
            }
        }
        let norm = mtmv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = mtmv.iter().map(|x| x / norm).collect();
        sigma = norm.sqrt();
    }
    sigma
}

/// Minimum penalized SSE over every segmentation, by enumerating all
/// `2^(n-1)` split subsets. Returns `(cost, splits)`; keeps the first optimum
/// found in subset order.
pub fn enumerate_change_points(signal: &[f64], penalty: f64) -> (f64, Vec<usize>) {
    let n = signal.len();
    assert!((2..=20).contains(&n), "enumeration is exponential");
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 0u32..(1 << (n - 1)) {
        let splits: Vec<usize> = (1..n).filter(|i| mask & (1 << (i - 1)) != 0).collect();
        let c = direct_cost(signal, &splits, penalty);
        if c < best.0 - 1e-12 {
            best = (c, splits);
        }
    }
    best
}

/// Optimal penalized SSE by recursion over the first segment, memoized on the
/// start index, with segment costs summed directly.
pub fn first_segment_optimum(signal: &[f64], penalty: f64) -> f64 {
    let n = signal.len();
    let mut from = vec![0.0; n + 1];
    for start in (0..n).rev() {
        from[start] = (start + 1..=n)
            .map(|end| {
                let tail = if end == n { 0.0 } else { penalty + from[end] };
                sse(&signal[start..end]) + tail
            })
            .fold(f64::INFINITY, f64::min);
    }
    from[0]
}

fn sse(seg: &[f64]) -> f64 {
    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
    seg.iter().map(|x| (x - mean) * (x - mean)).sum()
}

pub fn direct_cost(signal: &[f64], splits: &[usize], penalty: f64) -> f64 {
    let mut bounds = vec![0];
    bounds.extend_from_slice(splits);
    bounds.push(signal.len());
    bounds
        .windows(2)
        .map(|w| sse(&signal[w[0]..w[1]]))
        .sum::<f64>()
        + penalty * splits.len() as f64
}

/// Random test signal of the given length: piecewise-constant levels plus noise,
/// so optima have a handful of splits.
pub fn piecewise_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut level = rng.random_range(-3.0..3.0);
    (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                level = rng.random_range(-3.0..3.0);
            }
            level + rng.random_range(-0.5..0.5)
        })
        .collect()
}

/// Magnitude response of the gravity-removal high-pass `x - lowpass(x)` with a
/// first-order exponential low-pass of smoothing factor `alpha`:
/// `H(z) = (1 - alpha)(1 - z⁻¹) / (1 - (1 - alpha) z⁻¹)`.
pub fn highpass_gain(alpha: f64, freq_hz: f64, sample_rate: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate;
    let a = 1.0 - alpha;
    let num = a * ((1.0 - w.cos()).powi(2) + w.sin().powi(2)).sqrt();
    let den = ((1.0 - a * w.cos()).powi(2) + (a * w.sin()).powi(2)).sqrt();
    num / den
}

/// Very small model so exhaustive finite differences stay cheap.
pub fn micro_config() -> odernn::model::ModelConfig {
    odernn::model::ModelConfig {
        hidden_size: 4,
        ode_width: 5,
        embed_dim: 3,
        tcn_channels: 3,
        tcn_layers: 2,
        kernel_size: 2,
        modal_attention_width: 3,
        temporal_attention_width: 3,
        ..Default::default()
    }
}

/// Two subjects with mixed presence masks and uneven visit gaps.
pub fn micro_dataset() -> Vec<ObservationSequence> {
    let mut r = rng(99);
    vec![
        subject(
            &mut r,
            "a",
            true,
            &[0.0, 1.5, 4.0],
            &[
                [true, false, true],
                [false, true, false],
                [true, true, true],
            ],
            10,
        ),
        subject(
            &mut r,
            "b",
            false,
            &[0.0, 0.7],
            &[[false, false, true], [true, true, false]],
            8,
        ),
    ]
}

/// Central-difference check of every parameter entry of `params` on the
/// summed loss over `inputs`. Returns the worst relative error per group,
/// where relative error is `|analytic - numeric| / max(1, |analytic|)`.
pub fn finite_difference_by_group(
    params: &odernn::model::ModelParams,
    inputs: &[odernn::model::SubjectInput],
    eps: f64,
) -> Vec<(String, f64)> {
    use odernn::model::{loss_and_grads, loss_value};
    let mut analytic: Vec<Tensor> = params
        .tensors()
        .iter()
        .map(|t| Tensor::zeros(t.shape()))
        .collect();
    for s in inputs {
        let (_, g) = loss_and_grads(params, s).unwrap();
        for (a, g) in analytic.iter_mut().zip(&g) {
            for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                *x += y;
            }
        }
    }
    let total = |p: &odernn::model::ModelParams| {
        inputs
            .iter()
            .map(|s| loss_value(p, s).unwrap())
            .sum::<f64>()
    };
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut probe = params.clone();
    for i in 0..params.tensors().len() {
        let group = params.group(i).to_string();
        let mut err: f64 = 0.0;
        for j in 0..params.tensors()[i].len() {
            let orig = probe.tensors()[i].data()[j];
            probe.tensors_mut()[i].data_mut()[j] = orig + eps;
            let up = total(&probe);
            probe.tensors_mut()[i].data_mut()[j] = orig - eps;
            let down = total(&probe);
            probe.tensors_mut()[i].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[i].data()[j];
            err = err.max((a - numeric).abs() / a.abs().max(1.0));
        }
        match worst.iter_mut().find(|(g, _)| *g == group) {
            Some(entry) => entry.1 = entry.1.max(err),
            None => worst.push((group, err)),
        }
    }
    worst
}

/// Linearly separable cohort: positives carry a strong oscillation in every
/// present segment, negatives are near-flat.
pub fn toy_separable(n: usize, seed: u64) -> Vec<ObservationSequence> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let label = i % 2 == 0;
            let steps = r.random_range(2..5);
            let mut t = 0.0;
            let times: Vec<f64> = (0..steps)
                .map(|_| {
                    let now = t;
                    t += r.random_range(1.2..6.0);
                    now
                })
                .collect();
            let masks: Vec<[bool; 3]> = (0..steps)
                .map(|_| loop {
                    let m = [r.random_bool(0.6), r.random_bool(0.6), r.random_bool(0.6)];
                    if m.iter().any(|&x| x) {
                        break m;
                    }
                })
                .collect();
            let mut seq = subject(&mut r, &format!("s{i}"), label, &times, &masks, 12);
            for obs in &mut seq.observations {
                for m in Modality::ALL {
                    if let Some(o) = obs.slot_mut(m).as_mut() {
                        for ch in &mut o.segment.channels {
                            for (k, v) in ch.iter_mut().enumerate() {
                                let wave = if label {
                                    2.0 * (k as f64 * 1.3).sin()
                                } else {
                                    0.0
                                };
                                *v = 0.1 * *v + wave;
                            }
                        }
                    }
                }
            }
            seq
        })
        .collect()
}

//! Gravity removal, change-point segmentation and active-segment selection on
//! a hand-built walking recording.

use std::f64::consts::PI;

use odernn::signal::{
    clean_accelerometer, detect_change_points, remove_gravity, AccelSequence, Modality,
    SignalConfig,
};

fn main() -> odernn::Result<()> {
    let fs = 100.0;
    // 2 s standing, 5 s walking at 1.8 Hz, 2 s standing, device slightly tilted
    let samples: Vec<[f64; 3]> = (0..900)
        .map(|n| {
            let t = n as f64 / fs;
            let walking = (200..700).contains(&n);
            let step = if walking {
                0.3 * (2.0 * PI * 1.8 * t).sin()
            } else {
                0.0
            };
            [0.1 + step * 0.5, 0.05, 0.99 + step]
        })
        .collect();
    let seq = AccelSequence::new(fs, samples)?;

    let cfg = SignalConfig::default();
    let filtered = remove_gravity(&seq, cfg.cutoff_hz)?;
    let mean_in: f64 = seq.magnitude().iter().sum::<f64>() / seq.len() as f64;
    let mean_out: f64 = filtered.magnitude().iter().sum::<f64>() / filtered.len() as f64;
    println!("mean |a| before {mean_in:.3} G, after gravity removal {mean_out:.3} G");

    let splits = detect_change_points(&filtered.magnitude(), cfg.penalty)?;
    println!("change points: {splits:?}");

    match clean_accelerometer(Modality::Walking, &seq, &cfg)? {
        Some(seg) => println!("kept an active segment of {} samples", seg.len()),
        None => println!("no active segment"),
    }
    Ok(())
}

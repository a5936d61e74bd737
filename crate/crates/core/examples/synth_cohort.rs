//! Generates a synthetic cohort and prints its summary table.
//!
//! ```text
//! cargo run --release --example synth_cohort -- 300 7
//! ```

use odernn::synth::{generate_cohort, summarize_cohort, SynthConfig};

fn main() -> odernn::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_subjects = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);

    // short recordings keep this quick; the table only counts tests
    let cfg = SynthConfig {
        n_subjects,
        seed,
        max_samples: 300,
        ..SynthConfig::default()
    };
    let cohort = generate_cohort(&cfg)?;
    println!(
        "{} raw records for {} subjects\n",
        cohort.records.len(),
        cohort.metadata.len()
    );
    print!(
        "{}",
        summarize_cohort(&cohort.records, &cohort.metadata, 24.0)
    );
    Ok(())
}

// Period-over-period top-5 Jaccard for synthetic data at several drift
// rates.

use std::error::Error;

use interest_refresh::ingest::extract_batch_triples;
use interest_refresh::stats::{count_transitions, drift_report};
use interest_refresh::synth::{generate_dataset, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    println!("delta  mean   variance");
    for drift in [0.0, 0.25, 0.5, 1.0] {
        let cfg = SynthConfig {
            clusters: 12,
            drift,
            users: 3000,
            events_per_user: 30,
            days: 5,
            seed: 11,
            ..SynthConfig::default()
        };
        let ds = generate_dataset(&cfg)?;
        let windows = ds
            .batches
            .iter()
            .map(|b| Ok(count_transitions(&extract_batch_triples(b, &ds.vocab, 2)?, b.source_day)))
            .collect::<Result<Vec<_>, Box<dyn Error>>>()?;
        let report = drift_report(&windows, 5)?;
        println!(
            "{drift:<5}  {:.3}  {:.4}",
            report.mean.unwrap_or(f64::NAN),
            report.variance.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

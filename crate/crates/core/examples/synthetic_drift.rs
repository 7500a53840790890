// A drifting ground-truth model: oracle hit rate per day and how fast the
// day-0 top-k successor sets stop matching later days.

use std::error::Error;

use interest_refresh::eval::topk_identity_rate;
use interest_refresh::ingest::extract_batch_triples;
use interest_refresh::stats::count_transitions;
use interest_refresh::synth::{generate_dataset, oracle_table, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = SynthConfig {
        clusters: 15,
        users: 5000,
        events_per_user: 30,
        days: 8,
        ..SynthConfig::default()
    };
    let ds = generate_dataset(&cfg)?;
    for (d, truth) in ds.truth_file(&cfg).periods.iter().enumerate() {
        let day0 = oracle_table(&ds.truth[0]);
        let today = oracle_table(&ds.truth[d]);
        let kept = day0.entries.iter().filter(|(p, c)| today.entries.get(*p) == Some(*c)).count();
        println!(
            "day {d}: oracle hit rate {:.3}, day-0 argmax still best for {kept}/{} pairs",
            truth.oracle_hit_rate,
            day0.entries.len()
        );
    }

    let windows = ds
        .batches
        .iter()
        .map(|b| Ok(count_transitions(&extract_batch_triples(b, &ds.vocab, 2)?, b.source_day)))
        .collect::<Result<Vec<_>, Box<dyn Error>>>()?;
    for k in [1, 3, 5] {
        let rates: Vec<String> = topk_identity_rate(&windows[0], &windows[1..], k)
            .iter()
            .map(|p| format!("{:.2}", p.rate.unwrap_or(0.0)))
            .collect();
        println!("top-{k} identity vs day 0: {}", rates.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

// Daily hit rate of a table refreshed every 2 days against a frozen one,
// under drift, in both strict and windowed modes.

use std::error::Error;

use interest_refresh::eval::{hit_rate_trajectory, EvalMode};
use interest_refresh::ingest::build_sequences;
use interest_refresh::pipeline::{run_schedule, Provenance, ScheduleConfig};
use interest_refresh::serve::Fallback;
use interest_refresh::synth::{generate_dataset, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let ds = generate_dataset(&SynthConfig {
        clusters: 20,
        drift: 0.3,
        users: 3000,
        days: 12,
        ..SynthConfig::default()
    })?;
    let cfg = ScheduleConfig {
        rag_period_days: 2,
        ..ScheduleConfig::default()
    };
    let refreshed = run_schedule(&ds.batches, &cfg, &ds.vocab)?.versions;
    let frozen: Vec<_> = refreshed
        .iter()
        .filter(|t| t.provenance == Provenance::Finetune)
        .cloned()
        .collect();
    let days = ds
        .batches
        .iter()
        .map(|b| Ok((b.source_day, build_sequences(b, &ds.vocab)?)))
        .collect::<Result<Vec<_>, Box<dyn Error>>>()?;
    let variants = vec![("refreshed".to_string(), refreshed), ("frozen".to_string(), frozen)];

    for mode in [EvalMode::StrictNext, EvalMode::WindowN(3)] {
        let report = hit_rate_trajectory(&variants, &days, mode, &Fallback::None);
        println!(
            "{mode:?}: refreshed {:.4}, frozen {:.4}",
            report.mean_hit_rate("refreshed").unwrap_or(0.0),
            report.mean_hit_rate("frozen").unwrap_or(0.0)
        );
        if mode == EvalMode::StrictNext {
            print!("{}", report.to_csv());
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

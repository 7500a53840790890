// Fine-tune every 10 days, RAG refresh every 2, over 20 synthetic days.
// Table files and the refresh log land in a temporary directory.

use std::error::Error;

use interest_refresh::commands::write_schedule_output;
use interest_refresh::pipeline::{run_schedule, RefreshOutcome, ScheduleConfig};
use interest_refresh::synth::{generate_dataset, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let ds = generate_dataset(&SynthConfig {
        clusters: 20,
        users: 1500,
        days: 20,
        ..SynthConfig::default()
    })?;
    let cfg = ScheduleConfig {
        finetune_period_days: 10,
        rag_period_days: 2,
        ..ScheduleConfig::default()
    };
    let run = run_schedule(&ds.batches, &cfg, &ds.vocab)?;
    for e in &run.events {
        let what = match &e.outcome {
            RefreshOutcome::Published { version_id } => format!("published v{version_id}"),
            RefreshOutcome::Halted { violations } => format!("halted {violations:?}"),
            RefreshOutcome::Skipped { reason } => format!("skipped: {reason}"),
        };
        let recall = e.gate_report.map_or(f64::NAN, |r| r.test_recall);
        println!("day {:>2} {:?}: {what} (recall {recall:.3})", e.day, e.provenance);
    }

    let dir = std::env::temp_dir().join(format!("interest-refresh-schedule-{}", std::process::id()));
    write_schedule_output(&dir, &run)?;
    println!("{} files in {}", std::fs::read_dir(&dir)?.count(), dir.display());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

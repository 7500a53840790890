// One bulk-inference build with quality gates, then the same build with a
// backend that garbles 15% of its outputs.

use std::error::Error;
use std::sync::Arc;

use interest_refresh::generation::{BackendSpec, SnapshotBackend};
use interest_refresh::ingest::extract_batch_triples;
use interest_refresh::pipeline::{apply_quality_gates, build_table, enumerate_pairs, BuildInputs, ScheduleConfig};
use interest_refresh::stats::count_transitions;
use interest_refresh::synth::{generate_dataset, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let ds = generate_dataset(&SynthConfig {
        clusters: 20,
        users: 3000,
        days: 3,
        ..SynthConfig::default()
    })?;
    let day = |d: usize| -> Result<_, Box<dyn Error>> { Ok(extract_batch_triples(&ds.batches[d], &ds.vocab, 2)?) };
    let snapshot_window = count_transitions(&day(0)?, 0);
    let recent = count_transitions(&day(1)?, 1);
    let test = day(2)?;
    let snapshot = Arc::new(SnapshotBackend::fit(&snapshot_window, &ds.vocab)?);
    let pairs = enumerate_pairs(&recent, 1);

    for (label, backend, use_rag) in [
        ("snapshot, no rag", BackendSpec::Snapshot, false),
        ("context-following rag", BackendSpec::ContextFollowing { p: 1.0 }, true),
        (
            "corrupted rag",
            BackendSpec::Corrupting {
                q: 0.15,
                inner: Box::new(BackendSpec::ContextFollowing { p: 1.0 }),
            },
            true,
        ),
    ] {
        let cfg = ScheduleConfig {
            backend,
            ..ScheduleConfig::default()
        };
        let generator = cfg.backend.build(snapshot.clone(), &ds.vocab)?;
        let inputs = BuildInputs {
            pairs: &pairs,
            recent: &recent,
            previous: None,
            use_rag,
            test_triples: &test,
            version_id: 1,
            created_day: 1,
        };
        let build = build_table(generator.as_ref(), &inputs, &cfg, &ds.vocab)?;
        let decision = apply_quality_gates(&build.report, &cfg.gates);
        println!(
            "{label:<24} exact match {:.3}  recall {:.3}  entries {:>3}  {:?}",
            build.report.exact_match_rate,
            build.report.test_recall,
            build.table.entries.len(),
            decision
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

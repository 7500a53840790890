// Readers keep answering while a writer publishes new versions.

use std::error::Error;
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;

use interest_refresh::cluster::PairKey;
use interest_refresh::pipeline::{Provenance, QualityGateReport, TableVersion};
use interest_refresh::serve::{Fallback, PublishError, TableStore};
use interest_refresh::synth::synthetic_vocabulary;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let ids = synthetic_vocabulary(4).sorted_ids();
    let pair = PairKey::new(ids[0].clone(), ids[1].clone())?;
    let version = |v: u64| TableVersion {
        version_id: v,
        created_day: v as u32,
        entries: [(pair.clone(), ids[2 + (v as usize % 2)].clone())].into_iter().collect(),
        provenance: Provenance::Rag,
        template_version: "demo".into(),
        gate_report: QualityGateReport::default(),
    };

    let store = TableStore::new(Fallback::GlobalTop(ids[3].clone()));
    println!("before publish: {:?}", store.lookup(&pair));
    store.publish(version(1))?;

    let stop = AtomicBool::new(false);
    let seen = thread::scope(|s| {
        let reader = s.spawn(|| {
            let mut seen = Vec::new();
            while !stop.load(Ordering::Relaxed) {
                let r = store.lookup(&pair);
                if seen.last() != Some(&r.version_id) {
                    seen.push(r.version_id);
                }
            }
            seen
        });
        for v in 2..=20 {
            store.publish(version(v)).unwrap();
            thread::sleep(std::time::Duration::from_millis(1));
        }
        stop.store(true, Ordering::Relaxed);
        reader.join().unwrap()
    });
    println!("reader saw versions {seen:?}");
    println!("history {:?}", store.history());

    match store.publish(version(5)) {
        Err(PublishError::NonIncreasing { current, offered }) => {
            println!("rejected v{offered}: current is v{current}")
        }
        other => println!("unexpected: {other:?}"),
    }
    let unknown = PairKey::new(ids[1].clone(), ids[0].clone())?;
    println!("unknown pair: {:?}", store.lookup(&unknown));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

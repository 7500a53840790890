// Events to triples to windowed counts.
//
// ```bash
// cargo run --example ingest_and_count
// ```

use std::error::Error;

use interest_refresh::cluster::{Cluster, ClusterId, ClusterVocabulary, InteractionEvent, PairKey};
use interest_refresh::ingest::{build_sequences, extract_batch_triples, EventBatch};
use interest_refresh::stats::{count_transitions, ranked_successors};

fn vocab() -> Result<ClusterVocabulary, Box<dyn Error>> {
    let rows = [
        ("c1", "Home Cooking", &["recipes", "kitchen"][..]),
        ("c2", "Street Food", &["vendors", "snacks"][..]),
        ("c3", "Baking", &["bread", "pastry"][..]),
        ("c4", "Travel Vlogs", &["cities", "backpacking"][..]),
    ];
    let clusters = rows
        .iter()
        .map(|(id, desc, kws)| {
            Ok(Cluster::new(
                ClusterId::new(id)?,
                *desc,
                kws.iter().map(|k| k.to_string()).collect(),
            ))
        })
        .collect::<Result<Vec<_>, Box<dyn Error>>>()?;
    Ok(ClusterVocabulary::checked(clusters)?)
}

fn event(user: &str, ts: u64, cluster: &str, positive: bool) -> InteractionEvent {
    InteractionEvent {
        user_id: user.into(),
        timestamp: ts,
        cluster_id: ClusterId::new(cluster).unwrap(),
        positive,
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let vocab = vocab()?;
    let batch = EventBatch::new(
        vec![
            event("ana", 1, "c1", true),
            event("ana", 2, "c1", true),
            event("ana", 3, "c2", true),
            event("ana", 4, "c4", false),
            event("ana", 5, "c3", true),
            event("bo", 1, "c1", true),
            event("bo", 2, "c2", true),
            event("bo", 3, "c3", true),
            event("bo", 4, "c4", true),
            event("cy", 9, "c1", true),
            event("cy", 10, "c2", true),
            event("cy", 11, "c4", true),
        ],
        0,
    );

    for seq in build_sequences(&batch, &vocab)? {
        let ids: Vec<&str> = seq.clusters.iter().map(|c| c.as_str()).collect();
        println!("{:>4}: {}", seq.user_id, ids.join(" -> "));
    }

    let triples = extract_batch_triples(&batch, &vocab, 2)?;
    let window = count_transitions(&triples, 0);
    println!("{} triples over {} pairs", window.total(), window.pair_count());

    let pair = PairKey::new(ClusterId::new("c1")?, ClusterId::new("c2")?)?;
    for (next, n) in ranked_successors(&window, &pair) {
        println!("  {pair} -> {next}: {n}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

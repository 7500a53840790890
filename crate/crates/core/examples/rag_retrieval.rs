// Frequency and trend retrieval for one pair, and the global variant.

use std::error::Error;

use interest_refresh::cluster::{ClusterId, PairKey};
use interest_refresh::retrieval::{retrieve_global, retrieve_instance, RetrievalMode, RetrievalQuery};
use interest_refresh::stats::FrequencyWindow;

fn window(id: u32, pair: &PairKey, counts: &[(&str, u64)]) -> Result<FrequencyWindow, Box<dyn Error>> {
    let mut w = FrequencyWindow::new(id);
    for (c, n) in counts {
        w.add_count(pair, &ClusterId::new(c)?, *n);
    }
    Ok(w)
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let pair = PairKey::new(ClusterId::new("c1")?, ClusterId::new("c2")?)?;
    let previous = window(0, &pair, &[("c3", 9), ("c4", 1), ("c5", 2)])?;
    let recent = window(1, &pair, &[("c3", 10), ("c4", 8), ("c5", 2)])?;

    let by_count = retrieve_instance(&recent, None, &RetrievalQuery::frequency(pair.clone(), 1)?)?;
    println!("frequency n=1: {:?}", by_count.clusters());

    let q = RetrievalQuery::new(pair.clone(), RetrievalMode::Trend, 2)?;
    let rising = retrieve_instance(&recent, Some(&previous), &q)?;
    for item in &rising.items {
        println!("trend: {} (+{})", item.cluster, item.score);
    }

    match retrieve_instance(&recent, None, &q) {
        Err(e) => println!("trend without a baseline: {e}"),
        Ok(_) => unreachable!(),
    }

    for (t, n) in retrieve_global(&recent, 2) {
        println!("global: {} -> {} ({n})", t.pair, t.next);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

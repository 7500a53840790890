// The three prompt shapes and how raw outputs resolve back to clusters.

use std::error::Error;

use interest_refresh::cluster::{Cluster, ClusterId, ClusterVocabulary, PairKey};
use interest_refresh::generation::{
    render_finetune_example, render_inference_prompt, render_rag_prompt, resolve_prediction, TEMPLATE_VERSION,
};
use interest_refresh::retrieval::{retrieve_instance, RetrievalQuery};
use interest_refresh::stats::FrequencyWindow;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cluster = |id: &str, desc: &str, kws: &[&str]| -> Result<Cluster, Box<dyn Error>> {
        Ok(Cluster::new(ClusterId::new(id)?, desc, kws.iter().map(|k| k.to_string()).collect()))
    };
    let vocab = ClusterVocabulary::checked(vec![
        cluster("c1", "Home Cooking", &["recipes", "kitchen"])?,
        cluster("c2", "Street Food", &["vendors", "snacks"])?,
        cluster("c3", "Baking", &["bread", "pastry"])?,
    ])?;
    let pair = PairKey::new(ClusterId::new("c1")?, ClusterId::new("c2")?)?;
    let c3 = ClusterId::new("c3")?;

    println!("template {TEMPLATE_VERSION}\n");
    let train = render_finetune_example(&pair, &c3, &vocab)?;
    println!("--- fine-tune example (label {:?})\n{}", train.label, train.text);
    println!("--- inference\n{}", render_inference_prompt(&pair, &vocab)?.text);

    let mut recent = FrequencyWindow::new(1);
    recent.add_count(&pair, &c3, 4);
    let ctx = retrieve_instance(&recent, None, &RetrievalQuery::frequency(pair.clone(), 1)?)?;
    println!("--- rag\n{}", render_rag_prompt(&pair, &ctx, &vocab)?.text);

    for raw in ["  baking ", "Baking!", "Sourdough"] {
        println!("{raw:?} resolves to {:?}", resolve_prediction(raw, &vocab));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}

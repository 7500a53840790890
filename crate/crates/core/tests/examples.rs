#[allow(dead_code)]
mod ingest_and_count {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ingest_and_count.rs"));
}

#[allow(dead_code)]
mod drift_report {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/drift_report.rs"));
}

#[allow(dead_code)]
mod rag_retrieval {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/rag_retrieval.rs"));
}

#[allow(dead_code)]
mod prompt_rendering {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/prompt_rendering.rs"));
}

#[allow(dead_code)]
mod build_table {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/build_table.rs"));
}

#[allow(dead_code)]
mod hybrid_schedule {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/hybrid_schedule.rs"));
}

#[allow(dead_code)]
mod hot_swap_serving {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/hot_swap_serving.rs"));
}

#[allow(dead_code)]
mod offline_eval {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/offline_eval.rs"));
}

#[allow(dead_code)]
mod synthetic_drift {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/synthetic_drift.rs"));
}


#[test]
fn ingest_and_count_example_runs() {
    ingest_and_count::run_example().expect("ingest_and_count example should run");
}

#[test]
fn drift_report_example_runs() {
    drift_report::run_example().expect("drift_report example should run");
}

#[test]
fn rag_retrieval_example_runs() {
    rag_retrieval::run_example().expect("rag_retrieval example should run");
}

#[test]
fn prompt_rendering_example_runs() {
    prompt_rendering::run_example().expect("prompt_rendering example should run");
}

#[test]
fn build_table_example_runs() {
    build_table::run_example().expect("build_table example should run");
}

#[test]
fn hybrid_schedule_example_runs() {
    hybrid_schedule::run_example().expect("hybrid_schedule example should run");
}

#[test]
fn hot_swap_serving_example_runs() {
    hot_swap_serving::run_example().expect("hot_swap_serving example should run");
}

#[test]
fn offline_eval_example_runs() {
    offline_eval::run_example().expect("offline_eval example should run");
}

#[test]
fn synthetic_drift_example_runs() {
    synthetic_drift::run_example().expect("synthetic_drift example should run");
}

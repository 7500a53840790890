use std::fs;
use std::io::{BufReader, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use clap::Parser;
use interest_refresh::commands::{run, Cli, REFRESH_LOG, SYNTH_TRUTH, SYNTH_VOCAB};
use interest_refresh::io;
use interest_refresh::synth::TruthFile;

fn cli(args: &[&str]) -> anyhow::Result<String> {
    let parsed = Cli::try_parse_from(std::iter::once("interest-refresh").chain(args.iter().copied()))?;
    let mut out = Vec::new();
    run(parsed, &mut BufReader::new(&b""[..]), &mut out)?;
    Ok(String::from_utf8(out)?)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_into(dir: &Path, days: &str) {
    cli(&[
        "synth", "--clusters", "8", "--users", "300", "--events", "12", "--days", days, "--seed", "3", "--out-dir",
        p(dir),
    ])
    .unwrap();
}

#[test]
fn synth_writes_events_vocab_and_truth() {
    let tmp = tempfile::tempdir().unwrap();
    synth_into(tmp.path(), "4");
    let batches = io::read_events_dir(tmp.path()).unwrap();
    assert_eq!(batches.len(), 4);
    assert!(batches.iter().all(|b| b.events.len() == 300 * 12));
    assert_eq!(io::read_vocab(&tmp.path().join(SYNTH_VOCAB)).unwrap().len(), 8);
    let truth: TruthFile = io::read_json(&tmp.path().join(SYNTH_TRUTH)).unwrap();
    assert_eq!(truth.periods.len(), 4);
    assert_eq!(truth.periods[0].argmax.len(), 56);
}

#[test]
fn ingest_count_retrieve_build_serve_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_into(d, "2");
    let vocab = d.join(SYNTH_VOCAB);
    for day in ["0", "1"] {
        let out = cli(&[
            "ingest",
            "--events",
            p(&io::events_day_path(d, day.parse().unwrap())),
            "--vocab",
            p(&vocab),
            "--out",
            p(&d.join(format!("t{day}.jsonl"))),
            "--day",
            day,
        ])
        .unwrap();
        assert!(out.contains("3600 events"), "{out}");
        cli(&[
            "stats",
            "count",
            "--triples",
            p(&d.join(format!("t{day}.jsonl"))),
            "--window",
            day,
            "--out",
            p(&d.join(format!("c{day}.jsonl"))),
        ])
        .unwrap();
    }
    let counts0 = io::read_counts(&d.join("c0.jsonl")).unwrap();
    assert_eq!(counts0.window_id, 0);
    assert_eq!(counts0.total(), 300 * 10);

    cli(&["stats", "drift", "--counts", p(&d.join("c0.jsonl")), p(&d.join("c1.jsonl")), "--k", "5", "--out", p(&d.join("drift.json"))]).unwrap();
    let drift: serde_json::Value = io::read_json(&d.join("drift.json")).unwrap();
    assert_eq!(drift["k_top"], 5);
    assert!(drift["mean"].as_f64().unwrap() > 0.0);

    let pair = counts0.pairs().next().unwrap().clone();
    let pair_arg = format!("{},{}", pair.first, pair.second);
    let got: serde_json::Value =
        serde_json::from_str(&cli(&["retrieve", "--counts", p(&d.join("c0.jsonl")), "--pair", &pair_arg, "--n", "2"]).unwrap())
            .unwrap();
    assert!(!got["items"].as_array().unwrap().is_empty());
    assert!(cli(&["retrieve", "--counts", p(&d.join("c0.jsonl")), "--pair", &pair_arg, "--mode", "trend"]).is_err());

    let table = d.join("table.jsonl");
    let summary = cli(&[
        "build-table",
        "--counts",
        p(&d.join("c1.jsonl")),
        "--baseline",
        p(&d.join("c0.jsonl")),
        "--rag",
        "--vocab",
        p(&vocab),
        "--test",
        p(&d.join("t1.jsonl")),
        "--out",
        p(&table),
        "--trace",
        p(&d.join("trace.jsonl")),
    ])
    .unwrap();
    assert!(summary.contains("\"passed\": true"), "{summary}");
    let t = io::read_table(&table).unwrap();
    assert_eq!(t.version_id, 1);
    assert_eq!(t.created_day, 1);
    assert!(!t.entries.is_empty());

    // a corrupting backend that garbles everything must not write a table
    let halted = d.join("halted.jsonl");
    let err = cli(&[
        "build-table", "--counts", p(&d.join("c1.jsonl")), "--rag", "--backend", "corrupting", "--q", "1.0", "--vocab",
        p(&vocab), "--test", p(&d.join("t1.jsonl")), "--out", p(&halted),
    ])
    .unwrap_err();
    assert!(err.to_string().contains("halted"));
    assert!(!halted.exists());

    let overlap = cli(&["eval", "overlap", "--a", p(&d.join("trace.jsonl")), "--b", p(&d.join("trace.jsonl"))]).unwrap();
    assert!(overlap.contains("1.0"));

    let identity: serde_json::Value = serde_json::from_str(
        &cli(&["eval", "identity", "--base", p(&d.join("c0.jsonl")), "--later", p(&d.join("c1.jsonl")), "--k", "1,3"])
            .unwrap(),
    )
    .unwrap();
    assert_eq!(identity.as_array().unwrap().len(), 2);

    // the real binary, fed through stdin
    let mut child = Command::new(env!("CARGO_BIN_EXE_interest-refresh"))
        .args(["serve", "--table", p(&table)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let key = t.sorted_entries()[0].0.clone();
    let (first, second) = (key.first, key.second);
    writeln!(child.stdin.take().unwrap(), "{first},{second}\nnot a pair\n{second},{first}").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["source"], "entry");
    assert_eq!(lines[0]["version_id"], 1);
    assert!(lines[1]["error"].is_string());
}

#[test]
fn schedule_then_eval_hit_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_into(&d.join("data"), "6");
    fs::write(d.join("cfg.json"), r#"{"rag_period_days": 2, "seed": 5}"#).unwrap();
    let versions = d.join("refreshed");
    let log = cli(&[
        "schedule",
        "--events-dir",
        p(&d.join("data")),
        "--config",
        p(&d.join("cfg.json")),
        "--vocab",
        p(&d.join("data").join(SYNTH_VOCAB)),
        "--out-dir",
        p(&versions),
    ])
    .unwrap();
    assert_eq!(log.lines().count(), 3);
    let tables = io::read_tables_dir(&versions).unwrap();
    assert_eq!(tables.iter().map(|t| t.created_day).collect::<Vec<_>>(), vec![0, 2, 4]);
    assert!(versions.join(REFRESH_LOG).exists());

    let report = d.join("report.json");
    let out = cli(&[
        "eval",
        "hit-rate",
        "--tables",
        p(&versions),
        "--events-dir",
        p(&d.join("data")),
        "--vocab",
        p(&d.join("data").join(SYNTH_VOCAB)),
        "--mode",
        "window_n",
        "--horizon",
        "3",
        "--out",
        p(&report),
    ])
    .unwrap();
    assert!(out.starts_with("refreshed: mean hit rate"));
    let csv = fs::read_to_string(report.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("day,variant,hit_rate"));
    // days 1..=5 have a live table
    assert_eq!(csv.lines().count(), 6);
    let json: serde_json::Value = io::read_json(&report).unwrap();
    assert_eq!(json["mode"]["mode"], "window_n");
}

#[test]
fn schedule_rejects_bad_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    synth_into(&d.join("data"), "2");
    fs::write(d.join("cfg.json"), r#"{"rag_period_days": 0}"#).unwrap();
    let err = cli(&[
        "schedule", "--events-dir", p(&d.join("data")), "--config", p(&d.join("cfg.json")), "--vocab",
        p(&d.join("data").join(SYNTH_VOCAB)), "--out-dir", p(&d.join("out")),
    ])
    .unwrap_err();
    assert!(!err.to_string().is_empty());
    assert!(!d.join("out").exists());
}

#[test]
fn bad_pair_argument_is_a_parse_error() {
    assert!(Cli::try_parse_from(["interest-refresh", "retrieve", "--counts", "x", "--pair", "c1,c1"]).is_err());
    assert!(Cli::try_parse_from(["interest-refresh", "retrieve", "--counts", "x", "--pair", "c1"]).is_err());
}

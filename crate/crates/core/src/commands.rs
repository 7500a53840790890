//! Command-line surface. The binary only parses [`Cli`] and calls [`run`].

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cluster::{ClusterId, PairKey};
use crate::eval::{hit_rate_trajectory, output_overlap, topk_identity_rate, EvalMode};
use crate::generation::{BackendSpec, GenerationRecord, SnapshotBackend};
use crate::ingest::{build_sequences, extract_batch_triples, EventBatch};
use crate::io;
use crate::pipeline::{
    apply_quality_gates, build_table, enumerate_pairs, run_schedule, BuildInputs, GateDecision, ScheduleConfig,
};
use crate::retrieval::{retrieve_instance, Granularity, RetrievalMode, RetrievalQuery};
use crate::serve::{Fallback, TableStore};
use crate::stats::{count_transitions, drift_report};
use crate::synth::{generate_dataset, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "interest-refresh", version, about = "Build, refresh, serve and evaluate next-interest transition tables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn one day of interaction events into transition triples.
    Ingest(IngestArgs),
    /// Count triples and measure window-over-window drift.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Show the retrieval context for one pair.
    Retrieve(RetrieveArgs),
    /// Run one bulk-inference build and write the table if the gates pass.
    BuildTable(BuildTableArgs),
    /// Run the hybrid refresh schedule over a directory of daily events.
    Schedule(ScheduleArgs),
    /// Answer "first,second" lookups from stdin, one JSON result per line.
    Serve(ServeArgs),
    /// Offline evaluation of tables, traces and windows.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Generate drifting synthetic users with a known ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub day: u32,
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Count triples into a frequency window.
    Count {
        #[arg(long, num_args = 1.., required = true)]
        triples: Vec<PathBuf>,
        #[arg(long)]
        window: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Period-over-period top-k Jaccard across consecutive windows.
    Drift {
        #[arg(long, num_args = 2.., required = true)]
        counts: Vec<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Ignore pairs observed fewer times than this in a window.
        #[arg(long, default_value_t = 1)]
        min_support: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Frequency,
    Trend,
}

impl From<ModeArg> for RetrievalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Frequency => RetrievalMode::Frequency,
            ModeArg::Trend => RetrievalMode::Trend,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GranularityArg {
    Instance,
    Global,
}

fn parse_pair(s: &str) -> Result<PairKey, String> {
    let (a, b) = s.split_once(',').ok_or("expected first,second")?;
    let a = ClusterId::new(a).map_err(|e| e.to_string())?;
    let b = ClusterId::new(b).map_err(|e| e.to_string())?;
    PairKey::new(a, b).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    #[arg(long, value_parser = parse_pair)]
    pub pair: PairKey,
    #[arg(long, value_enum, default_value_t = ModeArg::Frequency)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Snapshot,
    ContextFollowing,
    Corrupting,
}

#[derive(Debug, Args)]
pub struct BuildTableArgs {
    #[arg(long)]
    pub counts: PathBuf,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Counts the snapshot backend is fitted on; defaults to `--counts`.
    #[arg(long)]
    pub snapshot_counts: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub pairs_min_support: u64,
    #[arg(long)]
    pub rag: bool,
    #[arg(long, value_enum, default_value_t = BackendArg::ContextFollowing)]
    pub backend: BackendArg,
    /// Context-following probability.
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    /// Corruption probability.
    #[arg(long, default_value_t = 0.0)]
    pub q: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Frequency)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = GranularityArg::Instance)]
    pub granularity: GranularityArg,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the generation trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub version: u64,
    /// Creation day; defaults to the window id of `--counts`.
    #[arg(long)]
    pub day: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub parallelism: usize,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub events_dir: PathBuf,
    /// JSON with any subset of the schedule settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Answer unknown pairs with this cluster instead of a miss.
    #[arg(long)]
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum EvalModeArg {
    StrictNext,
    WindowN,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Daily hit rate of one or more table histories.
    HitRate {
        /// One directory of table files per variant, labelled by its name.
        #[arg(long, num_args = 1.., required = true)]
        tables: Vec<PathBuf>,
        #[arg(long)]
        events_dir: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalModeArg::StrictNext)]
        mode: EvalModeArg,
        /// Look-ahead for `window_n`.
        #[arg(long, default_value_t = 2)]
        horizon: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fraction of pairs where two generation traces agree.
    Overlap {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Top-k identity of later windows against a base window.
    Identity {
        #[arg(long)]
        base: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        later: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
        k: Vec<usize>,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.4)]
    pub drift: f64,
    #[arg(long, default_value_t = 2000)]
    pub users: usize,
    #[arg(long, default_value_t = 20)]
    pub events: usize,
    #[arg(long, default_value_t = 30)]
    pub days: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Runs a parsed command. `input` feeds the serve loop.
pub fn run(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a, out),
        Command::Stats(StatsCommand::Count { triples, window, out: path }) => {
            let mut all = Vec::new();
            for p in &triples {
                all.extend(io::read_triples(p)?.into_iter().map(|(t, _)| t));
            }
            let w = count_transitions(&all, window);
            io::write_counts(&path, &w)?;
            writeln!(out, "window {window}: {} pairs, {} triples", w.pair_count(), w.total())?;
            Ok(())
        }
        Command::Stats(StatsCommand::Drift { counts, k, min_support, out: path }) => {
            let mut windows = Vec::with_capacity(counts.len());
            for p in &counts {
                let mut w = io::read_counts(p)?;
                w.retain_min_support(min_support);
                windows.push(w);
            }
            let report = drift_report(&windows, k)?;
            match path {
                Some(p) => io::write_json(&p, &report)?,
                None => print_json(out, &report)?,
            }
            Ok(())
        }
        Command::Retrieve(a) => {
            let recent = io::read_counts(&a.counts)?;
            let baseline = a.baseline.as_deref().map(io::read_counts).transpose()?;
            let q = RetrievalQuery::new(a.pair, a.mode.into(), a.n)?;
            print_json(out, &retrieve_instance(&recent, baseline.as_ref(), &q)?)
        }
        Command::BuildTable(a) => build_table_cmd(a, out),
        Command::Schedule(a) => schedule(a, out),
        Command::Serve(a) => {
            let table = io::read_table(&a.table)?;
            let fallback = match a.fallback {
                Some(c) => Fallback::GlobalTop(ClusterId::new(&c)?),
                None => Fallback::None,
            };
            let store = TableStore::with_table(table, fallback)?;
            serve_lines(&store, input, out)
        }
        Command::Eval(e) => eval(e, out),
        Command::Synth(a) => synth(a, out),
    }
}

fn ingest(a: IngestArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let vocab = io::read_vocab(&a.vocab)?;
    let batch = EventBatch::new(io::read_events(&a.events)?, a.day);
    let triples = extract_batch_triples(&batch, &vocab, a.workers)?;
    io::write_triples(&a.out, &triples, a.day)?;
    writeln!(out, "day {}: {} events, {} triples", a.day, batch.events.len(), triples.len())?;
    Ok(())
}

#[derive(Serialize)]
struct BuildSummary<'a> {
    passed: bool,
    decision: &'a GateDecision,
    report: crate::pipeline::QualityGateReport,
}

fn build_table_cmd(a: BuildTableArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let vocab = io::read_vocab(&a.vocab)?;
    let recent = io::read_counts(&a.counts)?;
    let baseline = a.baseline.as_deref().map(io::read_counts).transpose()?;
    let snapshot_window = match &a.snapshot_counts {
        Some(p) => io::read_counts(p)?,
        None => recent.clone(),
    };
    let test: Vec<_> = io::read_triples(&a.test)?.into_iter().map(|(t, _)| t).collect();

    let backend = match a.backend {
        BackendArg::Snapshot => BackendSpec::Snapshot,
        BackendArg::ContextFollowing => BackendSpec::ContextFollowing { p: a.p },
        BackendArg::Corrupting => BackendSpec::Corrupting {
            q: a.q,
            inner: Box::new(if a.rag {
                BackendSpec::ContextFollowing { p: a.p }
            } else {
                BackendSpec::Snapshot
            }),
        },
    };
    let mut cfg = ScheduleConfig {
        min_support: a.pairs_min_support,
        parallelism: a.parallelism,
        backend,
        seed: a.seed,
        ..ScheduleConfig::default()
    };
    cfg.retrieval.mode = a.mode.into();
    cfg.retrieval.n = a.n;
    cfg.retrieval.granularity = match a.granularity {
        GranularityArg::Instance => Granularity::Instance,
        GranularityArg::Global => Granularity::Global,
    };
    cfg.validate()?;

    let snapshot = std::sync::Arc::new(SnapshotBackend::fit(&snapshot_window, &vocab)?);
    let generator = cfg.backend.build(snapshot, &vocab)?;
    let pairs = enumerate_pairs(&recent, cfg.min_support);
    let inputs = BuildInputs {
        pairs: &pairs,
        recent: &recent,
        previous: baseline.as_ref(),
        use_rag: a.rag,
        test_triples: &test,
        version_id: a.version,
        created_day: a.day.unwrap_or(recent.window_id),
    };
    let build = build_table(generator.as_ref(), &inputs, &cfg, &vocab)?;
    if let Some(p) = &a.trace {
        io::write_jsonl(p, &build.trace)?;
    }
    let decision = apply_quality_gates(&build.report, &cfg.gates);
    print_json(
        out,
        &BuildSummary {
            passed: decision.passed(),
            decision: &decision,
            report: build.report,
        },
    )?;
    if let GateDecision::Halt(v) = &decision {
        bail!("quality gates halted the build: {v:?}");
    }
    io::write_table(&a.out, &build.table)?;
    Ok(())
}

/// File name of the refresh log written next to the table files.
pub const REFRESH_LOG: &str = "refresh_log.jsonl";

fn schedule(a: ScheduleArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let vocab = io::read_vocab(&a.vocab)?;
    let cfg: ScheduleConfig = match &a.config {
        Some(p) => io::read_json(p)?,
        None => ScheduleConfig::default(),
    };
    let days = io::read_events_dir(&a.events_dir)?;
    if days.is_empty() {
        bail!("no events_day_*.jsonl files in {}", a.events_dir.display());
    }
    let run = run_schedule(&days, &cfg, &vocab)?;
    write_schedule_output(&a.out_dir, &run)?;
    for e in &run.events {
        writeln!(out, "{}", serde_json::to_string(e)?)?;
    }
    Ok(())
}

/// Table files plus the refresh log.
pub fn write_schedule_output(dir: &Path, run: &crate::pipeline::ScheduleRun) -> anyhow::Result<()> {
    for t in &run.versions {
        io::write_table(&io::table_path(dir, t.version_id), t)?;
    }
    io::write_jsonl(&dir.join(REFRESH_LOG), &run.events)?;
    Ok(())
}

#[derive(Serialize)]
struct LineError {
    error: String,
}

/// One lookup per non-blank `first,second` line. Malformed lines get an
/// `{"error": ...}` object and the loop continues.
pub fn serve_lines(store: &TableStore, input: &mut dyn BufRead, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let json = match parse_pair(text) {
            Ok(pair) => serde_json::to_string(&store.lookup(&pair))?,
            Err(error) => serde_json::to_string(&LineError { error })?,
        };
        writeln!(out, "{json}")?;
        out.flush()?;
    }
}

fn eval(e: EvalCommand, out: &mut dyn Write) -> anyhow::Result<()> {
    match e {
        EvalCommand::HitRate {
            tables,
            events_dir,
            vocab,
            mode,
            horizon,
            out: path,
        } => {
            let vocab = io::read_vocab(&vocab)?;
            let mut variants = Vec::new();
            for dir in &tables {
                let label = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| dir.display().to_string());
                variants.push((label, io::read_tables_dir(dir)?));
            }
            let mut days = Vec::new();
            for batch in io::read_events_dir(&events_dir)? {
                days.push((batch.source_day, build_sequences(&batch, &vocab)?));
            }
            let mode = match mode {
                EvalModeArg::StrictNext => EvalMode::StrictNext,
                EvalModeArg::WindowN => EvalMode::WindowN(horizon),
            };
            let report = hit_rate_trajectory(&variants, &days, mode, &Fallback::None);
            io::write_json(&path, &report)?;
            io::write_text(&path.with_extension("csv"), &report.to_csv())?;
            for (label, _) in &variants {
                match report.mean_hit_rate(label) {
                    Some(r) => writeln!(out, "{label}: mean hit rate {r:.4}")?,
                    None => writeln!(out, "{label}: no evaluable days")?,
                }
            }
            Ok(())
        }
        EvalCommand::Overlap { a, b } => {
            let a: Vec<GenerationRecord> = io::read_jsonl(&a)?;
            let b: Vec<GenerationRecord> = io::read_jsonl(&b)?;
            let overlap = output_overlap(&a, &b)?;
            print_json(out, &serde_json::json!({ "overlap": overlap }))
        }
        EvalCommand::Identity { base, later, k } => {
            let base = io::read_counts(&base)?;
            let later = later
                .iter()
                .map(|p| io::read_counts(p))
                .collect::<Result<Vec<_>, _>>()?;
            let points: Vec<_> = k.iter().flat_map(|&k| topk_identity_rate(&base, &later, k)).collect();
            print_json(out, &points)
        }
    }
}

/// File names written by `synth` besides the daily events.
pub const SYNTH_VOCAB: &str = "vocab.jsonl";
pub const SYNTH_TRUTH: &str = "truth.json";

fn synth(a: SynthArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        clusters: a.clusters,
        alpha: a.alpha,
        drift: a.drift,
        users: a.users,
        events_per_user: a.events,
        days: a.days,
        seed: a.seed,
    };
    let ds = generate_dataset(&cfg).context("generating synthetic data")?;
    io::write_vocab(&a.out_dir.join(SYNTH_VOCAB), &ds.vocab)?;
    io::write_events_dir(&a.out_dir, &ds.batches)?;
    io::write_json(&a.out_dir.join(SYNTH_TRUTH), &ds.truth_file(&cfg))?;
    writeln!(
        out,
        "{} days x {} users written to {}",
        cfg.days,
        cfg.users,
        a.out_dir.display()
    )?;
    Ok(())
}

//! JSON and JSON-lines file formats.
//!
//! Every writer sorts its rows so that equal inputs give byte-identical
//! files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{Cluster, ClusterId, ClusterVocabulary, InteractionEvent, InvalidVocabulary, KeyError, PairKey, TransitionTriple};
use crate::ingest::EventBatch;
use crate::pipeline::{Provenance, QualityGateReport, TableVersion};
use crate::stats::FrequencyWindow;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {source}")]
    Key {
        path: PathBuf,
        line: usize,
        source: KeyError,
    },
    #[error("{path}: missing table header")]
    MissingHeader { path: PathBuf },
    #[error("{path}: {source}")]
    Vocabulary {
        path: PathBuf,
        source: InvalidVocabulary,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(io_err(path))?))
}

/// One value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| IoError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, rows: impl IntoIterator<Item = &'a T>) -> Result<(), IoError> {
    let mut w = create(path)?;
    for row in rows {
        let line = serde_json::to_string(row).expect("serializable row");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        line: source.line(),
        source,
    })
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).expect("serializable value");
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Reads and validates a vocabulary file.
pub fn read_vocab(path: &Path) -> Result<ClusterVocabulary, IoError> {
    let clusters: Vec<Cluster> = read_jsonl(path)?;
    ClusterVocabulary::checked(clusters).map_err(|source| IoError::Vocabulary {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_vocab(path: &Path, vocab: &ClusterVocabulary) -> Result<(), IoError> {
    write_jsonl(path, vocab.clusters())
}

pub fn read_events(path: &Path) -> Result<Vec<InteractionEvent>, IoError> {
    read_jsonl(path)
}

pub fn write_events(path: &Path, events: &[InteractionEvent]) -> Result<(), IoError> {
    write_jsonl(path, events)
}

pub fn events_day_path(dir: &Path, day: u32) -> PathBuf {
    dir.join(format!("events_day_{day}.jsonl"))
}

fn day_of(path: &Path) -> Option<u32> {
    path.file_name()?
        .to_str()?
        .strip_prefix("events_day_")?
        .strip_suffix(".jsonl")?
        .parse()
        .ok()
}

/// Loads `events_day_{n}.jsonl` files as batches for days `0..=max n`.
/// Days without a file become empty batches.
pub fn read_events_dir(dir: &Path) -> Result<Vec<EventBatch>, IoError> {
    let mut by_day = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if let Some(day) = day_of(&path) {
            by_day.insert(day, read_events(&path)?);
        }
    }
    let Some(&last) = by_day.keys().next_back() else {
        return Ok(Vec::new());
    };
    Ok((0..=last)
        .map(|d| EventBatch::new(by_day.remove(&d).unwrap_or_default(), d))
        .collect())
}

pub fn write_events_dir(dir: &Path, batches: &[EventBatch]) -> Result<(), IoError> {
    for b in batches {
        write_events(&events_day_path(dir, b.source_day), &b.events)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub first: ClusterId,
    pub second: ClusterId,
    pub next: ClusterId,
    pub day: u32,
}

/// Triples in extraction order.
pub fn write_triples(path: &Path, triples: &[TransitionTriple], day: u32) -> Result<(), IoError> {
    let rows: Vec<TripleRecord> = triples
        .iter()
        .map(|t| TripleRecord {
            first: t.pair.first.clone(),
            second: t.pair.second.clone(),
            next: t.next.clone(),
            day,
        })
        .collect();
    write_jsonl(path, &rows)
}

pub fn read_triples(path: &Path) -> Result<Vec<(TransitionTriple, u32)>, IoError> {
    let rows: Vec<TripleRecord> = read_jsonl(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            TransitionTriple::from_ids(r.first, r.second, r.next)
                .map(|t| (t, r.day))
                .map_err(|source| IoError::Key {
                    path: path.to_path_buf(),
                    line: i + 1,
                    source,
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub window_id: u32,
    pub first: ClusterId,
    pub second: ClusterId,
    pub next: ClusterId,
    pub count: u64,
}

pub fn write_counts(path: &Path, w: &FrequencyWindow) -> Result<(), IoError> {
    let rows: Vec<CountRecord> = w
        .entries()
        .map(|(p, c, n)| CountRecord {
            window_id: w.window_id,
            first: p.first.clone(),
            second: p.second.clone(),
            next: c.clone(),
            count: n,
        })
        .collect();
    write_jsonl(path, &rows)
}

/// All windows in a counts file, ascending by window id.
pub fn read_count_windows(path: &Path) -> Result<Vec<FrequencyWindow>, IoError> {
    let rows: Vec<CountRecord> = read_jsonl(path)?;
    let mut windows: BTreeMap<u32, FrequencyWindow> = BTreeMap::new();
    for (i, r) in rows.into_iter().enumerate() {
        let triple = TransitionTriple::from_ids(r.first, r.second, r.next).map_err(|source| IoError::Key {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        windows
            .entry(r.window_id)
            .or_insert_with(|| FrequencyWindow::new(r.window_id))
            .add_count(&triple.pair, &triple.next, r.count);
    }
    Ok(windows.into_values().collect())
}

/// A counts file folded into one window. An empty file gives an empty
/// window with id 0.
pub fn read_counts(path: &Path) -> Result<FrequencyWindow, IoError> {
    let windows = read_count_windows(path)?;
    let id = windows.last().map_or(0, |w| w.window_id);
    Ok(FrequencyWindow::merged(id, &windows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableHeader {
    pub version_id: u64,
    pub created_day: u32,
    pub provenance: Provenance,
    pub template_version: String,
    pub gate_report: QualityGateReport,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub first: ClusterId,
    pub second: ClusterId,
    pub next: ClusterId,
}

/// Header line followed by one entry line per pair, pairs ascending.
pub fn table_to_string(t: &TableVersion) -> String {
    let header = TableHeader {
        version_id: t.version_id,
        created_day: t.created_day,
        provenance: t.provenance,
        template_version: t.template_version.clone(),
        gate_report: t.gate_report,
    };
    let mut out = serde_json::to_string(&header).expect("serializable header");
    out.push('\n');
    for (p, c) in t.sorted_entries() {
        let row = TableEntry {
            first: p.first.clone(),
            second: p.second.clone(),
            next: c.clone(),
        };
        out.push_str(&serde_json::to_string(&row).expect("serializable entry"));
        out.push('\n');
    }
    out
}

pub fn write_table(path: &Path, t: &TableVersion) -> Result<(), IoError> {
    write_text(path, &table_to_string(t))
}

pub fn read_table(path: &Path) -> Result<TableVersion, IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let json_err = |line: usize| {
        move |source| IoError::Json {
            path: path.to_path_buf(),
            line,
            source,
        }
    };
    let mut header: Option<TableHeader> = None;
    let mut entries = std::collections::HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(json_err(i + 1))?);
            continue;
        }
        let e: TableEntry = serde_json::from_str(&line).map_err(json_err(i + 1))?;
        let pair = PairKey::new(e.first, e.second).map_err(|source| IoError::Key {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        entries.insert(pair, e.next);
    }
    let h = header.ok_or_else(|| IoError::MissingHeader {
        path: path.to_path_buf(),
    })?;
    Ok(TableVersion {
        version_id: h.version_id,
        created_day: h.created_day,
        entries,
        provenance: h.provenance,
        template_version: h.template_version,
        gate_report: h.gate_report,
    })
}

pub fn table_path(dir: &Path, version_id: u64) -> PathBuf {
    dir.join(format!("table_v{version_id:04}.jsonl"))
}

/// Every `table_v*.jsonl` in `dir`, ascending by version id.
pub fn read_tables_dir(dir: &Path) -> Result<Vec<TableVersion>, IoError> {
    let mut tables = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let is_table = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with("table_v") && n.ends_with(".jsonl"));
        if is_table {
            tables.push(read_table(&path)?);
        }
    }
    tables.sort_by_key(|t| t.version_id);
    Ok(tables)
}

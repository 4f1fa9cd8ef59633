//! Result files: per-episode CSV, per-step JSONL, summary tables, and a run
//! manifest. Column orders are fixed; see the README for the schemas.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::episode::EpisodeMetrics;

/// Wilson score interval at 95% for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let denom = 1.0 + z * z / n_f;
    let centre = (p + z * z / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z * z / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// One episode of one plant, labelled with the experiment arm it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub label: String,
    pub episode: usize,
    pub metrics: EpisodeMetrics,
}

#[derive(Serialize)]
struct CsvEpisode<'a> {
    label: &'a str,
    episode: usize,
    plant: usize,
    seed: u64,
    success: u8,
    avg_pdr: f64,
    avg_age: f64,
    cumulative_j: f64,
    cumulative_c: f64,
    offered: u64,
    delivered: u64,
}

pub const EPISODE_COLUMNS: [&str; 11] = [
    "label",
    "episode",
    "plant",
    "seed",
    "success",
    "avg_pdr",
    "avg_age",
    "cumulative_j",
    "cumulative_c",
    "offered",
    "delivered",
];

#[derive(Serialize)]
struct JsonStep<'a> {
    label: &'a str,
    episode: usize,
    plant: usize,
    t: usize,
    q: f64,
    tau: u32,
    age: usize,
    delivered: bool,
    latency: Option<u32>,
    distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config_sha256: String, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            config_sha256,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            files: vec![],
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serde {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes `rows` as CSV with the given header. An empty `rows` yields a
/// header-only file.
pub fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = create(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for r in rows {
        let line = serde_json::to_string(&r).map_err(|e| Error::Serde {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    writeln!(w, "{text}").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Paths written by [`emit_results`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmittedFiles {
    pub episodes_csv: PathBuf,
    pub steps_jsonl: PathBuf,
    pub manifest: PathBuf,
}

/// Writes `episodes.csv`, `steps.jsonl` and `manifest.json` under `dir`.
/// Extra files already written by the caller can be listed in
/// `manifest.files`.
pub fn emit_results(rows: &[EpisodeRow], dir: &Path, manifest: &RunManifest) -> Result<EmittedFiles> {
    let episodes_csv = dir.join("episodes.csv");
    let steps_jsonl = dir.join("steps.jsonl");
    let manifest_path = dir.join("manifest.json");
    let csv_rows: Vec<CsvEpisode<'_>> = rows
        .iter()
        .map(|r| CsvEpisode {
            label: &r.label,
            episode: r.episode,
            plant: r.metrics.plant,
            seed: r.metrics.seed,
            success: r.metrics.success as u8,
            avg_pdr: r.metrics.avg_pdr,
            avg_age: r.metrics.avg_age,
            cumulative_j: r.metrics.cumulative_j,
            cumulative_c: r.metrics.cumulative_c,
            offered: r.metrics.offered,
            delivered: r.metrics.delivered,
        })
        .collect();
    write_csv(&episodes_csv, &EPISODE_COLUMNS, &csv_rows)?;
    write_jsonl(
        &steps_jsonl,
        rows.iter().flat_map(|r| {
            r.metrics.steps.iter().map(move |s| JsonStep {
                label: &r.label,
                episode: r.episode,
                plant: r.metrics.plant,
                t: s.t,
                q: s.q,
                tau: s.tau,
                age: s.age,
                delivered: s.delivered,
                latency: s.latency,
                distance: s.distance,
            })
        }),
    )?;
    let mut m = manifest.clone();
    for f in ["episodes.csv", "steps.jsonl"] {
        if !m.files.iter().any(|x| x == f) {
            m.files.push(f.to_string());
        }
    }
    write_json(&manifest_path, &m)?;
    Ok(EmittedFiles {
        episodes_csv,
        steps_jsonl,
        manifest: manifest_path,
    })
}

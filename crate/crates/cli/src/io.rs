//! Artifact persistence: dataset JSONL, checkpoint JSON, history CSV, and
//! report JSON. Every writer goes through a temporary file in the target
//! directory followed by an atomic rename, so readers never observe a
//! partial artifact.

use anyhow::{bail, Context, Result};
use gtgan_core::graph::DirectedGraph;
use gtgan_core::model::{Checkpoint, ModelParams};
use gtgan_core::synth::{Dataset, DatasetKind, GraphPair, Split};
use gtgan_core::train::TrainHistory;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// One dataset pair as serialized on a JSONL line.
#[derive(Debug, Serialize, Deserialize)]
struct PairLine {
    id: String,
    n: usize,
    split: Split,
    x_edges: Vec<(usize, usize, f64)>,
    y_edges: Vec<(usize, usize, f64)>,
    meta: Map<String, Value>,
}

/// Writes bytes to a temporary file beside the target, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating directory {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes).context("writing temporary file")?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn edge_list(g: &DirectedGraph) -> Vec<(usize, usize, f64)> {
    g.edges().collect()
}

/// Serializes a dataset as JSON Lines, one pair per line, in order.
pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (idx, pair) in ds.pairs().enumerate() {
        let line = PairLine {
            id: format!("pair-{idx:05}"),
            n: pair.input.n(),
            split: ds.split_of(idx),
            x_edges: edge_list(&pair.input),
            y_edges: edge_list(&pair.target),
            meta: pair.meta.clone(),
        };
        out.push_str(&serde_json::to_string(&line)?);
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

fn infer_kind(meta: &Map<String, Value>) -> DatasetKind {
    if let Some(kind) = meta.get("kind") {
        if let Ok(kind) = serde_json::from_value::<DatasetKind>(kind.clone()) {
            return kind;
        }
    }
    if meta.contains_key("user") {
        DatasetKind::Auth
    } else if meta.contains_key("k") {
        DatasetKind::Poisson
    } else {
        DatasetKind::ScaleFree
    }
}

/// Reads a dataset back; the exact inverse of [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut pairs = Vec::new();
    let mut splits = Vec::new();
    let mut kind = None;
    let mut shared_n = None;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.with_context(|| format!("{}:{line_no}: read error", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PairLine = serde_json::from_str(&line)
            .with_context(|| format!("{}:{line_no}: malformed pair line", path.display()))?;
        match shared_n {
            None => shared_n = Some(parsed.n),
            Some(n) if n != parsed.n => {
                bail!("{}:{line_no}: node count {} differs from {}", path.display(), parsed.n, n)
            }
            _ => {}
        }
        let input = DirectedGraph::new(parsed.n, &parsed.x_edges)
            .with_context(|| format!("{}:{line_no}: invalid input graph", path.display()))?;
        let target = DirectedGraph::new(parsed.n, &parsed.y_edges)
            .with_context(|| format!("{}:{line_no}: invalid target graph", path.display()))?;
        kind.get_or_insert_with(|| infer_kind(&parsed.meta));
        pairs.push(
            GraphPair::new(input, target, parsed.meta)
                .with_context(|| format!("{}:{line_no}: inconsistent pair", path.display()))?,
        );
        splits.push(parsed.split);
    }
    Dataset::new(kind.unwrap_or(DatasetKind::ScaleFree), pairs, splits)
        .context("assembling dataset")
}

/// Writes a model checkpoint as pretty-printed JSON.
pub fn write_checkpoint(params: &ModelParams, rng_seed: u64, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&params.to_checkpoint(rng_seed))?;
    atomic_write(path, json.as_bytes())
}

/// Reads a checkpoint and rebuilds the model parameters.
pub fn read_checkpoint(path: &Path) -> Result<(ModelParams, Checkpoint)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let checkpoint: Checkpoint = serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing checkpoint {}", path.display()))?;
    let params = ModelParams::from_checkpoint(&checkpoint)
        .with_context(|| format!("restoring checkpoint {}", path.display()))?;
    Ok((params, checkpoint))
}

/// Writes the step,loss_d,loss_g,d_real_mean,d_fake_mean history CSV.
pub fn write_history(history: &TrainHistory, path: &Path) -> Result<()> {
    let mut out = String::from("step,loss_d,loss_g,d_real_mean,d_fake_mean\n");
    for r in &history.records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.step, r.loss_d, r.loss_g, r.d_real_mean, r.d_fake_mean
        ));
    }
    atomic_write(path, out.as_bytes())
}

/// Writes any serializable report as pretty-printed JSON.
pub fn write_report<T: Serialize>(report: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report)?;
    atomic_write(path, json.as_bytes())
}

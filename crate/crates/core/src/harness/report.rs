use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One statistic of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub series: String,
    pub size: usize,
    pub statistic: String,
    pub trial: u64,
    pub value: f64,
}

/// Mean and standard error over trials of one `(series, size, statistic)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub series: String,
    pub size: usize,
    pub statistic: String,
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// An output file, held in memory until the report is written.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub contents: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// The full input: an experiment spec, or the simulate parameters.
    pub spec: serde_json::Value,
    /// How every stream was derived, in words a re-implementation can follow.
    pub seeding: String,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateReport {
    pub manifest: Manifest,
    pub summary: Vec<SummaryRow>,
    pub raw: Vec<RawRecord>,
    /// Experiment-specific structured results (verdicts, fits).
    pub details: serde_json::Value,
    pub artifacts: Vec<Artifact>,
}

const SEEDING: &str = "fitness increments keyed by (master_seed, node, index) only; attachment stream \
ChaCha8 seeded from (master_seed, trial); model_b uses master_seed' = mix(master_seed, trial) unless \
b_seeding = shared; Monte Carlo chunks use ChaCha8 stream ids 0, 1, …";

impl AggregateReport {
    pub fn new(spec: serde_json::Value, warnings: Vec<String>, raw: Vec<RawRecord>, details: serde_json::Value, artifacts: Vec<Artifact>) -> Self {
        let mut names = vec!["manifest.json".to_string(), "summary.csv".into(), "raw.csv".into(), "details.json".into()];
        names.extend(artifacts.iter().map(|a| a.path.clone()));
        AggregateReport {
            manifest: Manifest {
                tool: "dynfit".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                spec,
                seeding: SEEDING.into(),
                warnings,
                artifacts: names,
            },
            summary: summarize(&raw),
            raw,
            details,
            artifacts,
        }
    }

    pub fn summary_row(&self, series: &str, size: usize, statistic: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.series == series && r.size == size && r.statistic == statistic)
    }

    pub fn summary_csv(&self) -> Result<Vec<u8>> {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(["series", "size", "statistic", "mean", "std_error", "n"])?;
        for r in &self.summary {
            out.write_record([
                r.series.clone(),
                r.size.to_string(),
                r.statistic.clone(),
                r.mean.to_string(),
                r.std_error.to_string(),
                r.n.to_string(),
            ])?;
        }
        into_bytes(out)
    }

    pub fn raw_csv(&self) -> Result<Vec<u8>> {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(["series", "size", "statistic", "trial", "value"])?;
        for r in &self.raw {
            out.write_record([r.series.clone(), r.size.to_string(), r.statistic.clone(), r.trial.to_string(), r.value.to_string()])?;
        }
        into_bytes(out)
    }

    /// Writes every artifact plus `manifest.json`, `summary.csv`, `raw.csv`
    /// and `details.json` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let mut files: Vec<(String, Vec<u8>)> = vec![
            ("manifest.json".into(), to_json(&self.manifest)?),
            ("summary.csv".into(), self.summary_csv()?),
            ("raw.csv".into(), self.raw_csv()?),
            ("details.json".into(), to_json(&self.details)?),
        ];
        files.extend(self.artifacts.iter().map(|a| (a.path.clone(), a.contents.clone())));
        for (rel, bytes) in files {
            write_file(&dir.join(rel), &bytes)?;
        }
        Ok(())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub(crate) fn into_bytes(out: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    out.into_inner().map_err(|e| Error::from(csv::Error::from(e.into_error())))
}

/// Groups by `(series, size, statistic)` in first-appearance order and
/// reduces over trials in the order given.
pub fn summarize(raw: &[RawRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, usize, String)> = Vec::new();
    let mut groups: BTreeMap<(String, usize, String), Vec<f64>> = BTreeMap::new();
    for r in raw {
        let key = (r.series.clone(), r.size, r.statistic.clone());
        let values = groups.entry(key.clone()).or_default();
        if values.is_empty() {
            order.push(key);
        }
        values.push(r.value);
    }
    order
        .into_iter()
        .map(|key| {
            let values = &groups[&key];
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let std_error = if n > 1 {
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            SummaryRow { series: key.0, size: key.1, statistic: key.2, mean, std_error, n }
        })
        .collect()
}

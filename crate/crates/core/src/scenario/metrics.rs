use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counters for one filtering step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    /// Lifted states in the posterior; absent for ground-only runs.
    pub n_lifted: Option<usize>,
    /// Ground states in the oracle posterior; absent when the oracle is off.
    pub n_ground: Option<usize>,
    pub n_splits: usize,
    pub n_amca: usize,
    /// Wall time of the step in milliseconds; 0 unless timing is enabled.
    pub ms: f64,
}

pub const CSV_COLUMNS: [&str; 6] = ["step", "n_lifted", "n_ground", "n_splits", "n_amca", "ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub fn write_csv<W: Write>(metrics: &[StepMetrics], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_json<W: Write>(metrics: &[StepMetrics], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, metrics).map_err(|source| Error::Json {
        context: "metrics".into(),
        source,
    })
}

/// Renders metrics in the requested format; the output ends with a newline.
pub fn render_metrics(metrics: &[StepMetrics], format: Format) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(metrics, &mut buf)?,
        Format::Json => {
            write_json(metrics, &mut buf)?;
            buf.push(b'\n');
        }
    }
    Ok(buf)
}

/// Writes metrics to `path`, or to stdout when `path` is `None`.
pub fn emit_metrics(metrics: &[StepMetrics], format: Format, path: Option<&Path>) -> Result<()> {
    let bytes = render_metrics(metrics, format)?;
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout().lock().write_all(&bytes).map_err(|source| Error::Io {
            path: "<stdout>".into(),
            source,
        }),
    }
}

pub fn read_csv(text: &str) -> Result<Vec<StepMetrics>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|m| m.map_err(Error::from)).collect()
}

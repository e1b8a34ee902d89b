//! CSV outputs, iteration logs and run manifests.
//!
//! Every CSV starts with one JSON metadata line (scenario hash, seed, output
//! kind, manifest file name), followed by a regular header row and data.

use crate::evaluation::{HeatMapGrid, RuntimeRow, SquintStudy};
use crate::lc_phase::{LcMaterial, PhaseProfile};
use crate::secrecy::SecrecyReport;
use crate::Error;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One optimizer iteration, serialized as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart: Option<usize>,
    pub outer: usize,
    pub inner: usize,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lse_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_sr: Option<f64>,
    pub wall_ms: f64,
}

/// Metadata line at the top of every CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvMeta {
    pub kind: String,
    pub scenario_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

impl CsvMeta {
    pub fn new(kind: &str, scenario_hash: &str, seed: u64) -> Self {
        Self {
            kind: kind.into(),
            scenario_hash: scenario_hash.into(),
            seed,
            manifest: None,
            method: None,
            mode: None,
        }
    }
}

/// Provenance of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub method: Option<String>,
    pub scenario_hash: String,
    pub seed: u64,
    pub hyperparameters: crate::scenario::HyperParams,
    pub outputs: Vec<String>,
    /// Region boxes for downstream plotting, `[min, max]` per region.
    pub user_region: [[f64; 3]; 2],
    pub eve_region: [[f64; 3]; 2],
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Io(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, contents).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn csv_with_meta(meta: &CsvMeta, header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut out = serde_json::to_string(meta).expect("metadata serializes");
    out.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf8"));
    out
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Splits off the metadata line and parses the remaining CSV.
fn read_csv(text: &str) -> Result<(Option<CsvMeta>, Vec<String>, Vec<csv::StringRecord>), Error> {
    let (meta, body) = match text.split_once('\n') {
        Some((first, rest)) if first.trim_start().starts_with('{') => (
            Some(serde_json::from_str(first).map_err(|e| Error::Parse(format!("metadata line: {e}")))?),
            rest,
        ),
        _ => (None, text),
    };
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(|e| Error::Parse(e.to_string()))?;
    Ok((meta, header, rows))
}

/// Phase CSV: `element_index, omega_c_rad[, voltage_V]`.
pub fn phase_csv(meta: &CsvMeta, profile: &PhaseProfile, material: Option<&LcMaterial>) -> String {
    let mut header = vec!["element_index", "omega_c_rad"];
    if material.is_some() {
        header.push("voltage_V");
    }
    let rows = profile
        .omega_c
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let mut r = vec![i.to_string(), fmt(w)];
            if let Some(m) = material {
                r.push(fmt(m.voltage_for_phase(w)));
            }
            r
        })
        .collect();
    csv_with_meta(meta, &header, rows)
}

/// Reads the `omega_c_rad` column of a phase CSV, in element order.
pub fn read_phase_csv(text: &str) -> Result<Vec<f64>, Error> {
    let (_, header, rows) = read_csv(text)?;
    let col = header
        .iter()
        .position(|h| h == "omega_c_rad")
        .ok_or_else(|| Error::Parse("phase file lacks an omega_c_rad column".into()))?;
    let idx_col = header.iter().position(|h| h == "element_index");
    let mut pairs = Vec::with_capacity(rows.len());
    for (line, r) in rows.iter().enumerate() {
        let parse = |c: usize| -> Result<f64, Error> {
            r.get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse(format!("phase file row {}: bad value", line + 1)))
        };
        let idx = match idx_col {
            Some(c) => parse(c)? as usize,
            None => line,
        };
        pairs.push((idx, parse(col)?));
    }
    pairs.sort_by_key(|p| p.0);
    if pairs.iter().enumerate().any(|(i, p)| p.0 != i) {
        return Err(Error::Parse("phase file element indices are not 0..N-1".into()));
    }
    Ok(pairs.into_iter().map(|p| p.1).collect())
}

/// Report CSV: `freq_hz, sr_min_bits, worst_user_x/y/z, best_eve_x/y/z[, sr_p10_bits]`.
pub fn report_csv(meta: &CsvMeta, report: &SecrecyReport) -> String {
    let with_p10 = report.rows.iter().any(|r| r.sr_p10_bits.is_some());
    let mut header = vec![
        "freq_hz", "sr_min_bits", "worst_user_x", "worst_user_y", "worst_user_z", "best_eve_x", "best_eve_y", "best_eve_z",
    ];
    if with_p10 {
        header.push("sr_p10_bits");
    }
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![fmt(r.freq_hz), fmt(r.sr_min_bits)];
            v.extend(r.worst_user.iter().map(|&x| fmt(x)));
            v.extend(r.best_eve.iter().map(|&x| fmt(x)));
            if with_p10 {
                v.push(r.sr_p10_bits.map(fmt).unwrap_or_default());
            }
            v
        })
        .collect();
    csv_with_meta(meta, &header, rows)
}

/// Heat map CSV: `x, y, snr_db` with empty cells for zero SNR.
pub fn heatmap_csv(meta: &CsvMeta, grid: &HeatMapGrid) -> String {
    let mut rows = Vec::with_capacity(grid.xs.len() * grid.ys.len());
    for (i, &x) in grid.xs.iter().enumerate() {
        for (j, &y) in grid.ys.iter().enumerate() {
            let v = grid.snr_db[i * grid.ys.len() + j];
            rows.push(vec![fmt(x), fmt(y), v.map(fmt).unwrap_or_else(|| "null".into())]);
        }
    }
    csv_with_meta(meta, &["x", "y", "snr_db"], rows)
}

/// Squint CSV: `axis_value, norm_snr_db`.
pub fn squint_csv(meta: &CsvMeta, study: &SquintStudy) -> String {
    let rows = study.axis.iter().zip(&study.norm_snr_db).map(|(&a, &v)| vec![fmt(a), fmt(v)]).collect();
    csv_with_meta(meta, &["axis_value", "norm_snr_db"], rows)
}

/// Runtime CSV: `n, seconds`.
pub fn runtime_csv(meta: &CsvMeta, rows: &[RuntimeRow]) -> String {
    let rows = rows.iter().map(|r| vec![r.n.to_string(), fmt(r.seconds)]).collect();
    csv_with_meta(meta, &["n", "seconds"], rows)
}

/// Metadata line of a CSV produced by this crate.
pub fn read_meta(text: &str) -> Result<Option<CsvMeta>, Error> {
    Ok(read_csv(text)?.0)
}

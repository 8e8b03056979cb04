//! Deterministic output files. Every file opens with a header naming the format
//! version, the crate version, the configuration hash and the seed.

use imcf_core::analysis::CheckReport;
use imcf_core::flow::FlowRecord;
use imcf_core::geometry::GraphState;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: &str = "imcf-output/1";
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const TRACE_COLUMNS: [&str; 11] = [
    "t", "tau", "dt", "volume", "H_min", "H_max", "vtilde_max", "u_min", "u_max", "residual_g", "residual_Hinv",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub format: &'static str,
    pub artifact_version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub model: String,
}

impl Header {
    pub fn new(config_sha256: &str, seed: u64, model: &str) -> Self {
        Self {
            format: FORMAT_VERSION,
            artifact_version: ARTIFACT_VERSION,
            config_sha256: config_sha256.to_string(),
            seed,
            model: model.to_string(),
        }
    }

    fn comment_block(&self, kind: &str) -> String {
        format!(
            "# {} {kind}\n# artifact_version = {}\n# config_sha256 = {}\n# seed = {}\n# model = {}\n",
            self.format, self.artifact_version, self.config_sha256, self.seed, self.model
        )
    }
}

/// Shortest round-trip scientific notation; `NaN` for missing values.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct WriteError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), WriteError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| WriteError { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, bytes).map_err(|source| WriteError { path: path.to_path_buf(), source })
}

pub fn trace_csv(header: &Header, records: &[FlowRecord]) -> String {
    let mut s = header.comment_block("trace");
    s.push_str(&TRACE_COLUMNS.join(","));
    s.push('\n');
    for r in records {
        let row = [
            r.t, r.tau, r.dt, r.volume, r.h_min, r.h_max, r.vtilde_max, r.u_min, r.u_max, r.residual_g, r.residual_hinv,
        ];
        s.push_str(&row.iter().map(|&x| num(x)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

pub fn write_trace(dir: &Path, header: &Header, records: &[FlowRecord]) -> Result<PathBuf, WriteError> {
    let path = dir.join("trace.csv");
    write(&path, trace_csv(header, records).as_bytes())?;
    Ok(path)
}

/// Generic CSV table with the header block.
pub fn write_table(path: &Path, header: &Header, kind: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<(), WriteError> {
    let mut s = header.comment_block(kind);
    s.push_str(&columns.join(","));
    s.push('\n');
    for row in rows {
        s.push_str(&row.iter().map(|&x| num(x)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    write(path, s.as_bytes())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    #[serde(flatten)]
    header: &'a Header,
    model_sha256: String,
    t: f64,
    shape: &'a [usize],
    periods: &'a [f64],
    dtype: &'static str,
    order: &'static str,
    data: String,
}

fn model_hash(descriptor: &str) -> String {
    hex::encode(Sha256::digest(descriptor.as_bytes()))
}

/// Row-major little-endian `f64` values plus a JSON sidecar.
pub fn write_snapshot_bin(dir: &Path, index: usize, header: &Header, state: &GraphState) -> Result<(), WriteError> {
    let stem = format!("snapshot_{index:05}");
    let bytes: Vec<u8> = state.u.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    write(&dir.join(format!("{stem}.bin")), &bytes)?;
    let grid = state.grid();
    let sidecar = Sidecar {
        header,
        model_sha256: model_hash(&header.model),
        t: state.t,
        shape: grid.shape(),
        periods: grid.periods(),
        dtype: "f64-le",
        order: "row-major",
        data: format!("{stem}.bin"),
    };
    let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    json.push('\n');
    write(&dir.join(format!("{stem}.json")), json.as_bytes())
}

/// One row per grid point: coordinates then `u`.
pub fn write_snapshot_csv(dir: &Path, index: usize, header: &Header, state: &GraphState) -> Result<(), WriteError> {
    let grid = state.grid();
    let mut s = header.comment_block("snapshot");
    let _ = writeln!(s, "# t = {}", num(state.t));
    let _ = writeln!(s, "# model_sha256 = {}", model_hash(&header.model));
    let coords: Vec<String> = (1..=grid.dim()).map(|a| format!("x{a}")).collect();
    s.push_str(&coords.join(","));
    s.push_str(",u\n");
    for p in 0..grid.len() {
        for x in grid.point(p) {
            s.push_str(&num(x));
            s.push(',');
        }
        s.push_str(&num(state.u.get(p)));
        s.push('\n');
    }
    write(&dir.join(format!("snapshot_{index:05}.csv")), s.as_bytes())
}

/// Reads back a binary snapshot written by [`write_snapshot_bin`].
pub fn read_snapshot_bin(path: &Path) -> io::Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "length is not a multiple of 8"));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// JSON lines: the header object, then one report per line.
pub fn write_reports(path: &Path, header: &Header, reports: &[CheckReport]) -> Result<(), WriteError> {
    let mut s = serde_json::to_string(&serde_json::json!({ "header": header })).expect("header serializes");
    s.push('\n');
    for r in reports {
        s.push_str(&serde_json::to_string(r).expect("report serializes"));
        s.push('\n');
    }
    write(path, s.as_bytes())
}

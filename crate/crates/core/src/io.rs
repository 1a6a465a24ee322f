//! Configuration files, matrix export and the CSV/JSON artifacts written by
//! the command-line front end.
//!
//! Matrix files use the "CJM1" layout: 4 magic bytes, u32 rows, u32 cols, a
//! reserved u32 (zero), then row-major interleaved little-endian f64 pairs
//! (Re, Im). Every matrix file has a JSON sidecar at `<path>.json` holding
//! the grid, domain, z and norm.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::interference::Candidate;
use crate::jta::{Domain, JointAmplitude, SpectralMap, XiProfile};
use crate::metrics::MetricsReport;
use crate::model::{reference_config, validate_config, SourceConfig};

pub const CJM1_MAGIC: &[u8; 4] = b"CJM1";
pub const CJM1_HEADER_LEN: usize = 16;

/// Name accepted by the `defaults` key of a configuration file.
pub const TABLE1_DEFAULTS: &str = "table1";

/// Parse and validate a JSON configuration file.
///
/// With `"defaults": "table1"` the remaining keys are merged over the
/// reference configuration (objects recursively, everything else replaced).
/// Without it the file must be complete. Unknown keys are rejected either way.
pub fn parse_config(path: &Path) -> Result<SourceConfig> {
    let text = fs::read_to_string(path)?;
    let cfg = parse_config_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(cfg)
}

pub fn parse_config_str(text: &str) -> Result<SourceConfig> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| {
        Error::Config(format!(
            "syntax error at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| Error::Config("top level must be a JSON object".into()))?;
    let merged = match obj.remove("defaults") {
        None => doc,
        Some(Value::String(name)) if name == TABLE1_DEFAULTS => {
            let mut base = serde_json::to_value(reference_config())?;
            merge(&mut base, doc);
            base
        }
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown defaults {other}; the only preset is \"{TABLE1_DEFAULTS}\""
            )))
        }
    };
    let cfg: SourceConfig = serde_path_to_error::deserialize(merged)
        .map_err(|e| Error::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
    validate_config(&cfg).into_result()?;
    Ok(cfg)
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixFormat {
    Cjm1,
    Csv,
}

/// Metadata written next to every exported matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub format: MatrixFormat,
    pub rows: usize,
    pub cols: usize,
    pub domain: Domain,
    pub z: f64,
    pub norm_sq: f64,
    pub t0: f64,
    pub pump1_center: f64,
    pub grid: Grid,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write a matrix and its sidecar; returns both paths.
pub fn export_matrix(
    phi: &JointAmplitude,
    path: &Path,
    format: MatrixFormat,
) -> Result<[PathBuf; 2]> {
    match format {
        MatrixFormat::Cjm1 => write_cjm1(phi, path)?,
        MatrixFormat::Csv => write_matrix_csv(phi, path)?,
    }
    let n = phi.n();
    let side = MatrixSidecar {
        format,
        rows: n,
        cols: n,
        domain: phi.domain,
        z: phi.z,
        norm_sq: phi.norm_sq,
        t0: phi.t0,
        pump1_center: phi.pump1_center,
        grid: phi.grid.clone(),
    };
    let side_path = sidecar_path(path);
    write_json(&side, &side_path)?;
    Ok([path.to_path_buf(), side_path])
}

/// Read a matrix written by [`export_matrix`], format taken from the sidecar.
pub fn import_matrix(path: &Path) -> Result<JointAmplitude> {
    let side: MatrixSidecar =
        serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
    if side.rows != side.grid.len() || side.cols != side.grid.len() {
        return Err(Error::Format(format!(
            "sidecar declares {} x {} on a {} point grid",
            side.rows,
            side.cols,
            side.grid.len()
        )));
    }
    let (rows, cols, values) = match side.format {
        MatrixFormat::Cjm1 => read_cjm1(path)?,
        MatrixFormat::Csv => read_matrix_csv(path)?,
    };
    if (rows, cols) != (side.rows, side.cols) {
        return Err(Error::Format(format!(
            "matrix is {rows} x {cols} but the sidecar says {} x {}",
            side.rows, side.cols
        )));
    }
    let mut phi = JointAmplitude::new(values, side.domain, side.grid, side.z, side.t0)?;
    phi.norm_sq = side.norm_sq;
    phi.pump1_center = side.pump1_center;
    Ok(phi)
}

pub fn write_cjm1(phi: &JointAmplitude, path: &Path) -> Result<()> {
    let n =
        u32::try_from(phi.n()).map_err(|_| Error::Format("matrix too large for CJM1".into()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CJM1_MAGIC)?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for v in &phi.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Raw CJM1 contents: rows, cols and the row-major values.
pub fn read_cjm1(path: &Path) -> Result<(usize, usize, Vec<Complex64>)> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < CJM1_HEADER_LEN || &bytes[..4] != CJM1_MAGIC {
        return Err(Error::Format(format!(
            "{} is not a CJM1 file",
            path.display()
        )));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(4), word(8));
    if word(12) != 0 {
        return Err(Error::Format("reserved header word is not zero".into()));
    }
    let expected = CJM1_HEADER_LEN + rows * cols * 16;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{rows} x {cols} matrix needs {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    let values = bytes[CJM1_HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
        .collect();
    Ok((rows, cols, values))
}

/// Long-format CSV with header `row,col,re,im`.
pub fn write_matrix_csv(phi: &JointAmplitude, path: &Path) -> Result<()> {
    let n = phi.n();
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "row,col,re,im")?;
    for (k, v) in phi.values.iter().enumerate() {
        writeln!(w, "{},{},{},{}", k / n, k % n, num(v.re), num(v.im))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<(usize, usize, Vec<Complex64>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut entries = Vec::new();
    for rec in rdr.deserialize() {
        let (r, c, re, im): (usize, usize, f64, f64) = rec?;
        entries.push((r, c, Complex64::new(re, im)));
    }
    let rows = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let cols = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    if entries.len() != rows * cols {
        return Err(Error::Format(format!(
            "{} entries cannot fill {rows} x {cols}",
            entries.len()
        )));
    }
    let mut values = vec![Complex64::new(0.0, 0.0); rows * cols];
    let mut seen = vec![false; rows * cols];
    for (r, c, v) in entries {
        let k = r * cols + c;
        if seen[k] {
            return Err(Error::Format(format!("duplicate entry ({r}, {c})")));
        }
        seen[k] = true;
        values[k] = v;
    }
    Ok((rows, cols, values))
}

/// 17 significant digits, enough to round-trip any f64.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_metrics(report: &MetricsReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

/// Columns `z,z_over_l,xi`.
pub fn write_xi_profile(profile: &XiProfile, length: f64, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "z,z_over_l,xi")?;
    for (z, xi) in profile.z_nodes.iter().zip(&profile.xi) {
        writeln!(w, "{},{},{}", num(*z), num(z / length), num(*xi))?;
    }
    w.flush()?;
    Ok(())
}

/// Long format `z,w,intensity`, one row per (snapshot, Idler bin).
pub fn write_spectral_map(map: &SpectralMap, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "z,w,intensity")?;
    for (z, row) in map.z.iter().zip(&map.intensity) {
        for (wi, v) in map.w_axis.iter().zip(row) {
            writeln!(w, "{},{},{}", num(*z), num(*wi), num(*v))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One point of a parameter sweep. A failed point keeps its error message.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: std::result::Result<MetricsReport, String>,
}

pub const SWEEP_HEADER: &str = "value,xi,purity,schmidt_number,dlam_s,dlam_i,arrival_mean_s,arrival_mean_i,arrival_std_s,arrival_std_i,ec_deviation,error";

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    w.write_record(SWEEP_HEADER.split(','))?;
    for row in rows {
        let mut rec = vec![num(row.value)];
        match &row.outcome {
            Ok(m) => {
                rec.extend(
                    [
                        m.xi,
                        m.purity,
                        m.schmidt_number,
                        m.dlam_s,
                        m.dlam_i,
                        m.arrival_mean_s,
                        m.arrival_mean_i,
                        m.arrival_std_s,
                        m.arrival_std_i,
                        m.ec_deviation,
                    ]
                    .map(num),
                );
                rec.push(String::new());
            }
            Err(msg) => {
                rec.extend(std::iter::repeat_n(String::new(), 10));
                rec.push(msg.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|e| Error::Format(format!("sweep column {i}: {e}")))
        };
        let value = field(0)?;
        let outcome = if rec[11].is_empty() {
            let v: Vec<f64> = (1..11).map(field).collect::<Result<_>>()?;
            Ok(MetricsReport {
                xi: v[0],
                purity: v[1],
                schmidt_number: v[2],
                dlam_s: v[3],
                dlam_i: v[4],
                arrival_mean_s: v[5],
                arrival_mean_i: v[6],
                arrival_std_s: v[7],
                arrival_std_i: v[8],
                ec_deviation: v[9],
            })
        } else {
            Err(rec[11].to_string())
        };
        rows.push(SweepRow { value, outcome });
    }
    Ok(rows)
}

/// Columns `tau1,tau2,v`; `v` is empty for infeasible candidates.
pub fn write_candidates(cands: &[Candidate], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "tau1,tau2,v")?;
    for c in cands {
        writeln!(w, "{},{},{}", num(c.tau1), num(c.tau2), opt_num(c.value))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `z_over_l,xi_solver,xi_erf`.
pub fn write_overlay(rows: &[[f64; 3]], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "z_over_l,xi_solver,xi_erf")?;
    for r in rows {
        writeln!(w, "{},{},{}", num(r[0]), num(r[1]), num(r[2]))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub configs: Vec<SourceConfig>,
    pub output_dir: String,
    pub tool_version: String,
    /// Unix time (s) at which the run started.
    pub started_at: u64,
    pub duration_s: f64,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    std::io::copy(&mut BufReader::new(File::open(path)?), &mut hasher)?;
    Ok(format!("{:x}", hasher.finalize()))
}

impl RunManifest {
    pub fn new(
        command: &str,
        configs: Vec<SourceConfig>,
        output_dir: &Path,
        started: SystemTime,
    ) -> Self {
        Self {
            command: command.to_string(),
            configs,
            output_dir: output_dir.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            duration_s: 0.0,
            files: Vec::new(),
        }
    }

    /// Checksum the given files and write `manifest.json` into the output
    /// directory. Call after every other artifact is on disk.
    pub fn finish(mut self, files: &[PathBuf], elapsed: Duration) -> Result<PathBuf> {
        let dir = PathBuf::from(&self.output_dir);
        self.duration_s = elapsed.as_secs_f64();
        self.files = files
            .iter()
            .map(|p| {
                let rel = p.strip_prefix(&dir).unwrap_or(p).display().to_string();
                Ok(FileEntry {
                    path: rel,
                    bytes: fs::metadata(p)?.len(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_>>()?;
        let path = dir.join(MANIFEST_NAME);
        write_json(&self, &path)?;
        Ok(path)
    }
}

//! CSV and JSON persistence, checksums and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{ParticleSystem, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::experiments::config::ExperimentConfig;
use crate::metrics::MetricRow;

pub const TRAJECTORY_HEADER: [&str; 10] =
    ["time", "energy", "production", "g_x", "g_q", "d_cond", "delta_e", "delta_max", "theta_min", "w1"];

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a trajectory CSV, one per snapshot.
pub fn trajectory_rows(rec: &TrajectoryRecord) -> Vec<Vec<String>> {
    rec.times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let m = &rec.metrics[k];
            let mut row = vec![fmt_f64(t), fmt_f64(rec.energy[k]), fmt_f64(rec.production[k]), fmt_f64(m.g_x)];
            row.extend(m.values()[1..].iter().map(|v| fmt_opt(*v)));
            row
        })
        .collect()
}

pub fn write_trajectory(path: &Path, rec: &TrajectoryRecord) -> Result<()> {
    let header: Vec<String> = TRAJECTORY_HEADER.iter().map(|s| s.to_string()).collect();
    write_rows(path, &header, &trajectory_rows(rec))
}

/// Trajectory CSV with per-cluster diameters and center angles appended.
pub fn write_cluster_trajectory(path: &Path, rec: &TrajectoryRecord, k: usize) -> Result<()> {
    let mut header: Vec<String> = TRAJECTORY_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend((0..k).map(|p| format!("diameter_{p}")));
    for p in 0..k {
        for q in p + 1..k {
            header.push(format!("theta_{p}_{q}"));
        }
    }
    let pairs = k * k.saturating_sub(1) / 2;
    let mut rows = trajectory_rows(rec);
    for (row, m) in rows.iter_mut().zip(&rec.metrics) {
        let diam = m.cluster_diameters.clone().unwrap_or_default();
        let ang = m.center_angles.clone().unwrap_or_default();
        row.extend((0..k).map(|p| fmt_opt(diam.get(p).copied())));
        row.extend((0..pairs).map(|p| fmt_opt(ang.get(p).copied())));
    }
    write_rows(path, &header, &rows)
}

pub fn write_final_states(path: &Path, sys: &ParticleSystem) -> Result<()> {
    let mut header: Vec<String> = ["particle", "label_kind", "label_value"].iter().map(|s| s.to_string()).collect();
    header.extend((0..sys.dim()).map(|a| format!("x_{a}")));
    let rows: Vec<Vec<String>> = (0..sys.n())
        .map(|i| {
            let l = sys.label(i);
            let mut r = vec![i.to_string(), l.kind().to_string(), fmt_f64(l.value())];
            r.extend(sys.state(i).iter().map(|v| fmt_f64(*v)));
            r
        })
        .collect();
    write_rows(path, &header, &rows)
}

/// A CSV from header and rows of plain strings.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let h: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_rows(path, &h, rows)
}

/// A parsed CSV: header and rows.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("missing column `{name}`")))
    }

    /// Column `name` parsed as optional floats (empty cell = none).
    pub fn floats(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                let s = r.get(c).map(String::as_str).unwrap_or("");
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>().map(Some).map_err(|_| Error::Config(format!("bad number `{s}` in `{name}`")))
                }
            })
            .collect()
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(Error::Config(format!("{}: ragged row", path.display())));
        }
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok(Table { header, rows })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Marker written after a cell's files are complete; resume trusts a cell
/// only if the marker's checksums still match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMarker {
    pub cell: String,
    pub config_hash: String,
    pub files: BTreeMap<String, String>,
    /// Integration counters of the cell's trajectory.
    pub stats: Option<CellStats>,
}

/// Per-step facts that the snapshot CSV does not retain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub steps: usize,
    pub stopped_at: Option<f64>,
    pub ascent_violations: usize,
    pub worst_ascent: f64,
    pub max_norm_defect: f64,
}

impl CellStats {
    pub fn of(rec: &TrajectoryRecord) -> Self {
        Self {
            steps: rec.steps,
            stopped_at: rec.stopped_at,
            ascent_violations: rec.ascent_violations,
            worst_ascent: rec.worst_ascent,
            max_norm_defect: rec.max_norm_defect,
        }
    }
}

pub const MARKER: &str = "cell.json";

pub fn write_marker(
    dir: &Path,
    cell: &str,
    config_hash: &str,
    files: &[&str],
    rec: Option<&TrajectoryRecord>,
) -> Result<()> {
    let mut sums = BTreeMap::new();
    for f in files {
        sums.insert(f.to_string(), sha256_file(&dir.join(f))?);
    }
    write_json(
        &dir.join(MARKER),
        &CellMarker { cell: cell.into(), config_hash: config_hash.into(), files: sums, stats: rec.map(CellStats::of) },
    )
}

pub fn read_marker(dir: &Path) -> Result<CellMarker> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(MARKER))?)?)
}

/// True when `dir` holds a marker for this cell and config whose
/// checksums match the files on disk.
pub fn cell_complete(dir: &Path, cell: &str, config_hash: &str) -> bool {
    let Ok(text) = fs::read_to_string(dir.join(MARKER)) else { return false };
    let Ok(m) = serde_json::from_str::<CellMarker>(&text) else { return false };
    m.cell == cell
        && m.config_hash == config_hash
        && !m.files.is_empty()
        && m.files.iter().all(|(f, sum)| sha256_file(&dir.join(f)).is_ok_and(|s| &s == sum))
}

/// Written last, listing every output under the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub scenario: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub cells: Vec<String>,
    /// path relative to the output directory → sha256
    pub files: BTreeMap<String, String>,
}

pub const MANIFEST: &str = "manifest.json";

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p != root.join(MANIFEST) {
            out.push(p);
        }
    }
    Ok(())
}

pub fn write_manifest(root: &Path, cfg: &ExperimentConfig, cells: Vec<String>) -> Result<Manifest> {
    let mut paths = Vec::new();
    collect_files(root, root, &mut paths)?;
    let mut files = BTreeMap::new();
    for p in paths {
        let rel = p.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
        files.insert(rel, sha256_file(&p)?);
    }
    let m = Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: cfg.scenario.name().to_string(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        cells,
        files,
    };
    write_json(&root.join(MANIFEST), &m)?;
    Ok(m)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Metric columns of a trajectory CSV.
pub fn metric_row_from(table: &Table, k: usize) -> Result<MetricRow> {
    let get = |name: &str| -> Result<Option<f64>> { Ok(table.floats(name)?[k]) };
    Ok(MetricRow {
        g_x: get("g_x")?.unwrap_or(f64::NAN),
        g_q: get("g_q")?,
        d_cond: get("d_cond")?,
        delta_e: get("delta_e")?,
        delta_max: get("delta_max")?,
        theta_min: get("theta_min")?,
        w1: get("w1")?,
        ..MetricRow::default()
    })
}

//! Six-scenario shape comparison: final states and their classification.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, ParticleSystem, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::experiments::classify::{classify, Classification, ShapeClass};
use crate::experiments::config::{ExperimentConfig, Model};
use crate::experiments::io;
use crate::experiments::{cell_dir, init_key, initial_system, parse_cell, FINAL_STATES, TRAJECTORY};
use crate::kernels::AuxLabel;
use crate::maximizers::kernel_energy_ceiling;
use crate::metrics::gauge_coords;
use crate::sphere::{angle_between, normalize_in_place};

pub const CLASSIFICATION: &str = "classification.json";
pub const REPORT: &str = "report.json";
pub const SUMMARY: &str = "classification.csv";

/// Pushforward targets Ψ_k q̄ of the prompt model, q̄ the normalized mean
/// of the gauge-frame states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTargets {
    pub gauge_center: Vec<f64>,
    pub targets: Vec<Vec<f64>>,
    /// per target, geodesic distance to the nearest cluster center
    pub distances: Vec<f64>,
    pub max_distance: f64,
    /// pairwise target angles, upper triangle
    pub target_angles: Vec<f64>,
    /// max |last coordinate| over targets
    pub max_latitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: String,
    pub model: Model,
    pub n: usize,
    pub seed: usize,
    pub classification: Classification,
    pub energy: f64,
    pub ceiling: Option<f64>,
    pub steps: usize,
    pub stopped_at: Option<f64>,
    pub prompt_targets: Option<PromptTargets>,
}

impl CellReport {
    pub fn class(&self) -> ShapeClass {
        self.classification.class
    }
}

pub fn prompt_targets(sys: &ParticleSystem, cfg: &ExperimentConfig, c: &Classification) -> Result<PromptTargets> {
    let kernel = cfg.kernel_for(Model::Prompt)?;
    let q = gauge_coords(sys, &kernel)?;
    let d = sys.dim();
    let mut qbar = vec![0.0; d];
    for row in q.chunks(d) {
        for (a, v) in qbar.iter_mut().zip(row) {
            *a += v;
        }
    }
    normalize_in_place(&mut qbar);
    let mut gauges = Vec::new();
    for l in sys.labels() {
        if let AuxLabel::Prompt { index, gauge, .. } = l {
            if !gauges.iter().any(|(k, _)| k == index) {
                gauges.push((*index, gauge.clone()));
            }
        }
    }
    gauges.sort_by_key(|g| g.0);
    let targets: Vec<Vec<f64>> = gauges.iter().map(|(_, g)| g.apply(&qbar)).collect();
    let distances: Vec<f64> = targets
        .iter()
        .map(|t| c.clusters.centers.iter().map(|ctr| angle_between(t, ctr)).fold(f64::INFINITY, f64::min))
        .collect();
    let mut target_angles = Vec::new();
    for p in 0..targets.len() {
        for r in p + 1..targets.len() {
            target_angles.push(angle_between(&targets[p], &targets[r]));
        }
    }
    Ok(PromptTargets {
        gauge_center: qbar,
        max_distance: distances.iter().copied().fold(0.0, f64::max),
        distances,
        target_angles,
        max_latitude: targets.iter().map(|t| t[d - 1].abs()).fold(0.0, f64::max),
        targets,
    })
}

pub fn report_for(
    cfg: &ExperimentConfig,
    cell: &str,
    model: Model,
    n: usize,
    seed: usize,
    rec: &TrajectoryRecord,
) -> Result<CellReport> {
    let classification = classify(&rec.final_state, &cfg.classify)?;
    let prompt_targets = match model {
        Model::Prompt => Some(prompt_targets(&rec.final_state, cfg, &classification)?),
        _ => None,
    };
    Ok(CellReport {
        cell: cell.to_string(),
        model,
        n,
        seed,
        energy: rec.final_energy(),
        ceiling: kernel_energy_ceiling(&cfg.kernel_for(model)?),
        steps: rec.steps,
        stopped_at: rec.stopped_at,
        classification,
        prompt_targets,
    })
}

pub fn run_cell(cfg: &ExperimentConfig, root: &Path, cell: &str) -> Result<bool> {
    let (model, n, seed) = parse_cell(cell)?;
    let dir = cell_dir(root, cell);
    let hash = cfg.hash();
    if io::cell_complete(&dir, cell, &hash) {
        return Ok(false);
    }
    let (sys, _) = initial_system(cfg, model, n, init_key(cfg, n, seed))?;
    let rec = simulate(&sys, &cfg.kernel_for(model)?, &cfg.sim)?;
    io::write_trajectory(&dir.join(TRAJECTORY), &rec)?;
    io::write_final_states(&dir.join(FINAL_STATES), &rec.final_state)?;
    io::write_json(&dir.join(CLASSIFICATION), &report_for(cfg, cell, model, n, seed, &rec)?)?;
    io::write_marker(&dir, cell, &hash, &[TRAJECTORY, FINAL_STATES, CLASSIFICATION], Some(&rec))?;
    Ok(true)
}

pub fn read_cell_report(root: &Path, cell: &str) -> Result<CellReport> {
    let p = cell_dir(root, cell).join(CLASSIFICATION);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Collects every cell's classification into `report.json` and a
/// one-line-per-cell CSV.
pub fn write_report(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<CellReport>> {
    let cells = crate::experiments::cell_names(cfg)?;
    let reports: Vec<CellReport> = cells.iter().map(|c| read_cell_report(root, c)).collect::<Result<_>>()?;
    io::write_json(&root.join(REPORT), &reports)?;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let c = &r.classification;
            vec![
                r.cell.clone(),
                serde_json::to_value(c.class).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                c.circle_kind.clone().unwrap_or_default(),
                io::fmt_f64(c.g_x),
                io::fmt_f64(c.d_cond),
                io::fmt_f64(c.circle.residual()),
                c.clusters.count.to_string(),
                io::fmt_f64(r.energy),
            ]
        })
        .collect();
    io::write_table(
        &root.join(SUMMARY),
        &["cell", "class", "circle_kind", "g_x", "d_cond", "circle_residual", "clusters", "energy"],
        &rows,
    )?;
    Ok(reports)
}

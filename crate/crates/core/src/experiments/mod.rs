//! Experiment runner: configuration, cells, persistence and the CLI.
//!
//! A run is a set of independent cells (one per model, size and seed, or
//! per β for the metastability sweep). Each cell owns `runs/<cell>/` and
//! is keyed so that it can be regenerated alone; the aggregate pass and the
//! manifest are written after all cells finish.

pub mod classify;
pub mod cli;
pub mod config;
pub mod dobrushin;
pub mod exp1;
pub mod exp2;
pub mod io;
pub mod maximizer;
pub mod metastab;
pub mod rng;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dynamics::{simulate, ParticleSystem, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::sphere::{random_unit, UnitVector};

pub use config::{ExperimentConfig, Model, Scenario};
pub use io::Manifest;

/// Trajectory and final-state files of a simulated cell.
pub const TRAJECTORY: &str = "trajectory.csv";
pub const FINAL_STATES: &str = "final_states.csv";

/// Gauge-frame cloud q_i drawn from stream i of `key`, and the original
/// frame x_i = G_iᵀ q_i for the model's kernel.
pub fn initial_system(cfg: &ExperimentConfig, model: Model, n: usize, key: u64) -> Result<(ParticleSystem, Vec<f64>)> {
    let d = cfg.d;
    let kernel = cfg.kernel_for(model)?;
    let labels = cfg.labels(model, n)?;
    let mirror = model == Model::Prompt && cfg.kernel.prompt_mirror_pairs;
    let mut q: Vec<f64> = Vec::with_capacity(n * d);
    for i in 0..n {
        let mut qi = if mirror && i % 2 == 1 {
            let mut p = q[(i - 1) * d..i * d].to_vec();
            p[d - 1] = -p[d - 1];
            p
        } else {
            random_unit(&mut rng::stream_rng(key, i as u64), d)
        };
        if mirror && i % 2 == 0 && i + 1 == n {
            // unpaired last particle sits on the mirror
            qi[d - 1] = 0.0;
            crate::sphere::normalize_in_place(&mut qi);
        }
        q.extend_from_slice(&qi);
    }
    let mut states = Vec::with_capacity(n);
    for (i, l) in labels.iter().enumerate() {
        let qi = &q[i * d..(i + 1) * d];
        let x = match kernel.gauge(l, d)? {
            Some(g) => g.apply_transpose(qi),
            None => qi.to_vec(),
        };
        states.push(UnitVector::new(x)?);
    }
    Ok((ParticleSystem::new(states, labels)?, q))
}

/// Directory of one cell.
pub fn cell_dir(root: &Path, cell: &str) -> PathBuf {
    root.join("runs").join(cell)
}

/// Simulates one cell and writes its trajectory, final state and marker.
/// Skipped when a verified marker for the same config already exists.
pub(crate) fn simulate_cell(
    cfg: &ExperimentConfig,
    root: &Path,
    cell: &str,
    model: Model,
    sys: &ParticleSystem,
) -> Result<Option<TrajectoryRecord>> {
    let dir = cell_dir(root, cell);
    let hash = cfg.hash();
    if io::cell_complete(&dir, cell, &hash) {
        return Ok(None);
    }
    let kernel = cfg.kernel_for(model)?;
    let rec = simulate(sys, &kernel, &cfg.sim)?;
    io::write_trajectory(&dir.join(TRAJECTORY), &rec)?;
    io::write_final_states(&dir.join(FINAL_STATES), &rec.final_state)?;
    io::write_marker(&dir, cell, &hash, &[TRAJECTORY, FINAL_STATES], Some(&rec))?;
    Ok(Some(rec))
}

/// Outcome of a full run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub cells: Vec<String>,
    /// Cells actually simulated (the rest were resumed).
    pub simulated: usize,
    pub manifest: Manifest,
}

/// Runs every cell of `cfg`, then the aggregate pass and the manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let root = cfg.output_dir.clone();
    std::fs::create_dir_all(&root)?;
    let cells = cell_names(cfg)?;
    let simulated = match cfg.scenario {
        Scenario::Exp1 | Scenario::Single | Scenario::Exp2 => {
            let done: Vec<bool> =
                cells.par_iter().map(|c| run_cell(cfg, &root, c)).collect::<Result<Vec<_>>>()?;
            match cfg.scenario {
                Scenario::Exp1 => {
                    exp1::aggregate(cfg, &root)?;
                }
                Scenario::Exp2 => {
                    exp2::write_report(cfg, &root)?;
                }
                _ => {}
            }
            done.iter().filter(|d| **d).count()
        }
        Scenario::Dobrushin => dobrushin::run(cfg, &root)?,
        Scenario::Metastab => metastab::run(cfg, &root)?,
    };
    let manifest = io::write_manifest(&root, cfg, cells.clone())?;
    Ok(RunSummary { output_dir: root, cells, simulated, manifest })
}

/// Cell names of a run, in a fixed order.
pub fn cell_names(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    Ok(match cfg.scenario {
        Scenario::Exp1 | Scenario::Single | Scenario::Exp2 => {
            let mut v = Vec::new();
            for &m in &cfg.models {
                for &n in &cfg.n {
                    for s in 0..cfg.seeds {
                        v.push(cell_name(m, n, s));
                    }
                }
            }
            v
        }
        Scenario::Dobrushin => dobrushin::cell_names(cfg),
        Scenario::Metastab => metastab::cell_names(cfg),
    })
}

pub fn cell_name(model: Model, n: usize, seed: usize) -> String {
    format!("{model}_n{n}_s{seed:03}")
}

/// Key of the gauge-frame cloud of (n, seed). It does not depend on the
/// model, so every model of a seed starts from the same cloud.
pub fn init_key(cfg: &ExperimentConfig, n: usize, seed: usize) -> u64 {
    rng::cell_seed(cfg.master_seed, cfg.scenario.name(), "init", n, seed)
}

/// Parses `<model>_n<n>_s<seed>`.
pub(crate) fn parse_cell(cell: &str) -> Result<(Model, usize, usize)> {
    let bad = || Error::Config(format!("malformed cell name `{cell}`"));
    let (rest, seed) = cell.rsplit_once("_s").ok_or_else(bad)?;
    let (model, n) = rest.rsplit_once("_n").ok_or_else(bad)?;
    Ok((model.parse()?, n.parse().map_err(|_| bad())?, seed.parse().map_err(|_| bad())?))
}

/// Runs the single cell `cell` of `cfg` into `root`. Returns whether it was
/// simulated (false when resumed from a verified marker).
pub fn run_cell(cfg: &ExperimentConfig, root: &Path, cell: &str) -> Result<bool> {
    match cfg.scenario {
        Scenario::Exp1 | Scenario::Single => {
            let (model, n, seed) = parse_cell(cell)?;
            let (sys, _) = initial_system(cfg, model, n, init_key(cfg, n, seed))?;
            Ok(simulate_cell(cfg, root, cell, model, &sys)?.is_some())
        }
        Scenario::Exp2 => exp2::run_cell(cfg, root, cell),
        Scenario::Dobrushin => dobrushin::run_cell(cfg, root, cell),
        Scenario::Metastab => metastab::run_cell(cfg, root, cell),
    }
}

/// Re-runs one cell of a finished run from its manifest into `out`.
pub fn rerun_from_manifest(manifest: &Path, cell: &str, out: &Path) -> Result<PathBuf> {
    let m = io::read_manifest(manifest)?;
    if !m.cells.iter().any(|c| c == cell) {
        return Err(Error::Config(format!("cell `{cell}` is not in {}", manifest.display())));
    }
    let mut cfg = m.config;
    cfg.output_dir = out.to_path_buf();
    run_cell(&cfg, out, cell)?;
    Ok(cell_dir(out, cell))
}

//! β sweep of the clustered distance-bias system: one cell per β, then the
//! merger-time fit across cells.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, Model};
use crate::experiments::io::{self, fmt_opt};
use crate::experiments::{cell_dir, rng, FINAL_STATES, TRAJECTORY};
use crate::metastability::{metastability_report, scaling_fit, MetastabRun, ScalingFit};

pub const RUN: &str = "run.json";
pub const REDUCED: &str = "reduced.csv";
pub const RUNS_JSON: &str = "metastab.json";
pub const FIT_JSON: &str = "metastab_fit.json";
pub const SUMMARY: &str = "metastab.csv";

pub fn cell_name(beta: f64) -> String {
    format!("beta_{beta}")
}

pub fn cell_names(cfg: &ExperimentConfig) -> Vec<String> {
    cfg.metastab.betas.iter().map(|&b| cell_name(b)).collect()
}

/// Seed of the clustered initial state, shared by every β.
pub fn init_seed(cfg: &ExperimentConfig) -> u64 {
    rng::cell_seed(cfg.master_seed, "metastab", "init", cfg.metastab.sizes.iter().sum(), 0)
}

fn beta_of(cfg: &ExperimentConfig, cell: &str) -> Result<f64> {
    cfg.metastab
        .betas
        .iter()
        .copied()
        .find(|&b| cell_name(b) == cell)
        .ok_or_else(|| Error::Config(format!("cell `{cell}` is not part of this run")))
}

pub fn run_cell(cfg: &ExperimentConfig, root: &Path, cell: &str) -> Result<bool> {
    let beta = beta_of(cfg, cell)?;
    let dir = cell_dir(root, cell);
    let hash = cfg.hash();
    if io::cell_complete(&dir, cell, &hash) {
        return Ok(false);
    }
    let spec = cfg.cluster_spec()?;
    let kernel = cfg.kernel_for(Model::DistanceBias)?;
    let out = metastability_report(&spec, &kernel, &[beta], &cfg.sim, &cfg.metastab.options(), init_seed(cfg))?;
    let (run, traj) = (&out.runs[0], &out.trajectories[0]);
    io::write_cluster_trajectory(&dir.join(TRAJECTORY), traj, spec.k())?;
    io::write_final_states(&dir.join(FINAL_STATES), &traj.final_state)?;
    io::write_json(&dir.join(RUN), run)?;
    let mut files = vec![TRAJECTORY, FINAL_STATES, RUN];
    if let Some(red) = &out.reduced[0] {
        io::write_trajectory(&dir.join(REDUCED), red)?;
        files.push(REDUCED);
    }
    io::write_marker(&dir, cell, &hash, &files, Some(traj))?;
    Ok(true)
}

pub fn read_run(root: &Path, cell: &str) -> Result<MetastabRun> {
    let p = cell_dir(root, cell).join(RUN);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn run(cfg: &ExperimentConfig, root: &Path) -> Result<usize> {
    let cells = cell_names(cfg);
    let done: Vec<bool> = cells.par_iter().map(|c| run_cell(cfg, root, c)).collect::<Result<_>>()?;
    summarize(cfg, root)?;
    Ok(done.iter().filter(|d| **d).count())
}

/// Writes the per-β objects, the fit and a CSV of the scalar columns.
pub fn summarize(cfg: &ExperimentConfig, root: &Path) -> Result<(Vec<MetastabRun>, ScalingFit)> {
    let runs: Vec<MetastabRun> = cell_names(cfg).iter().map(|c| read_run(root, c)).collect::<Result<_>>()?;
    let fit = scaling_fit(cfg.metastab.sigma0, &runs);
    io::write_json(&root.join(RUNS_JSON), &runs)?;
    io::write_json(&root.join(FIT_JSON), &fit)?;
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            vec![
                io::fmt_f64(r.beta),
                fmt_opt(r.t_f),
                fmt_opt(r.t_m),
                fmt_opt(r.t_merge),
                fmt_opt(r.max_center_deviation),
                fmt_opt(r.reduced_energy_final),
                fmt_opt(r.t_f_scaled),
                fmt_opt(r.t_merge_scaled),
                r.certificate_holds.to_string(),
            ]
        })
        .collect();
    io::write_table(
        &root.join(SUMMARY),
        &[
            "beta",
            "T_f",
            "T_m",
            "t_merge",
            "max_center_deviation",
            "reduced_energy_final",
            "T_f_scaled",
            "t_merge_scaled",
            "certificate_holds",
        ],
        &rows,
    )?;
    Ok((runs, fit))
}

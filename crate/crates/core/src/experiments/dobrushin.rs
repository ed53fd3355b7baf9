//! Nested-sample convergence trend: systems of size n drawn as sub-samples
//! of one reference system of size n_max, compared in W1 over [0, T].

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{simulate, simulate_with, ParticleSystem, SimConfig, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, Model};
use crate::experiments::exp1::mean_sem;
use crate::experiments::io::{self, fmt_f64};
use crate::experiments::{cell_dir, cell_name, initial_system, rng, FINAL_STATES, TRAJECTORY};
use crate::metrics::{empirical_w1, standard_row, LabelMetric};

pub const SUMMARY: &str = "dobrushin.csv";

/// Sizes of a run: the compared sizes and then the reference, if distinct.
fn sizes(cfg: &ExperimentConfig) -> Vec<usize> {
    let mut v = cfg.n.clone();
    if !v.contains(&cfg.dobrushin.n_max) {
        v.push(cfg.dobrushin.n_max);
    }
    v
}

pub fn cell_names(cfg: &ExperimentConfig) -> Vec<String> {
    let mut v = Vec::new();
    for &m in &cfg.models {
        for n in sizes(cfg) {
            for s in 0..cfg.seeds {
                v.push(cell_name(m, n, s));
            }
        }
    }
    v
}

/// One key per seed, shared by every size so the samples are nested.
pub fn nested_key(cfg: &ExperimentConfig, seed: usize) -> u64 {
    rng::cell_seed(cfg.master_seed, "dobrushin", "init", 0, seed)
}

fn sim_config(cfg: &ExperimentConfig) -> SimConfig {
    SimConfig { early_stop: false, record_states: true, ..cfg.sim.clone() }
}

/// Reference indices of the size-n sub-sample. Position models keep every
/// r-th label with all of its particles; block prompts keep every r-th
/// particle, which stays inside its block.
pub fn nested_indices(cfg: &ExperimentConfig, model: Model, n: usize) -> Vec<usize> {
    let r = cfg.dobrushin.n_max / n;
    let m = cfg.kernel.m_per_aux;
    match (model, cfg.kernel.k_pr) {
        (Model::Prompt, Some(_)) => (0..n).map(|i| i * r).collect(),
        _ => (0..n).map(|i| (i / m) * r * m + i % m).collect(),
    }
}

pub fn sub_system(cfg: &ExperimentConfig, model: Model, reference: &ParticleSystem, n: usize) -> Result<ParticleSystem> {
    let idx = nested_indices(cfg, model, n);
    let states = idx.iter().map(|&j| reference.unit(j)).collect();
    let labels = idx.iter().map(|&j| reference.label(j).clone()).collect();
    ParticleSystem::new(states, labels)
}

/// Simulates the size-n sub-sample, filling `w1` against the reference
/// snapshot at the same time.
pub fn compare(
    cfg: &ExperimentConfig,
    model: Model,
    reference: &TrajectoryRecord,
    n: usize,
) -> Result<TrajectoryRecord> {
    let kernel = cfg.kernel_for(model)?;
    let metric = LabelMetric::for_kernel(&kernel);
    let start = reference.snapshots.first().ok_or_else(|| Error::Config("reference has no snapshots".into()))?;
    let sys = sub_system(cfg, model, start, n)?;
    let r = cfg.dobrushin.n_max / n;
    let mut k = 0;
    let mut obs = |t: f64, s: &ParticleSystem, e: f64| {
        let target = reference
            .snapshots
            .get(k)
            .filter(|_| (reference.times[k] - t).abs() < 1e-9)
            .ok_or_else(|| Error::Config(format!("no reference snapshot at t = {t}")))?;
        k += 1;
        let mut row = standard_row(s, &kernel, e)?;
        row.w1 = Some(empirical_w1(&s.replicated(r), target, metric)?);
        Ok(row)
    };
    let mut c = sim_config(cfg);
    c.record_states = false;
    simulate_with(&sys, &kernel, &c, &mut obs)
}

fn write_cell(dir: &Path, cell: &str, hash: &str, rec: &TrajectoryRecord) -> Result<()> {
    io::write_trajectory(&dir.join(TRAJECTORY), rec)?;
    io::write_final_states(&dir.join(FINAL_STATES), &rec.final_state)?;
    io::write_marker(dir, cell, hash, &[TRAJECTORY, FINAL_STATES], Some(rec))
}

/// Runs the missing cells of one (model, seed); the reference is integrated
/// once and shared. Returns the number of cells written.
fn run_seed(cfg: &ExperimentConfig, root: &Path, model: Model, seed: usize, only: Option<usize>) -> Result<usize> {
    let hash = cfg.hash();
    let nm = cfg.dobrushin.n_max;
    let todo: Vec<usize> = sizes(cfg)
        .into_iter()
        .filter(|&n| only.is_none_or(|o| o == n))
        .filter(|&n| !io::cell_complete(&cell_dir(root, &cell_name(model, n, seed)), &cell_name(model, n, seed), &hash))
        .collect();
    if todo.is_empty() {
        return Ok(0);
    }
    let (init, _) = initial_system(cfg, model, nm, nested_key(cfg, seed))?;
    let reference = simulate(&init, &cfg.kernel_for(model)?, &sim_config(cfg))?;
    for &n in &todo {
        let cell = cell_name(model, n, seed);
        let rec = compare(cfg, model, &reference, n)?;
        write_cell(&cell_dir(root, &cell), &cell, &hash, &rec)?;
    }
    Ok(todo.len())
}

pub fn run(cfg: &ExperimentConfig, root: &Path) -> Result<usize> {
    let jobs: Vec<(Model, usize)> =
        cfg.models.iter().flat_map(|&m| (0..cfg.seeds).map(move |s| (m, s))).collect();
    let counts: Vec<usize> =
        jobs.par_iter().map(|&(m, s)| run_seed(cfg, root, m, s, None)).collect::<Result<_>>()?;
    summarize(cfg, root)?;
    Ok(counts.iter().sum())
}

pub fn run_cell(cfg: &ExperimentConfig, root: &Path, cell: &str) -> Result<bool> {
    let (model, n, seed) = crate::experiments::parse_cell(cell)?;
    if !sizes(cfg).contains(&n) || seed >= cfg.seeds || !cfg.models.contains(&model) {
        return Err(Error::Config(format!("cell `{cell}` is not part of this run")));
    }
    Ok(run_seed(cfg, root, model, seed, Some(n))? > 0)
}

/// Seed statistics of sup_t W1 at one size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DobrushinRow {
    pub model: Model,
    pub n: usize,
    pub seeds: usize,
    pub sup_w1_mean: f64,
    pub sup_w1_sem: f64,
    pub w1_initial_mean: f64,
}

/// Reads the compared cells and writes `dobrushin.csv`.
pub fn summarize(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<DobrushinRow>> {
    let mut out = Vec::new();
    for &model in &cfg.models {
        for &n in &cfg.n {
            let mut sups = Vec::new();
            let mut inits = Vec::new();
            for s in 0..cfg.seeds {
                let t = io::read_table(&cell_dir(root, &cell_name(model, n, s)).join(TRAJECTORY))?;
                let w: Vec<f64> = t.floats("w1")?.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
                if w.is_empty() || w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config(format!("missing w1 values for {model} n = {n} seed {s}")));
                }
                sups.push(w.iter().copied().fold(0.0, f64::max));
                inits.push(w[0]);
            }
            let (mean, sem) = mean_sem(&sups).ok_or_else(|| Error::Config("no seeds".into()))?;
            let init = mean_sem(&inits).map(|x| x.0).unwrap_or(f64::NAN);
            out.push(DobrushinRow { model, n, seeds: cfg.seeds, sup_w1_mean: mean, sup_w1_sem: sem, w1_initial_mean: init });
        }
    }
    let rows: Vec<Vec<String>> = out
        .iter()
        .map(|r| {
            vec![
                r.model.to_string(),
                r.n.to_string(),
                r.seeds.to_string(),
                fmt_f64(r.sup_w1_mean),
                fmt_f64(r.sup_w1_sem),
                fmt_f64(r.w1_initial_mean),
            ]
        })
        .collect();
    io::write_table(
        &root.join(SUMMARY),
        &["model", "n", "seeds", "sup_w1_mean", "sup_w1_sem", "w1_initial_mean"],
        &rows,
    )?;
    Ok(out)
}

//! Collapse comparison of the baseline, RoPE and prompt models: per-seed
//! trajectories and a mean/SEM aggregate on the snapshot grid.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, Model};
use crate::experiments::io::{self, fmt_f64, fmt_opt, Table};
use crate::experiments::{cell_dir, cell_name, TRAJECTORY};

pub const AGGREGATE: &str = "aggregate.csv";
pub const AGGREGATED: [&str; 4] = ["g_x", "g_q", "d_cond", "delta_e"];

/// Mean and standard error of the mean; `None` when no sample is present.
/// The SEM of a single sample is 0.
pub fn mean_sem(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
    Some((mean, (var / k).sqrt()))
}

/// Time grid k·snapshot_every, k = 0..=t_final/snapshot_every.
pub fn time_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    let k = (cfg.sim.t_final / cfg.sim.snapshot_every + 1e-9).floor() as usize;
    (0..=k).map(|i| i as f64 * cfg.sim.snapshot_every).collect()
}

/// Values of `column` on `grid`, carrying the last row forward past an
/// early stop.
pub fn on_grid(table: &Table, column: &str, grid: &[f64]) -> Result<Vec<Option<f64>>> {
    let times: Vec<f64> = table.floats("time")?.into_iter().map(|t| t.unwrap_or(f64::NAN)).collect();
    let vals = table.floats(column)?;
    if times.is_empty() {
        return Err(Error::Config("empty trajectory".into()));
    }
    let tol = 1e-9;
    Ok(grid
        .iter()
        .map(|&t| {
            let k = times.partition_point(|&s| s <= t + tol);
            if k == 0 {
                None
            } else {
                vals[k - 1]
            }
        })
        .collect())
}

/// The aggregate at one (model, n, time).
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub model: Model,
    pub n: usize,
    pub time: f64,
    pub seeds: usize,
    /// (mean, sem) per column of [`AGGREGATED`].
    pub stats: Vec<Option<(f64, f64)>>,
}

/// Reads every cell's trajectory and writes `aggregate.csv`.
pub fn aggregate(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<AggregateRow>> {
    let grid = time_grid(cfg);
    let mut out = Vec::new();
    for &model in &cfg.models {
        for &n in &cfg.n {
            let mut cols: Vec<Vec<Vec<Option<f64>>>> = vec![Vec::new(); AGGREGATED.len()];
            for s in 0..cfg.seeds {
                let t = io::read_table(&cell_dir(root, &cell_name(model, n, s)).join(TRAJECTORY))?;
                for (c, name) in AGGREGATED.iter().enumerate() {
                    cols[c].push(on_grid(&t, name, &grid)?);
                }
            }
            for (k, &time) in grid.iter().enumerate() {
                let stats = cols
                    .iter()
                    .map(|per_seed| {
                        let xs: Vec<f64> = per_seed.iter().filter_map(|v| v[k]).collect();
                        mean_sem(&xs)
                    })
                    .collect();
                out.push(AggregateRow { model, n, time, seeds: cfg.seeds, stats });
            }
        }
    }
    let mut header = vec!["model", "n", "time", "seeds"];
    let names: Vec<String> =
        AGGREGATED.iter().flat_map(|c| [format!("{c}_mean"), format!("{c}_sem")]).collect();
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = out
        .iter()
        .map(|r| {
            let mut v = vec![r.model.to_string(), r.n.to_string(), fmt_f64(r.time), r.seeds.to_string()];
            for s in &r.stats {
                v.push(fmt_opt(s.map(|x| x.0)));
                v.push(fmt_opt(s.map(|x| x.1)));
            }
            v
        })
        .collect();
    io::write_table(&root.join(AGGREGATE), &header, &rows)?;
    Ok(out)
}

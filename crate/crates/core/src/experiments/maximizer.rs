//! Sampled energy maximizers for the `maximizer` subcommand.

use std::path::{Path, PathBuf};

use crate::dynamics::ParticleSystem;
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, Model};
use crate::experiments::{io, rng};
use crate::maximizers::{
    maximizer_report, phase_field_orbit, prompt_gauge_family, prompt_system, rope_orbit, toeplitz_max_path,
    MaximizerReport,
};
use crate::sphere::UnitVector;

/// The maximizer of `model` at n particles: an orbit sampled at the label
/// positions, or K prompt gauges mapping one point onto K random targets.
pub fn construct(cfg: &ExperimentConfig, model: Model, n: usize) -> Result<ParticleSystem> {
    let key = rng::cell_seed(cfg.master_seed, "maximizer", model.name(), n, 0);
    let d = cfg.d;
    let u = UnitVector::random(&mut rng::stream_rng(key, 0), d);
    let positions = || -> Result<Vec<f64>> {
        let l = cfg.aux_count(model, n);
        Ok((0..n).map(|i| cfg.aux_index(model, n, i) as f64 / l as f64).collect())
    };
    let kp = &cfg.kernel;
    match model {
        Model::Rope => rope_orbit(&u, kp.omega, &kp.plane)?.sample(&positions()?),
        Model::GeneralizedRope => phase_field_orbit(&u, &kp.phase_field.build()?, &kp.plane)?.sample(&positions()?),
        Model::Toeplitz => toeplitz_max_path(&kp.toeplitz, d)?.1.sample(&positions()?),
        Model::Prompt => {
            let k = kp.k_pr.unwrap_or(3);
            if k == 0 || !n.is_multiple_of(k) {
                return Err(Error::Config(format!("n = {n} is not a multiple of k_pr = {k}")));
            }
            let targets: Vec<UnitVector> =
                (1..=k as u64).map(|s| UnitVector::random(&mut rng::stream_rng(key, s), d)).collect();
            prompt_system(&u, &prompt_gauge_family(&targets, &u)?, n / k)
        }
        Model::Baseline | Model::DistanceBias => {
            Err(Error::Config(format!("no maximizer construction for model `{model}`")))
        }
    }
}

/// Writes `maximizer_<model>.csv` and `maximizer_<model>.json` into `out`.
pub fn run(cfg: &ExperimentConfig, model: Model, n: usize, out: &Path) -> Result<(MaximizerReport, PathBuf, PathBuf)> {
    let sys = construct(cfg, model, n)?;
    let report = maximizer_report(model.name(), &sys, &cfg.kernel_for(model)?)?;
    std::fs::create_dir_all(out)?;
    let csv = out.join(format!("maximizer_{model}.csv"));
    let json = out.join(format!("maximizer_{model}.json"));
    io::write_final_states(&csv, &sys)?;
    io::write_json(&json, &report)?;
    Ok((report, csv, json))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Scenario;

    #[test]
    fn constructions_saturate_the_ceiling() {
        let cfg = ExperimentConfig::defaults(Scenario::Single);
        for model in [Model::Rope, Model::GeneralizedRope, Model::Prompt, Model::Toeplitz] {
            let sys = construct(&cfg, model, 48).unwrap();
            let r = maximizer_report(model.name(), &sys, &cfg.kernel_for(model).unwrap()).unwrap();
            assert!(r.ceiling_gap.unwrap().abs() < 1e-12, "{model}: {r:?}");
        }
        assert!(construct(&cfg, Model::Baseline, 48).is_err());
        assert!(construct(&cfg, Model::Prompt, 47).is_err());
    }
}

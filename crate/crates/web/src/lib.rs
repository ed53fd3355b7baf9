//! Browser bindings: a live simulation, closed-form maximizers and tangent
//! perturbations, all on S².

use wasm_bindgen::prelude::*;

use usaav::experiments::config::{ExperimentConfig, Model, Scenario};
use usaav::experiments::{initial_system, maximizer, rng};
use usaav::maximizers::{kernel_energy_ceiling, perturb_tangent};
use usaav::metrics::{collapse_gap, gauge_gap};
use usaav::{energy, step_rk2, AuxLabel, Error, KernelSpec, ParticleSystem};

fn js_err(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A particle system evolving under one model's kernel.
#[wasm_bindgen]
pub struct Demo {
    sys: ParticleSystem,
    kernel: KernelSpec,
    time: f64,
    seed: u64,
    perturbations: u64,
}

#[wasm_bindgen]
impl Demo {
    /// Random gauge-frame start for `model` with n particles.
    #[wasm_bindgen(constructor)]
    pub fn new(model: &str, n: usize, beta: f64, seed: u64) -> Result<Demo, JsError> {
        Demo::random(model, n, beta, seed).map_err(js_err)
    }

    /// The closed-form maximizer of `model` (rope, generalized_rope,
    /// toeplitz or prompt).
    pub fn maximizer(model: &str, n: usize, beta: f64, seed: u64) -> Result<Demo, JsError> {
        Demo::closed_form(model, n, beta, seed).map_err(js_err)
    }

    /// Advances `steps` Heun steps of size `dt`.
    pub fn step(&mut self, steps: usize, dt: f64) -> Result<(), JsError> {
        self.advance(steps, dt).map_err(js_err)
    }

    /// Moves every particle a geodesic distance `magnitude` in a random
    /// tangent direction.
    pub fn perturb(&mut self, magnitude: f64) -> Result<(), JsError> {
        self.shake(magnitude).map_err(js_err)
    }

    /// Flat xyz coordinates.
    pub fn positions(&self) -> Vec<f64> {
        self.sys.coords().to_vec()
    }

    /// Label index per particle (position bin or prompt), for coloring.
    pub fn colors(&self) -> Vec<f64> {
        self.sys
            .labels()
            .iter()
            .map(|l| match l {
                AuxLabel::Position(s) => *s,
                AuxLabel::Prompt { index, .. } => *index as f64,
                _ => 0.0,
            })
            .collect()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Energy; NaN if it cannot be evaluated.
    pub fn energy(&self) -> f64 {
        energy(&self.sys, &self.kernel).unwrap_or(f64::NAN)
    }

    /// The kernel's energy ceiling, NaN when it has none.
    pub fn ceiling(&self) -> f64 {
        kernel_energy_ceiling(&self.kernel).unwrap_or(f64::NAN)
    }

    pub fn collapse_gap(&self) -> f64 {
        collapse_gap(&self.sys).unwrap_or(f64::NAN)
    }

    /// Collapse gap of the gauge-frame states.
    pub fn gauge_gap(&self) -> f64 {
        gauge_gap(&self.sys, &self.kernel).unwrap_or(f64::NAN)
    }
}

impl Demo {
    fn random(model: &str, n: usize, beta: f64, seed: u64) -> usaav::Result<Demo> {
        let model: Model = model.parse()?;
        let cfg = config(beta, seed)?;
        let key = rng::cell_seed(seed, "web", model.name(), n, 0);
        let (sys, _) = initial_system(&cfg, model, n, key)?;
        Ok(Demo { sys, kernel: cfg.kernel_for(model)?, time: 0.0, seed, perturbations: 0 })
    }

    fn closed_form(model: &str, n: usize, beta: f64, seed: u64) -> usaav::Result<Demo> {
        let model: Model = model.parse()?;
        let cfg = config(beta, seed)?;
        let sys = maximizer::construct(&cfg, model, n)?;
        Ok(Demo { sys, kernel: cfg.kernel_for(model)?, time: 0.0, seed, perturbations: 0 })
    }

    fn advance(&mut self, steps: usize, dt: f64) -> usaav::Result<()> {
        for _ in 0..steps {
            self.sys = step_rk2(&self.sys, &self.kernel, dt)?;
            self.time += dt;
        }
        Ok(())
    }

    fn shake(&mut self, magnitude: f64) -> usaav::Result<()> {
        self.perturbations += 1;
        let mut r = rng::stream_rng(self.seed, self.perturbations);
        self.sys = perturb_tangent(&self.sys, &mut r, magnitude)?;
        Ok(())
    }
}

fn config(beta: f64, seed: u64) -> usaav::Result<ExperimentConfig> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let mut cfg = ExperimentConfig::defaults(Scenario::Exp2);
    cfg.beta = beta;
    cfg.master_seed = seed;
    Ok(cfg)
}

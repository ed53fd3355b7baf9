//! Experiment configuration: the JSON document read by the CLI.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::SimConfig;
use crate::error::{Error, Result};
use crate::kernels::{AuxLabel, Bias, KernelSpec, PhaseField, ToeplitzCoeffs};
use crate::metastability::MetastabOptions;
use crate::sphere::RotationPlane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Exp1,
    Exp2,
    Dobrushin,
    Metastab,
    Single,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Exp1 => "exp1",
            Scenario::Exp2 => "exp2",
            Scenario::Dobrushin => "dobrushin",
            Scenario::Metastab => "metastab",
            Scenario::Single => "single",
        }
    }
}

/// Named model of an experiment cell; each maps to one kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Baseline,
    #[serde(alias = "distance-bias")]
    DistanceBias,
    #[serde(alias = "toeplitz_linear")]
    Toeplitz,
    Rope,
    #[serde(alias = "phase_field", alias = "generalized-rope")]
    GeneralizedRope,
    #[serde(alias = "prompt_gauge")]
    Prompt,
}

impl Model {
    pub const ALL: [Model; 6] = [
        Model::Baseline,
        Model::DistanceBias,
        Model::Toeplitz,
        Model::Rope,
        Model::GeneralizedRope,
        Model::Prompt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::Baseline => "baseline",
            Model::DistanceBias => "distance_bias",
            Model::Toeplitz => "toeplitz",
            Model::Rope => "rope",
            Model::GeneralizedRope => "generalized_rope",
            Model::Prompt => "prompt",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| Error::Config(format!("unknown model `{s}`")))
    }
}

/// The phase field of the generalized RoPE model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseFieldSpec {
    /// α(s) = 2πs + amplitude·sin(2π·frequency·s), used as ψ = −α.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// ψ given directly by knots.
    Knots { knots: Vec<(f64, f64)> },
}

fn default_samples() -> usize {
    4097
}

impl Default for PhaseFieldSpec {
    fn default() -> Self {
        PhaseFieldSpec::Sinusoid { amplitude: 0.8, frequency: 2.0, samples: default_samples() }
    }
}

impl PhaseFieldSpec {
    pub fn build(&self) -> Result<PhaseField> {
        match self {
            PhaseFieldSpec::Sinusoid { amplitude, frequency, samples } => {
                let (a, f) = (*amplitude, *frequency);
                PhaseField::sampled(*samples, |s| -(2.0 * PI * s + a * (2.0 * PI * f * s).sin()))
            }
            PhaseFieldSpec::Knots { knots } => PhaseField::from_knots(knots.clone()),
        }
    }
}

/// Kernel and label parameters shared by all models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Particles per auxiliary value.
    #[serde(default = "default_m")]
    pub m_per_aux: usize,
    #[serde(default = "default_bias")]
    pub bias: Bias,
    #[serde(default = "default_toeplitz")]
    pub toeplitz: ToeplitzCoeffs,
    #[serde(default)]
    pub phase_field: PhaseFieldSpec,
    #[serde(default)]
    pub plane: RotationPlane,
    /// Number of prompt labels; `None` gives one prompt per auxiliary value.
    #[serde(default)]
    pub k_pr: Option<usize>,
    /// Prompt phases θ_k; default 2πk/K.
    #[serde(default)]
    pub prompt_phases: Option<Vec<f64>>,
    /// Draw the prompt model's gauge-frame cloud in mirror pairs across the
    /// hyperplane x_{d−1} = 0.
    #[serde(default)]
    pub prompt_mirror_pairs: bool,
}

fn default_omega() -> f64 {
    2.0 * PI
}
fn default_m() -> usize {
    4
}
fn default_bias() -> Bias {
    Bias::GaussianTorus { epsilon: 0.02, length: 0.1 }
}
fn default_toeplitz() -> ToeplitzCoeffs {
    ToeplitzCoeffs::cosine(1)
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            omega: default_omega(),
            m_per_aux: default_m(),
            bias: default_bias(),
            toeplitz: default_toeplitz(),
            phase_field: PhaseFieldSpec::default(),
            plane: RotationPlane::default(),
            k_pr: None,
            prompt_phases: None,
            prompt_mirror_pairs: false,
        }
    }
}

/// Thresholds of the final-state classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyParams {
    /// Dirac when the collapse gap is below this.
    #[serde(default = "d_dirac")]
    pub dirac_gap: f64,
    /// Circle when every point is this close to the fitted plane circle.
    #[serde(default = "d_circle")]
    pub circle_tol: f64,
    /// A circle whose plane passes within this of the origin is great.
    #[serde(default = "d_circle")]
    pub great_circle_offset: f64,
    /// Curve when the conditional diameter is below this.
    #[serde(default = "d_cond")]
    pub cond_tol: f64,
    /// Single-linkage radius for cluster detection.
    #[serde(default = "d_link")]
    pub cluster_link: f64,
    /// Minimum geodesic separation of distinct cluster centers.
    #[serde(default = "d_sep")]
    pub cluster_separation: f64,
    #[serde(default = "d_kmax")]
    pub max_clusters: usize,
}

fn d_dirac() -> f64 {
    1e-3
}
fn d_circle() -> f64 {
    1e-2
}
fn d_cond() -> f64 {
    1e-3
}
fn d_link() -> f64 {
    0.05
}
fn d_sep() -> f64 {
    0.2
}
fn d_kmax() -> usize {
    8
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            dirac_gap: d_dirac(),
            circle_tol: d_circle(),
            great_circle_offset: d_circle(),
            cond_tol: d_cond(),
            cluster_link: d_link(),
            cluster_separation: d_sep(),
            max_clusters: d_kmax(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DobrushinParams {
    #[serde(default = "d_nmax")]
    pub n_max: usize,
}

fn d_nmax() -> usize {
    512
}

impl Default for DobrushinParams {
    fn default() -> Self {
        Self { n_max: d_nmax() }
    }
}

/// Geometry and thresholds of the metastability sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetastabParams {
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_r0")]
    pub r0: f64,
    #[serde(default = "d_sigma0")]
    pub sigma0: f64,
    #[serde(default = "d_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "d_betas")]
    pub betas: Vec<f64>,
    /// Trapping radius; default σ0/8.
    #[serde(default)]
    pub r: Option<f64>,
    /// Merger angle; default σ0/2.
    #[serde(default)]
    pub merge_threshold: Option<f64>,
    #[serde(default = "d_plateau")]
    pub plateau_ratio: f64,
    #[serde(default = "d_true")]
    pub stop_at_merger: bool,
}

fn d_plateau() -> f64 {
    1.0
}
fn d_true() -> bool {
    true
}

impl MetastabParams {
    pub fn options(&self) -> MetastabOptions {
        MetastabOptions {
            r: self.r,
            merge_threshold: self.merge_threshold,
            plateau_ratio: self.plateau_ratio,
            stop_at_merger: self.stop_at_merger,
        }
    }
}

fn d_k() -> usize {
    3
}
fn d_r0() -> f64 {
    0.05
}
fn d_sigma0() -> f64 {
    PI / 3.0
}
fn d_sizes() -> Vec<usize> {
    vec![20, 20, 20]
}
fn d_betas() -> Vec<f64> {
    vec![2.0, 3.0, 4.0]
}

impl Default for MetastabParams {
    fn default() -> Self {
        Self {
            k: d_k(),
            r0: d_r0(),
            sigma0: d_sigma0(),
            sizes: d_sizes(),
            betas: d_betas(),
            r: None,
            merge_threshold: None,
            plateau_ratio: d_plateau(),
            stop_at_merger: true,
        }
    }
}

/// The experiment document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default = "d_models")]
    pub models: Vec<Model>,
    #[serde(default = "d_n")]
    pub n: Vec<usize>,
    /// Number of seeds per (model, n).
    #[serde(default = "d_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_d")]
    pub d: usize,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub kernel: KernelParams,
    #[serde(default)]
    pub classify: ClassifyParams,
    #[serde(default)]
    pub dobrushin: DobrushinParams,
    #[serde(default)]
    pub metastab: MetastabParams,
    #[serde(default = "d_out")]
    pub output_dir: PathBuf,
}

fn d_models() -> Vec<Model> {
    vec![Model::Baseline, Model::Rope, Model::Prompt]
}
fn d_n() -> Vec<usize> {
    vec![64, 128, 256]
}
fn d_seeds() -> usize {
    100
}
fn d_beta() -> f64 {
    1.0
}
fn d_d() -> usize {
    3
}
fn d_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Defaults of each scenario.
    pub fn defaults(scenario: Scenario) -> Self {
        let mut c = Self {
            scenario,
            models: d_models(),
            n: d_n(),
            seeds: d_seeds(),
            master_seed: 0,
            beta: d_beta(),
            d: d_d(),
            sim: SimConfig::default(),
            kernel: KernelParams::default(),
            classify: ClassifyParams::default(),
            dobrushin: DobrushinParams::default(),
            metastab: MetastabParams::default(),
            output_dir: PathBuf::from("out").join(scenario.name()),
        };
        match scenario {
            Scenario::Exp1 => {}
            Scenario::Exp2 => {
                c.models = Model::ALL.to_vec();
                c.n = vec![256];
                c.seeds = 1;
                c.sim.t_final = 200.0;
                c.sim.snapshot_every = 1.0;
                c.kernel.k_pr = Some(3);
                c.kernel.prompt_mirror_pairs = true;
            }
            Scenario::Dobrushin => {
                c.models = vec![Model::Rope];
                c.seeds = 10;
                c.sim.t_final = 5.0;
                c.sim.early_stop = false;
            }
            Scenario::Metastab => {
                c.models = vec![Model::DistanceBias];
                c.n = vec![60];
                c.seeds = 1;
                c.kernel.bias = Bias::ExpDecay { lambda: 0.1 };
                c.sim = SimConfig {
                    dt: 1e-3,
                    t_final: 300.0,
                    snapshot_every: 0.01,
                    early_stop: false,
                    ..SimConfig::default()
                };
                c.metastab.r = Some(0.0125);
            }
            Scenario::Single => {
                c.models = vec![Model::Baseline];
                c.n = vec![64];
                c.seeds = 1;
            }
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds == 0 {
            return bad("seeds must be at least 1".into());
        }
        if self.models.is_empty() {
            return bad("models must not be empty".into());
        }
        if self.n.is_empty() || self.n.contains(&0) {
            return bad("n must be a non-empty list of positive sizes".into());
        }
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if self.kernel.m_per_aux == 0 {
            return bad("m_per_aux must be positive".into());
        }
        if self.kernel.k_pr == Some(0) {
            return bad("k_pr must be positive".into());
        }
        self.sim.validate().map_err(|e| Error::Config(e.to_string()))?;
        for &m in &self.models {
            self.kernel_for(m).and_then(|k| k.validate(self.d)).map_err(|e| Error::Config(e.to_string()))?;
        }
        match self.scenario {
            Scenario::Exp1 => {
                for &m in &self.models {
                    if !matches!(m, Model::Baseline | Model::Rope | Model::Prompt) {
                        return bad(format!("exp1 compares baseline, rope and prompt; got {m}"));
                    }
                }
            }
            Scenario::Dobrushin => {
                let nm = self.dobrushin.n_max;
                let mut prev = 0;
                for &n in &self.n {
                    if n <= prev {
                        return bad("dobrushin sizes must be strictly increasing".into());
                    }
                    prev = n;
                    if n > nm || !nm.is_multiple_of(n) || n % self.kernel.m_per_aux != 0 {
                        return bad(format!(
                            "dobrushin size {n} must divide n_max = {nm} and be a multiple of m_per_aux"
                        ));
                    }
                }
                if !nm.is_multiple_of(self.kernel.m_per_aux) {
                    return bad("n_max must be a multiple of m_per_aux".into());
                }
                if self.models.contains(&Model::Prompt) && self.kernel.k_pr.is_none() {
                    return bad("dobrushin prompt runs need a fixed k_pr".into());
                }
            }
            Scenario::Metastab => {
                let m = &self.metastab;
                if m.sizes.len() != m.k {
                    return bad(format!("metastab sizes has {} entries for k = {}", m.sizes.len(), m.k));
                }
                if m.betas.is_empty() || m.betas.iter().any(|b| !(*b > 0.0)) {
                    return bad("metastab betas must be a non-empty list of positive values".into());
                }
                if !matches!(self.kernel.bias, Bias::ExpDecay { .. } | Bias::GaussianTorus { .. }) {
                    return bad("metastab needs a bias".into());
                }
                self.cluster_spec().map_err(|e| Error::Config(e.to_string()))?;
            }
            Scenario::Exp2 | Scenario::Single => {}
        }
        if let Some(p) = &self.kernel.prompt_phases {
            if self.kernel.k_pr.is_some_and(|k| k != p.len()) {
                return bad("prompt_phases length must equal k_pr".into());
            }
        }
        Ok(())
    }

    /// Canonical JSON of the resolved config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// sha256 of the canonical JSON with `output_dir` blanked, so the same
    /// experiment hashes alike wherever it is written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.canonical_json().as_bytes()))
    }

    pub fn kernel_for(&self, model: Model) -> Result<KernelSpec> {
        let beta = self.beta;
        let kp = &self.kernel;
        Ok(match model {
            Model::Baseline => KernelSpec::Baseline { beta },
            Model::DistanceBias => KernelSpec::DistanceBias { beta, bias: kp.bias.clone() },
            Model::Toeplitz => KernelSpec::ToeplitzLinear { coeffs: kp.toeplitz.clone() },
            Model::Rope => KernelSpec::Rope { beta, omega: kp.omega, plane: kp.plane.clone() },
            Model::GeneralizedRope => {
                KernelSpec::PhaseField { beta, field: kp.phase_field.build()?, plane: kp.plane.clone() }
            }
            Model::Prompt => KernelSpec::PromptGauge { beta },
        })
    }

    /// Number of auxiliary values for `n` particles.
    pub fn aux_count(&self, model: Model, n: usize) -> usize {
        match (model, self.kernel.k_pr) {
            (Model::Prompt, Some(k)) => k,
            _ => n.div_ceil(self.kernel.m_per_aux),
        }
    }

    /// Auxiliary index of particle i.
    pub fn aux_index(&self, model: Model, n: usize, i: usize) -> usize {
        match (model, self.kernel.k_pr) {
            (Model::Prompt, Some(k)) => i * k / n,
            _ => i / self.kernel.m_per_aux,
        }
    }

    /// Frozen labels: positions (ℓ−1)/L for position models, prompts with
    /// gauge R_θ in the rotation plane for the prompt model.
    pub fn labels(&self, model: Model, n: usize) -> Result<Vec<AuxLabel>> {
        let l = self.aux_count(model, n);
        let per_aux: Vec<AuxLabel> = match model {
            Model::Prompt => {
                let phases: Vec<f64> = match &self.kernel.prompt_phases {
                    Some(p) if p.len() == l => p.clone(),
                    Some(p) => {
                        return Err(Error::Config(format!("{} prompt phases for {l} prompts", p.len())));
                    }
                    None => (0..l).map(|k| 2.0 * PI * k as f64 / l as f64).collect(),
                };
                phases
                    .iter()
                    .enumerate()
                    .map(|(k, &th)| {
                        let g = self.kernel.plane.matrix(th, self.d);
                        Ok(AuxLabel::Prompt { index: k, phase: th, gauge: Arc::new(g) })
                    })
                    .collect::<Result<_>>()?
            }
            _ => (0..l).map(|k| AuxLabel::position(k as f64 / l as f64)).collect::<Result<_>>()?,
        };
        Ok((0..n).map(|i| per_aux[self.aux_index(model, n, i)].clone()).collect())
    }

    /// The metastability geometry: K equatorial centers.
    pub fn cluster_spec(&self) -> Result<crate::metastability::ClusterSpec> {
        let m = &self.metastab;
        crate::metastability::ClusterSpec::equatorial(m.k, self.d, m.r0, m.sigma0, m.sizes.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        for s in [Scenario::Exp1, Scenario::Exp2, Scenario::Dobrushin, Scenario::Metastab, Scenario::Single] {
            let c = ExperimentConfig::defaults(s);
            c.validate().unwrap();
            let back = ExperimentConfig::from_json(&c.canonical_json()).unwrap();
            assert_eq!(back, c);
            assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn minimal_document_fills_defaults() {
        let c = ExperimentConfig::from_json(r#"{"scenario": "exp1"}"#).unwrap();
        assert_eq!(c.seeds, 100);
        assert_eq!(c.n, vec![64, 128, 256]);
        assert_eq!(c.beta, 1.0);
        assert_eq!(c.d, 3);
    }

    #[test]
    fn invalid_documents_are_rejected() {
        for doc in [
            r#"{"scenario": "exp1", "seeds": 0}"#,
            r#"{"scenario": "exp1", "models": ["toeplitz"]}"#,
            r#"{"scenario": "exp1", "unknown": 1}"#,
            r#"{"scenario": "nope"}"#,
            r#"{"scenario": "exp1", "sim": {"dt": -1, "t_final": 1, "snapshot_every": 0.5}}"#,
            r#"{"scenario": "dobrushin", "n": [128, 64]}"#,
            r#"{"scenario": "dobrushin", "n": [96]}"#,
            r#"{"scenario": "exp1", "beta": 0}"#,
        ] {
            assert!(matches!(ExperimentConfig::from_json(doc), Err(Error::Config(_))), "{doc}");
        }
    }

    #[test]
    fn labels_follow_the_aux_grid() {
        let c = ExperimentConfig::defaults(Scenario::Exp1);
        let l = c.labels(Model::Rope, 16).unwrap();
        assert_eq!(l[0].value(), 0.0);
        assert_eq!(l[3].value(), 0.0);
        assert_eq!(l[4].value(), 0.25);
        assert_eq!(l[15].value(), 0.75);
        let p = c.labels(Model::Prompt, 16).unwrap();
        assert_eq!(p[15].value(), 3.0);
        let mut c2 = ExperimentConfig::defaults(Scenario::Exp2);
        c2.kernel.k_pr = Some(3);
        let p = c2.labels(Model::Prompt, 256).unwrap();
        let counts: Vec<usize> =
            (0..3).map(|k| p.iter().filter(|l| l.value() == k as f64).count()).collect();
        assert_eq!(counts.iter().sum::<usize>(), 256);
        assert!(counts.iter().all(|&c| c >= 85));
    }

    #[test]
    fn model_names_parse() {
        for m in Model::ALL {
            assert_eq!(m.name().parse::<Model>().unwrap(), m);
        }
        assert_eq!("phase_field".parse::<Model>().unwrap(), Model::GeneralizedRope);
        assert!("rop".parse::<Model>().is_err());
    }
}

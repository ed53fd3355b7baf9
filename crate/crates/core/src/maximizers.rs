//! Closed-form energy maximizers and discrete variational checks.
//!
//! Orbit paths `s ↦ x(s)` realize the energy ceiling for their kernel:
//! RoPE orbits `R_{−ωs}u`, phase-field orbits `R_{ψ(s)}u`, prompt gauges
//! `Ψ(z)u`, and the frequency circles of Toeplitz kernels.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{velocity_field, ParticleSystem};
use crate::error::{Error, Result};
use crate::kernels::{AuxLabel, KernelSpec, PhaseField, ToeplitzCoeffs};
use crate::sphere::{dot, householder_gauge, norm, normalize_in_place, project_tangent_raw, OrthogonalGauge, RotationPlane, UnitVector};

/// sup_b · e^β / (2β)
pub fn energy_ceiling(beta: f64, sup_b: f64) -> f64 {
    sup_b * beta.exp() / (2.0 * beta)
}

/// The analytic energy ceiling of a kernel: sup_b·e^β/(2β) for the
/// exponential families, (1/2)·max_m ĉ(m) for Toeplitz kernels.
pub fn kernel_energy_ceiling(k: &KernelSpec) -> Option<f64> {
    match k {
        KernelSpec::ToeplitzLinear { coeffs } => Some(0.5 * coeffs.argmax().1),
        _ => k.beta().map(|b| energy_ceiling(b, k.sup_bias())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrbitKind {
    RopeOrbit { u: Vec<f64>, omega: f64 },
    PhaseField { u: Vec<f64>, field: PhaseField },
    ToeplitzCircle { m: i32 },
    Constant { u: Vec<f64> },
}

/// A path s ↦ x(s) on the sphere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitPath {
    pub kind: OrbitKind,
    pub plane: RotationPlane,
    pub dim: usize,
}

impl OrbitPath {
    pub fn at(&self, s: f64) -> UnitVector {
        let v = match &self.kind {
            OrbitKind::RopeOrbit { u, omega } => {
                let mut x = u.clone();
                self.plane.rotate_in_place(-omega * s, &mut x);
                x
            }
            OrbitKind::PhaseField { u, field } => {
                let mut x = u.clone();
                self.plane.rotate_in_place(field.eval(s), &mut x);
                x
            }
            OrbitKind::ToeplitzCircle { m } => {
                let a = 2.0 * PI * *m as f64 * s;
                let mut x = vec![0.0; self.dim];
                x[0] = a.cos();
                x[1] = a.sin();
                x
            }
            OrbitKind::Constant { u } => u.clone(),
        };
        UnitVector::from_raw(v)
    }

    /// Particles x(s_i) labeled with their positions.
    pub fn sample(&self, positions: &[f64]) -> Result<ParticleSystem> {
        let states = positions.iter().map(|&s| self.at(s)).collect();
        let labels = positions.iter().map(|&s| AuxLabel::position(s)).collect::<Result<Vec<_>>>()?;
        ParticleSystem::new(states, labels)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, OrbitKind::Constant { .. })
    }
}

/// s_ℓ = (ℓ−1)/L for ℓ = 1..L, each repeated `m` times.
pub fn uniform_positions(l: usize, m: usize) -> Vec<f64> {
    (0..l).flat_map(|k| std::iter::repeat_n(k as f64 / l as f64, m)).collect()
}

fn fixed_by_plane(plane: &RotationPlane, u: &[f64]) -> bool {
    let mut r = u.to_vec();
    plane.rotate_in_place(PI / 2.0, &mut r);
    r.iter().zip(u).all(|(a, b)| (a - b).abs() <= 1e-15)
}

/// x*(s) = R_{−ωs} u.
pub fn rope_orbit(u: &UnitVector, omega: f64, plane: &RotationPlane) -> Result<OrbitPath> {
    plane.validate(u.dim())?;
    let kind = if fixed_by_plane(plane, u.as_slice()) || omega == 0.0 {
        OrbitKind::Constant { u: u.as_slice().to_vec() }
    } else {
        OrbitKind::RopeOrbit { u: u.as_slice().to_vec(), omega }
    };
    Ok(OrbitPath { kind, plane: plane.clone(), dim: u.dim() })
}

/// x^ψ(s) = R_{ψ(s)} u.
pub fn phase_field_orbit(u: &UnitVector, field: &PhaseField, plane: &RotationPlane) -> Result<OrbitPath> {
    plane.validate(u.dim())?;
    let flat = field.knots().iter().all(|k| k.1 == 0.0);
    let kind = if flat || fixed_by_plane(plane, u.as_slice()) {
        OrbitKind::Constant { u: u.as_slice().to_vec() }
    } else {
        OrbitKind::PhaseField { u: u.as_slice().to_vec(), field: field.clone() }
    };
    Ok(OrbitPath { kind, plane: plane.clone(), dim: u.dim() })
}

/// ψ = quantile function of a circular law, given as knots (p, θ) of a
/// non-decreasing, right-continuous piecewise-linear quantile on [0, 1].
pub fn target_phase_field(quantile: &[(f64, f64)]) -> Result<PhaseField> {
    if quantile.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for (k, w) in quantile.windows(2).enumerate() {
        if w[1].1 < w[0].1 || w[1].0 < w[0].0 {
            return Err(Error::NonMonotoneQuantile(k + 1));
        }
    }
    if quantile.iter().any(|(p, _)| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter("quantile abscissae must lie in [0, 1]".into()));
    }
    PhaseField::from_knots(quantile.to_vec())
}

/// Ψ_G(z) = householder_gauge(u, G(z)) for each prompt target.
pub fn prompt_gauge_family(targets: &[UnitVector], u: &UnitVector) -> Result<Vec<OrthogonalGauge>> {
    targets.iter().map(|g| householder_gauge(u, g)).collect()
}

/// m★ ∈ argmax ĉ(m) and the circle (cos 2πm★s, sin 2πm★s, 0, …).
pub fn toeplitz_max_path(coeffs: &ToeplitzCoeffs, dim: usize) -> Result<(i32, OrbitPath)> {
    if dim < 2 {
        return Err(Error::DimensionTooSmall(dim));
    }
    let (m, _) = coeffs.argmax();
    let kind = if m == 0 {
        let mut u = vec![0.0; dim];
        u[0] = 1.0;
        OrbitKind::Constant { u }
    } else {
        OrbitKind::ToeplitzCircle { m }
    };
    Ok((m, OrbitPath { kind, plane: RotationPlane::default(), dim }))
}

/// Prompt system x_i = Ψ(z_i) u with `per_prompt` particles per prompt.
pub fn prompt_system(u: &UnitVector, gauges: &[OrthogonalGauge], per_prompt: usize) -> Result<ParticleSystem> {
    let mut states = Vec::new();
    let mut labels = Vec::new();
    for (k, g) in gauges.iter().enumerate() {
        let phase = 2.0 * PI * k as f64 / gauges.len() as f64;
        let label = AuxLabel::prompt(k, phase, g.clone())?;
        for _ in 0..per_prompt {
            states.push(UnitVector::new(g.apply(u.as_slice()))?);
            labels.push(label.clone());
        }
    }
    ParticleSystem::new(states, labels)
}

/// max_i ‖P⊥_{x_i} F_i‖.
pub fn projected_gradient_residual(sys: &ParticleSystem, k: &KernelSpec) -> Result<f64> {
    Ok(velocity_field(sys, k)?.iter().map(|v| norm(v)).fold(0.0, f64::max))
}

/// Each state moved along a random tangent direction of norm `magnitude`,
/// then renormalized.
pub fn perturb_tangent<R: Rng + ?Sized>(sys: &ParticleSystem, rng: &mut R, magnitude: f64) -> Result<ParticleSystem> {
    let d = sys.dim();
    let mut coords = Vec::with_capacity(sys.coords().len());
    for x in sys.states() {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let mut t = project_tangent_raw(x, &g);
        let r = norm(&t);
        if r > 0.0 {
            t.iter_mut().for_each(|v| *v *= magnitude / r);
        }
        let mut y: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a + b).collect();
        normalize_in_place(&mut y);
        coords.extend(y);
    }
    ParticleSystem::from_flat(d, coords, sys.labels().to_vec())
}

/// Fibonacci lattice of `count` nearly uniform points on S².
pub fn fibonacci_sphere(count: usize) -> Result<Vec<UnitVector>> {
    if count == 0 {
        return Err(Error::EmptyGrid);
    }
    let golden = PI * (3.0 - 5.0f64.sqrt());
    Ok((0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            UnitVector::new(vec![r * a.cos(), r * a.sin(), z]).expect("nonzero")
        })
        .collect())
}

/// A finite joint law: weights on auxiliary points and, per point, weights
/// on its own candidate grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJointLaw {
    pub aux: Vec<AuxLabel>,
    pub aux_weights: Vec<f64>,
    pub grids: Vec<Vec<UnitVector>>,
    pub conditionals: Vec<Vec<f64>>,
}

impl DiscreteJointLaw {
    pub fn new(
        aux: Vec<AuxLabel>,
        aux_weights: Vec<f64>,
        grids: Vec<Vec<UnitVector>>,
        conditionals: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let k = aux.len();
        if k == 0 {
            return Err(Error::EmptyGrid);
        }
        if aux_weights.len() != k || grids.len() != k || conditionals.len() != k {
            return Err(Error::CountMismatch(k, aux_weights.len().min(grids.len()).min(conditionals.len())));
        }
        let check = |w: &[f64], what: &str| -> Result<()> {
            let s: f64 = w.iter().sum();
            if w.iter().any(|v| *v < 0.0 || !v.is_finite()) || (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("{what} weights must be a probability vector (sum {s})")));
            }
            Ok(())
        };
        check(&aux_weights, "auxiliary")?;
        for (g, c) in grids.iter().zip(&conditionals) {
            if g.is_empty() {
                return Err(Error::EmptyGrid);
            }
            if g.len() != c.len() {
                return Err(Error::CountMismatch(g.len(), c.len()));
            }
            check(c, "conditional")?;
        }
        Ok(Self { aux, aux_weights, grids, conditionals })
    }

    /// Conditional at `a` replaced by a point mass on grid index `j`.
    pub fn with_dirac(&self, a: usize, j: usize) -> Self {
        let mut out = self.clone();
        out.conditionals[a].iter_mut().for_each(|c| *c = 0.0);
        out.conditionals[a][j] = 1.0;
        out
    }

    /// Grid index of the point mass at `a`, if the conditional is a Dirac.
    pub fn dirac_index(&self, a: usize) -> Option<usize> {
        let c = &self.conditionals[a];
        let j = c.iter().position(|&w| w == 1.0)?;
        c.iter().enumerate().all(|(k, &w)| k == j || w == 0.0).then_some(j)
    }

    /// ½ Σ_{ξ,ζ} ρ(ξ)ρ(ζ) Σ_{x,y} c(ξ,x) c(ζ,y) h((x,ξ),(y,ζ)).
    pub fn energy(&self, k: &KernelSpec) -> Result<f64> {
        let mut total = 0.0;
        for a in 0..self.aux.len() {
            for b in 0..self.aux.len() {
                total += self.aux_weights[a] * self.aux_weights[b] * self.block(k, a, b)?;
            }
        }
        Ok(0.5 * total)
    }

    fn block(&self, k: &KernelSpec, a: usize, b: usize) -> Result<f64> {
        let mut s = 0.0;
        for (x, cx) in self.grids[a].iter().zip(&self.conditionals[a]) {
            if *cx == 0.0 {
                continue;
            }
            for (y, cy) in self.grids[b].iter().zip(&self.conditionals[b]) {
                if *cy == 0.0 {
                    continue;
                }
                s += cx * cy * k.eval(x.as_slice(), &self.aux[a], y.as_slice(), &self.aux[b])?;
            }
        }
        Ok(s)
    }

    /// Energy after putting a point mass at candidate `x` for aux point `a`,
    /// up to the terms that do not involve `a`.
    fn dirac_score(&self, k: &KernelSpec, a: usize, x: &UnitVector) -> Result<f64> {
        let ra = self.aux_weights[a];
        let mut cross = 0.0;
        for b in 0..self.aux.len() {
            if b == a {
                continue;
            }
            let mut phi = 0.0;
            for (y, cy) in self.grids[b].iter().zip(&self.conditionals[b]) {
                if *cy != 0.0 {
                    phi += cy * k.eval(x.as_slice(), &self.aux[a], y.as_slice(), &self.aux[b])?;
                }
            }
            cross += self.aux_weights[b] * phi;
        }
        let own = k.eval(x.as_slice(), &self.aux[a], x.as_slice(), &self.aux[a])?;
        Ok(ra * cross + 0.5 * ra * ra * own)
    }

    fn current_score(&self, k: &KernelSpec, a: usize) -> Result<f64> {
        let ra = self.aux_weights[a];
        let mut cross = 0.0;
        for b in 0..self.aux.len() {
            if b != a {
                cross += self.aux_weights[b] * self.block(k, a, b)?;
            }
        }
        Ok(ra * cross + 0.5 * ra * ra * self.block(k, a, a)?)
    }
}

/// Report of a [`diracize`] run.
#[derive(Debug, Clone)]
pub struct DiracizeOutcome {
    pub law: DiscreteJointLaw,
    pub sweeps: usize,
    pub energy_before: f64,
    pub energy_after: f64,
}

/// Coordinate ascent over auxiliary points: each conditional is replaced by
/// the point mass with the largest resulting energy (ties to the lowest grid
/// index), unless the current conditional already does at least as well.
/// Sweeps repeat until a full pass changes nothing.
pub fn diracize(law: &DiscreteJointLaw, k: &KernelSpec) -> Result<DiracizeOutcome> {
    const MAX_SWEEPS: usize = 10_000;
    let energy_before = law.energy(k)?;
    let mut cur = law.clone();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut changed = false;
        for a in 0..cur.aux.len() {
            let mut best = (f64::NEG_INFINITY, 0usize);
            for (j, x) in cur.grids[a].iter().enumerate() {
                let s = cur.dirac_score(k, a, x)?;
                if s > best.0 {
                    best = (s, j);
                }
            }
            let here = match cur.dirac_index(a) {
                Some(j) => {
                    if j == best.1 {
                        continue;
                    }
                    cur.dirac_score(k, a, &cur.grids[a][j])?
                }
                None => cur.current_score(k, a)?,
            };
            if best.0 > here {
                cur = cur.with_dirac(a, best.1);
                changed = true;
            }
        }
        if !changed || sweeps >= MAX_SWEEPS {
            break;
        }
    }
    let energy_after = cur.energy(k)?;
    Ok(DiracizeOutcome { law: cur, sweeps, energy_before, energy_after })
}

/// Energy of a simulated state against the kernel ceiling, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximizerReport {
    pub construction: String,
    pub n: usize,
    pub beta: Option<f64>,
    pub energy: f64,
    pub ceiling: Option<f64>,
    pub ceiling_gap: Option<f64>,
    pub projected_gradient_residual: f64,
    pub max_norm_defect: f64,
}

/// Energy, gap to the ceiling and first-order residual of `sys`.
pub fn maximizer_report(construction: &str, sys: &ParticleSystem, k: &KernelSpec) -> Result<MaximizerReport> {
    let e = crate::dynamics::energy(sys, k)?;
    let ceiling = kernel_energy_ceiling(k);
    Ok(MaximizerReport {
        construction: construction.to_string(),
        n: sys.n(),
        beta: k.beta(),
        energy: e,
        ceiling,
        ceiling_gap: ceiling.map(|c| c - e),
        projected_gradient_residual: projected_gradient_residual(sys, k)?,
        max_norm_defect: sys.max_norm_defect(),
    })
}

/// Cosine of the largest angle between any two rows; used by tests.
#[doc(hidden)]
pub fn min_pair_cosine(sys: &ParticleSystem) -> f64 {
    let mut m = 1.0f64;
    for i in 0..sys.n() {
        for j in i + 1..sys.n() {
            m = m.min(dot(sys.state(i), sys.state(j)));
        }
    }
    m
}

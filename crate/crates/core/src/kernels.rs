//! Regular interaction kernels h((x,ξ),(y,ζ)) and their content gradients.
//!
//! Six families are supported. All of them factor as
//!
//! ```text
//! h((x,ξ),(y,ζ)) = w(ξ,ζ) · φ(<G(ξ)x, G(ζ)y>)
//! ```
//!
//! for an orthogonal per-label gauge `G`, a label weight `w` and a content
//! profile `φ` that is either `e^{βc}/β` or the identity. The direct
//! evaluators below use the ambient formulas; [`KernelSpec::gauge`],
//! [`KernelSpec::pair_weight`] and [`KernelSpec::profile`] expose the
//! factorization used by the particle integrator.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{dot, OrthogonalGauge, RotationPlane};

const TWO_PI: f64 = 2.0 * PI;

/// Frozen auxiliary variable carried by each particle.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxLabel {
    None,
    /// Position s ∈ (0, 1]. Grids starting at s = 0 are accepted as well.
    Position(f64),
    Prompt { index: usize, phase: f64, gauge: Arc<OrthogonalGauge> },
}

impl AuxLabel {
    pub fn position(s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidParameter(format!("position {s} outside [0, 1]")));
        }
        Ok(AuxLabel::Position(s))
    }

    pub fn prompt(index: usize, phase: f64, gauge: OrthogonalGauge) -> Result<Self> {
        let r = gauge.orthogonality_residual();
        if r > OrthogonalGauge::TOL {
            return Err(Error::NotOrthogonal(r));
        }
        Ok(AuxLabel::Prompt { index, phase, gauge: Arc::new(gauge) })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AuxLabel::None => "none",
            AuxLabel::Position(_) => "position",
            AuxLabel::Prompt { .. } => "prompt",
        }
    }

    /// Scalar shown in state dumps: the position, or the prompt index.
    pub fn value(&self) -> f64 {
        match self {
            AuxLabel::None => 0.0,
            AuxLabel::Position(s) => *s,
            AuxLabel::Prompt { index, .. } => *index as f64,
        }
    }

    /// Grouping key for conditional statistics: labels with equal keys
    /// carry the same auxiliary value.
    pub fn group_key(&self) -> (u8, u64) {
        match self {
            AuxLabel::None => (0, 0),
            AuxLabel::Position(s) => (1, s.to_bits()),
            AuxLabel::Prompt { index, .. } => (2, *index as u64),
        }
    }

    fn position_or(&self, family: &'static str) -> Result<f64> {
        match self {
            AuxLabel::Position(s) => Ok(*s),
            other => Err(Error::LabelMismatch { family, label: other.kind().into() }),
        }
    }

    fn prompt_gauge_or(&self, family: &'static str) -> Result<&OrthogonalGauge> {
        match self {
            AuxLabel::Prompt { gauge, .. } => Ok(gauge),
            other => Err(Error::LabelMismatch { family, label: other.kind().into() }),
        }
    }
}

/// Distance on the torus T = R/Z.
#[inline]
pub fn torus_distance(s: f64, t: f64) -> f64 {
    let d = (s - t).abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Nonnegative positional factor b(s, t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bias {
    /// e^{-λ|s-t|}
    ExpDecay { lambda: f64 },
    /// ε + exp(-dist_T(s,t)² / (2ℓ²))
    GaussianTorus { epsilon: f64, length: f64 },
}

impl Bias {
    #[inline]
    pub fn value(&self, s: f64, t: f64) -> f64 {
        match *self {
            Bias::ExpDecay { lambda } => (-lambda * (s - t).abs()).exp(),
            Bias::GaussianTorus { epsilon, length } => {
                let dt = torus_distance(s, t);
                epsilon + (-dt * dt / (2.0 * length * length)).exp()
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Bias::ExpDecay { .. } => 1.0,
            Bias::GaussianTorus { epsilon, .. } => epsilon + 1.0,
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Bias::GaussianTorus { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Bias::ExpDecay { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidParameter(format!("decay rate must be positive, got {lambda}")))
            }
            Bias::GaussianTorus { epsilon, length }
                if !(epsilon >= 0.0 && length > 0.0 && length.is_finite()) =>
            {
                Err(Error::InvalidParameter(format!(
                    "gaussian bias needs epsilon >= 0 and length > 0, got ({epsilon}, {length})"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// A phase field ψ on [0, 1]: piecewise linear through `knots`, with jumps
/// allowed (two knots at the same abscissa). Right-continuous at jumps and
/// constant outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseField {
    knots: Vec<(f64, f64)>,
}

impl PhaseField {
    pub fn from_knots(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidParameter("phase field needs at least one knot".into()));
        }
        for (k, w) in knots.windows(2).enumerate() {
            if !(w[1].0 >= w[0].0) {
                return Err(Error::InvalidParameter(format!(
                    "phase field knots must have non-decreasing abscissae (knot {})",
                    k + 1
                )));
            }
        }
        if knots.iter().any(|(s, v)| !s.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite phase field knot".into()));
        }
        Ok(Self { knots })
    }

    /// ψ(s) = offset + slope·s, exact under interpolation.
    pub fn linear(slope: f64, offset: f64) -> Self {
        Self { knots: vec![(0.0, offset), (1.0, offset + slope)] }
    }

    /// Dense samples of `f` on the uniform grid k/(samples-1).
    pub fn sampled(samples: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if samples < 2 {
            return Err(Error::InvalidParameter("need at least two samples".into()));
        }
        let m = (samples - 1) as f64;
        Self::from_knots((0..samples).map(|k| (k as f64 / m, f(k as f64 / m))).collect())
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, s: f64) -> f64 {
        let k = self.knots.partition_point(|kn| kn.0 <= s);
        if k == 0 {
            return self.knots[0].1;
        }
        if k == self.knots.len() {
            return self.knots[k - 1].1;
        }
        let (p0, v0) = self.knots[k - 1];
        let (p1, v1) = self.knots[k];
        v0 + (v1 - v0) * (s - p0) / (p1 - p0)
    }

    /// True if every knot value is non-decreasing in s.
    pub fn is_monotone(&self) -> bool {
        self.knots.windows(2).all(|w| w[1].1 >= w[0].1)
    }
}

/// Reduces an angle to its representative in (−π, π].
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TWO_PI);
    if r > PI {
        r - TWO_PI
    } else {
        r
    }
}

/// g(s,t) = −(ψ(t) − ψ(s)) mod 2π.
#[inline]
pub fn phase_difference(field: &PhaseField, s: f64, t: f64) -> f64 {
    wrap_angle(-(field.eval(t) - field.eval(s)))
}

/// Cosine-series Toeplitz profile c(Δ) = Σ_m ĉ(m) cos(2πmΔ), ĉ(m) = ĉ(−m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct ToeplitzCoeffs {
    coeffs: BTreeMap<i32, f64>,
}

impl ToeplitzCoeffs {
    pub const DEFAULT_MAX_FREQUENCY: i32 = 16;

    pub fn new(coeffs: BTreeMap<i32, f64>) -> Result<Self> {
        Self::with_max_frequency(coeffs, Self::DEFAULT_MAX_FREQUENCY)
    }

    pub fn with_max_frequency(coeffs: BTreeMap<i32, f64>, max_frequency: i32) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("toeplitz kernel needs coefficients".into()));
        }
        for (&m, &c) in &coeffs {
            if m.abs() > max_frequency {
                return Err(Error::InvalidParameter(format!(
                    "frequency {m} exceeds the limit {max_frequency}"
                )));
            }
            if !c.is_finite() {
                return Err(Error::InvalidParameter(format!("coefficient at {m} is not finite")));
            }
            let mirror = coeffs.get(&-m).copied().unwrap_or(0.0);
            if (mirror - c).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "coefficients must satisfy c({m}) = c({}), got {c} vs {mirror}",
                    -m
                )));
            }
        }
        Ok(Self { coeffs })
    }

    /// c(Δ) = cos(2πmΔ): ĉ(±m) = 1/2 (or ĉ(0) = 1 when m = 0).
    pub fn cosine(m: i32) -> Self {
        let mut coeffs = BTreeMap::new();
        if m == 0 {
            coeffs.insert(0, 1.0);
        } else {
            coeffs.insert(m.abs(), 0.5);
            coeffs.insert(-m.abs(), 0.5);
        }
        Self { coeffs }
    }

    pub fn get(&self, m: i32) -> f64 {
        self.coeffs.get(&m).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.coeffs.iter().map(|(&m, &c)| (m, c))
    }

    #[inline]
    pub fn profile(&self, delta: f64) -> f64 {
        self.coeffs.iter().map(|(&m, &c)| c * (TWO_PI * m as f64 * delta).cos()).sum()
    }

    /// Largest coefficient, ties toward the smallest |m| and then m > 0.
    pub fn argmax(&self) -> (i32, f64) {
        let mut best: Option<(i32, f64)> = None;
        for (m, c) in self.iter() {
            best = match best {
                None => Some((m, c)),
                Some((bm, bc)) => {
                    let better = c > bc
                        || (c == bc && (m.abs() < bm.abs() || (m.abs() == bm.abs() && m > bm)));
                    if better {
                        Some((m, c))
                    } else {
                        Some((bm, bc))
                    }
                }
            };
        }
        best.expect("non-empty by construction")
    }
}

// JSON object keys are strings; frequencies are parsed from them.
impl TryFrom<BTreeMap<String, f64>> for ToeplitzCoeffs {
    type Error = Error;
    fn try_from(m: BTreeMap<String, f64>) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (k, v) in m {
            let f: i32 = k
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("frequency key {k:?} is not an integer")))?;
            out.insert(f, v);
        }
        ToeplitzCoeffs::new(out)
    }
}

impl From<ToeplitzCoeffs> for BTreeMap<String, f64> {
    fn from(t: ToeplitzCoeffs) -> Self {
        t.coeffs.into_iter().map(|(m, c)| (m.to_string(), c)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Baseline,
    DistanceBias,
    Rope,
    PhaseField,
    ToeplitzLinear,
    PromptGauge,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Baseline => "baseline",
            KernelFamily::DistanceBias => "distance_bias",
            KernelFamily::Rope => "rope",
            KernelFamily::PhaseField => "phase_field",
            KernelFamily::ToeplitzLinear => "toeplitz_linear",
            KernelFamily::PromptGauge => "prompt_gauge",
        }
    }
}

/// The content profile φ in h = w · φ(<q, q'>).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// φ(c) = e^{βc}/β, φ'(c) = e^{βc}
    Exp { beta: f64 },
    /// φ(c) = c
    Linear,
}

impl Profile {
    /// (φ(c), φ'(c))
    #[inline(always)]
    pub fn value_and_slope(self, c: f64) -> (f64, f64) {
        match self {
            Profile::Exp { beta } => {
                let e = (beta * c).exp();
                (e / beta, e)
            }
            Profile::Linear => (c, 1.0),
        }
    }
}

/// A closed description of one kernel family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    Baseline {
        beta: f64,
    },
    DistanceBias {
        beta: f64,
        bias: Bias,
    },
    Rope {
        beta: f64,
        omega: f64,
        #[serde(default)]
        plane: RotationPlane,
    },
    PhaseField {
        beta: f64,
        field: PhaseField,
        #[serde(default)]
        plane: RotationPlane,
    },
    ToeplitzLinear {
        coeffs: ToeplitzCoeffs,
    },
    PromptGauge {
        beta: f64,
    },
}

impl KernelSpec {
    pub fn family(&self) -> KernelFamily {
        match self {
            KernelSpec::Baseline { .. } => KernelFamily::Baseline,
            KernelSpec::DistanceBias { .. } => KernelFamily::DistanceBias,
            KernelSpec::Rope { .. } => KernelFamily::Rope,
            KernelSpec::PhaseField { .. } => KernelFamily::PhaseField,
            KernelSpec::ToeplitzLinear { .. } => KernelFamily::ToeplitzLinear,
            KernelSpec::PromptGauge { .. } => KernelFamily::PromptGauge,
        }
    }

    /// Inverse temperature, for the exponential families.
    pub fn beta(&self) -> Option<f64> {
        match self {
            KernelSpec::Baseline { beta }
            | KernelSpec::DistanceBias { beta, .. }
            | KernelSpec::Rope { beta, .. }
            | KernelSpec::PhaseField { beta, .. }
            | KernelSpec::PromptGauge { beta } => Some(*beta),
            KernelSpec::ToeplitzLinear { .. } => None,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if let Some(beta) = self.beta() {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
            }
        }
        match self {
            KernelSpec::DistanceBias { bias, .. } => bias.validate(),
            KernelSpec::Rope { omega, plane, .. } => {
                if !omega.is_finite() {
                    return Err(Error::InvalidParameter("omega must be finite".into()));
                }
                plane.validate(d)
            }
            KernelSpec::PhaseField { plane, .. } => plane.validate(d),
            _ => Ok(()),
        }
    }

    pub fn profile(&self) -> Profile {
        match self.beta() {
            Some(beta) => Profile::Exp { beta },
            None => Profile::Linear,
        }
    }

    /// sup of the label weight, used by the energy ceiling.
    pub fn sup_bias(&self) -> f64 {
        match self {
            KernelSpec::DistanceBias { bias, .. } => bias.sup(),
            KernelSpec::ToeplitzLinear { coeffs } => coeffs.iter().map(|(_, c)| c.abs()).sum(),
            _ => 1.0,
        }
    }

    /// Whether position labels live on the torus for this kernel.
    pub fn is_periodic(&self) -> bool {
        match self {
            KernelSpec::DistanceBias { bias, .. } => bias.is_periodic(),
            KernelSpec::Rope { omega, .. } => {
                let turns = omega / TWO_PI;
                (turns - turns.round()).abs() < 1e-12
            }
            KernelSpec::PhaseField { field, .. } => {
                let k = field.knots();
                let gap = (k[k.len() - 1].1 - k[0].1) / TWO_PI;
                (gap - gap.round()).abs() < 1e-9
            }
            KernelSpec::ToeplitzLinear { .. } => true,
            KernelSpec::Baseline { .. } | KernelSpec::PromptGauge { .. } => false,
        }
    }

    /// Direct pointwise evaluation of h((x,ξ),(y,ζ)).
    pub fn eval(&self, x: &[f64], xi: &AuxLabel, y: &[f64], zeta: &AuxLabel) -> Result<f64> {
        let fam = self.family().name();
        match self {
            KernelSpec::Baseline { beta } => Ok(eval_baseline(x, y, *beta)),
            KernelSpec::DistanceBias { beta, bias } => Ok(eval_distance_bias(
                x,
                xi.position_or(fam)?,
                y,
                zeta.position_or(fam)?,
                *beta,
                bias,
            )),
            KernelSpec::Rope { beta, omega, plane } => Ok(eval_rope(
                x,
                xi.position_or(fam)?,
                y,
                zeta.position_or(fam)?,
                *beta,
                *omega,
                plane,
            )),
            KernelSpec::PhaseField { beta, field, plane } => Ok(eval_phase_field(
                x,
                xi.position_or(fam)?,
                y,
                zeta.position_or(fam)?,
                *beta,
                field,
                plane,
            )),
            KernelSpec::ToeplitzLinear { coeffs } => Ok(eval_toeplitz_linear(
                x,
                xi.position_or(fam)?,
                y,
                zeta.position_or(fam)?,
                coeffs,
            )),
            KernelSpec::PromptGauge { beta } => {
                eval_prompt_gauge(x, xi.prompt_gauge_or(fam)?, y, zeta.prompt_gauge_or(fam)?, *beta)
            }
        }
    }

    /// Ambient gradient ∇_x h((x,ξ),(y,ζ)), before tangent projection.
    pub fn grad_x(&self, x: &[f64], xi: &AuxLabel, y: &[f64], zeta: &AuxLabel) -> Result<Vec<f64>> {
        let fam = self.family().name();
        let scaled = |w: f64, v: Vec<f64>| v.into_iter().map(|c| c * w).collect::<Vec<_>>();
        match self {
            KernelSpec::Baseline { beta } => {
                Ok(scaled((beta * dot(x, y)).exp(), y.to_vec()))
            }
            KernelSpec::DistanceBias { beta, bias } => {
                let b = bias.value(xi.position_or(fam)?, zeta.position_or(fam)?);
                Ok(scaled(b * (beta * dot(x, y)).exp(), y.to_vec()))
            }
            KernelSpec::Rope { beta, omega, plane } => {
                let (s, t) = (xi.position_or(fam)?, zeta.position_or(fam)?);
                let mut ry = y.to_vec();
                plane.rotate_in_place(omega * (t - s), &mut ry);
                Ok(scaled((beta * dot(x, &ry)).exp(), ry))
            }
            KernelSpec::PhaseField { beta, field, plane } => {
                let (s, t) = (xi.position_or(fam)?, zeta.position_or(fam)?);
                let mut ry = y.to_vec();
                plane.rotate_in_place(phase_difference(field, s, t), &mut ry);
                Ok(scaled((beta * dot(x, &ry)).exp(), ry))
            }
            KernelSpec::ToeplitzLinear { coeffs } => {
                let (s, t) = (xi.position_or(fam)?, zeta.position_or(fam)?);
                Ok(scaled(coeffs.profile(t - s), y.to_vec()))
            }
            KernelSpec::PromptGauge { beta } => {
                let pz = xi.prompt_gauge_or(fam)?;
                let pw = zeta.prompt_gauge_or(fam)?;
                check_gauge(pz)?;
                check_gauge(pw)?;
                let qy = pz.apply(&pw.apply_transpose(y));
                Ok(scaled((beta * dot(x, &qy)).exp(), qy))
            }
        }
    }

    /// The gauge G(ξ) with h = w · φ(<G(ξ)x, G(ζ)y>); `None` means identity.
    pub fn gauge(&self, label: &AuxLabel, d: usize) -> Result<Option<OrthogonalGauge>> {
        let fam = self.family().name();
        match self {
            KernelSpec::Baseline { .. } => Ok(None),
            KernelSpec::DistanceBias { .. } | KernelSpec::ToeplitzLinear { .. } => {
                label.position_or(fam)?;
                Ok(None)
            }
            KernelSpec::Rope { omega, plane, .. } => {
                Ok(Some(plane.matrix(omega * label.position_or(fam)?, d)))
            }
            KernelSpec::PhaseField { field, plane, .. } => {
                Ok(Some(plane.matrix(-field.eval(label.position_or(fam)?), d)))
            }
            KernelSpec::PromptGauge { .. } => {
                let g = label.prompt_gauge_or(fam)?;
                check_gauge(g)?;
                Ok(Some(g.transpose()))
            }
        }
    }

    /// The label weight w(ξ, ζ).
    pub fn pair_weight(&self, xi: &AuxLabel, zeta: &AuxLabel) -> Result<f64> {
        let fam = self.family().name();
        match self {
            KernelSpec::DistanceBias { bias, .. } => {
                Ok(bias.value(xi.position_or(fam)?, zeta.position_or(fam)?))
            }
            KernelSpec::ToeplitzLinear { coeffs } => {
                Ok(coeffs.profile(zeta.position_or(fam)? - xi.position_or(fam)?))
            }
            _ => Ok(1.0),
        }
    }

    /// Whether the label weight is identically 1 (no n×n weight table needed).
    pub fn has_unit_weights(&self) -> bool {
        !matches!(self, KernelSpec::DistanceBias { .. } | KernelSpec::ToeplitzLinear { .. })
    }
}

fn check_gauge(g: &OrthogonalGauge) -> Result<()> {
    let r = g.orthogonality_residual();
    if r > 1e-8 {
        return Err(Error::NotOrthogonal(r));
    }
    Ok(())
}

/// β⁻¹ e^{β<x,y>}
#[inline]
pub fn eval_baseline(x: &[f64], y: &[f64], beta: f64) -> f64 {
    (beta * dot(x, y)).exp() / beta
}

/// β⁻¹ exp(β<x, R_{ω(t−s)} y>)
pub fn eval_rope(x: &[f64], s: f64, y: &[f64], t: f64, beta: f64, omega: f64, plane: &RotationPlane) -> f64 {
    let mut ry = y.to_vec();
    plane.rotate_in_place(omega * (t - s), &mut ry);
    eval_baseline(x, &ry, beta)
}

/// b(s,t) β⁻¹ e^{β<x,y>}
pub fn eval_distance_bias(x: &[f64], s: f64, y: &[f64], t: f64, beta: f64, bias: &Bias) -> f64 {
    bias.value(s, t) * eval_baseline(x, y, beta)
}

/// β⁻¹ exp(β<x, R_{g(s,t)} y>), g(s,t) = −(ψ(t) − ψ(s)) mod 2π
pub fn eval_phase_field(
    x: &[f64],
    s: f64,
    y: &[f64],
    t: f64,
    beta: f64,
    field: &PhaseField,
    plane: &RotationPlane,
) -> f64 {
    let mut ry = y.to_vec();
    plane.rotate_in_place(phase_difference(field, s, t), &mut ry);
    eval_baseline(x, &ry, beta)
}

/// c(t − s) <x, y>
pub fn eval_toeplitz_linear(x: &[f64], s: f64, y: &[f64], t: f64, coeffs: &ToeplitzCoeffs) -> f64 {
    coeffs.profile(t - s) * dot(x, y)
}

/// β⁻¹ exp(β<x, Ψ(z)Ψ(w)ᵀ y>)
pub fn eval_prompt_gauge(
    x: &[f64],
    psi_z: &OrthogonalGauge,
    y: &[f64],
    psi_w: &OrthogonalGauge,
    beta: f64,
) -> Result<f64> {
    check_gauge(psi_z)?;
    check_gauge(psi_w)?;
    let qy = psi_z.apply(&psi_w.apply_transpose(y));
    Ok(eval_baseline(x, &qy, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{householder_gauge, random_unit, UnitVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    fn plane() -> RotationPlane {
        RotationPlane::default()
    }

    #[test]
    fn baseline_values() {
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        assert!((eval_baseline(&e1, &e1, 1.0) - E).abs() < 1e-15);
        assert!((eval_baseline(&e1, &e2, 1.0) - 1.0).abs() < 1e-15);
        let k = KernelSpec::Baseline { beta: 1.0 };
        let g = k.grad_x(&e1, &AuxLabel::None, &e2, &AuxLabel::None).unwrap();
        assert_eq!(g, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn rope_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (beta, omega) = (1.3, 2.0 * PI);
        let u = random_unit(&mut rng, 3);
        for _ in 0..50 {
            let (s, t): (f64, f64) = (rng.random(), rng.random());
            let mut x = u.clone();
            plane().rotate_in_place(-omega * s, &mut x);
            let mut y = u.clone();
            plane().rotate_in_place(-omega * t, &mut y);
            let h = eval_rope(&x, s, &y, t, beta, omega, &plane());
            assert!((h - beta.exp() / beta).abs() < 1e-13);
            // s = t reduces to the baseline
            let h0 = eval_rope(&x, s, &y, s, beta, omega, &plane());
            assert!((h0 - eval_baseline(&x, &y, beta)).abs() < 1e-14);
        }
        // u fixed by the rotation plane
        let e3 = [0.0, 0.0, 1.0];
        assert!((eval_rope(&e3, 0.2, &e3, 0.9, 1.0, 2.0 * PI, &plane()) - E).abs() < 1e-15);
    }

    #[test]
    fn distance_bias_values() {
        let x = [0.0, 0.6, 0.8];
        let exp = Bias::ExpDecay { lambda: 3.0 };
        assert!((eval_distance_bias(&x, 0.4, &x, 0.4, 1.0, &exp) - E).abs() < 1e-15);
        let g = Bias::GaussianTorus { epsilon: 0.02, length: 0.1 };
        let want = 0.02 + (-0.25f64 / 0.02).exp();
        assert!((g.value(0.1, 0.6) - want).abs() < 1e-16);
        assert!((g.value(0.1, 0.6) - 0.02).abs() < 1e-5);
        // periodic: 0.05 and 0.95 are 0.1 apart
        assert!((g.value(0.05, 0.95) - (0.02 + (-0.5f64).exp())).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for bias in [exp, g] {
            for _ in 0..1000 {
                let (s, t): (f64, f64) = (rng.random(), rng.random());
                assert!((bias.value(s, t) - bias.value(t, s)).abs() < 1e-15);
                assert!(bias.value(s, t) >= 0.0);
            }
        }
        assert!(Bias::ExpDecay { lambda: 0.0 }.validate().is_err());
        assert!(Bias::GaussianTorus { epsilon: -1.0, length: 0.1 }.validate().is_err());
    }

    #[test]
    fn phase_field_values() {
        let omega = 2.0 * PI;
        let lin = PhaseField::linear(-omega, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let beta = 0.7;
        for _ in 0..100 {
            let x = random_unit(&mut rng, 3);
            let y = random_unit(&mut rng, 3);
            let (s, t): (f64, f64) = (rng.random(), rng.random());
            let a = eval_phase_field(&x, s, &y, t, beta, &lin, &plane());
            let b = eval_rope(&x, s, &y, t, beta, omega, &plane());
            assert!((a - b).abs() < 1e-13 * b.abs().max(1.0));
        }

        let psi = PhaseField::sampled(257, |s| 2.0 * PI * s + 0.8 * (4.0 * PI * s).sin()).unwrap();
        let u = random_unit(&mut rng, 3);
        for _ in 0..100 {
            let (s, t): (f64, f64) = (rng.random(), rng.random());
            let mut x = u.clone();
            plane().rotate_in_place(psi.eval(s), &mut x);
            let mut y = u.clone();
            plane().rotate_in_place(psi.eval(t), &mut y);
            let h = eval_phase_field(&x, s, &y, t, beta, &psi, &plane());
            assert!((h - beta.exp() / beta).abs() < 1e-13);
            let g1 = phase_difference(&psi, s, t);
            let g2 = phase_difference(&psi, t, s);
            assert!((g1 + g2).abs() < 1e-14);
            assert!(g1 > -PI && g1 <= PI);
        }
    }

    #[test]
    fn phase_field_interpolation() {
        let f = PhaseField::from_knots(vec![(0.0, 0.0), (0.5, 0.0), (0.5, PI), (1.0, PI)]).unwrap();
        assert_eq!(f.eval(0.25), 0.0);
        assert_eq!(f.eval(0.5), PI);
        assert_eq!(f.eval(0.75), PI);
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.eval(2.0), PI);
        let g = PhaseField::linear(2.0, 1.0);
        assert!((g.eval(0.25) - 1.5).abs() < 1e-15);
        assert!(PhaseField::from_knots(vec![(0.5, 0.0), (0.2, 1.0)]).is_err());
        assert!(PhaseField::from_knots(vec![]).is_err());
    }

    #[test]
    fn toeplitz_values() {
        let c = ToeplitzCoeffs::cosine(1);
        assert_eq!(c.get(1), 0.5);
        assert_eq!(c.get(-1), 0.5);
        let x = [0.0, 0.0, 1.0];
        assert!((eval_toeplitz_linear(&x, 0.3, &x, 0.3, &c) - 1.0).abs() < 1e-15);
        let y = [0.6, 0.8, 0.0];
        assert!(eval_toeplitz_linear(&x, 0.1, &y, 0.35, &c).abs() < 1e-15);
        assert!(eval_toeplitz_linear(&y, 0.1, &[1.0, 0.0, 0.0], 0.35, &c).abs() < 1e-15);

        // along the maximizing circle: c(Δ)<x(s),x(t)> = cos²(2πΔ)
        let circ = |s: f64| [(2.0 * PI * s).cos(), (2.0 * PI * s).sin(), 0.0];
        let (s, t) = (0.13, 0.71);
        let h = eval_toeplitz_linear(&circ(s), s, &circ(t), t, &c);
        assert!((h - (2.0 * PI * (t - s)).cos().powi(2)).abs() < 1e-14);

        let k = KernelSpec::ToeplitzLinear { coeffs: c.clone() };
        let g = k.grad_x(&x, &AuxLabel::Position(0.1), &y, &AuxLabel::Position(0.2)).unwrap();
        let want = (2.0 * PI * 0.1).cos();
        for (gi, yi) in g.iter().zip(&y) {
            assert!((gi - want * yi).abs() < 1e-15);
        }

        let mut bad = BTreeMap::new();
        bad.insert(2, 1.0);
        assert!(ToeplitzCoeffs::new(bad).is_err());
        let mut far = BTreeMap::new();
        far.insert(17, 1.0);
        far.insert(-17, 1.0);
        assert!(ToeplitzCoeffs::new(far).is_err());
    }

    #[test]
    fn toeplitz_argmax_ties() {
        let mut m = BTreeMap::new();
        m.insert(-2, 0.4);
        m.insert(2, 0.4);
        m.insert(-1, 0.4);
        m.insert(1, 0.4);
        m.insert(0, 0.1);
        assert_eq!(ToeplitzCoeffs::new(m).unwrap().argmax(), (1, 0.4));
    }

    #[test]
    fn prompt_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 4;
        let beta = 2.0;
        let u = UnitVector::random(&mut rng, d);
        let gz = householder_gauge(&u, &UnitVector::random(&mut rng, d)).unwrap();
        let gw = householder_gauge(&u, &UnitVector::random(&mut rng, d)).unwrap();
        let x = gz.apply(u.as_slice());
        let y = gw.apply(u.as_slice());
        let h = eval_prompt_gauge(&x, &gz, &y, &gw, beta).unwrap();
        assert!((h - beta.exp() / beta).abs() < 1e-13);

        let id = OrthogonalGauge::identity(d);
        let a = random_unit(&mut rng, d);
        let b = random_unit(&mut rng, d);
        let h = eval_prompt_gauge(&a, &id, &b, &id, beta).unwrap();
        assert!((h - eval_baseline(&a, &b, beta)).abs() < 1e-15);

        for _ in 0..100 {
            let a = random_unit(&mut rng, d);
            let b = random_unit(&mut rng, d);
            let h1 = eval_prompt_gauge(&a, &gz, &b, &gw, beta).unwrap();
            let h2 = eval_prompt_gauge(&b, &gw, &a, &gz, beta).unwrap();
            assert!((h1 - h2).abs() < 1e-12);
        }

        let skew = OrthogonalGauge::from_rows_unchecked(2, vec![1.0, 0.1, 0.0, 1.0]).unwrap();
        assert!(matches!(
            eval_prompt_gauge(&[1.0, 0.0], &skew, &[1.0, 0.0], &skew, 1.0),
            Err(Error::NotOrthogonal(_))
        ));
    }

    #[test]
    fn label_mismatch_is_an_error() {
        let k = KernelSpec::Rope { beta: 1.0, omega: 1.0, plane: plane() };
        let x = [1.0, 0.0, 0.0];
        assert!(matches!(
            k.eval(&x, &AuxLabel::None, &x, &AuxLabel::Position(0.1)),
            Err(Error::LabelMismatch { .. })
        ));
        let p = KernelSpec::PromptGauge { beta: 1.0 };
        assert!(p.grad_x(&x, &AuxLabel::Position(0.1), &x, &AuxLabel::Position(0.1)).is_err());
    }

    #[test]
    fn serde_roundtrip_of_specs() {
        let k = KernelSpec::DistanceBias {
            beta: 1.0,
            bias: Bias::GaussianTorus { epsilon: 0.02, length: 0.1 },
        };
        let s = serde_json::to_string(&k).unwrap();
        let back: KernelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(k, back);
        let t: KernelSpec =
            serde_json::from_str(r#"{"family":"toeplitz_linear","coeffs":{"1":0.5,"-1":0.5}}"#).unwrap();
        assert_eq!(t, KernelSpec::ToeplitzLinear { coeffs: ToeplitzCoeffs::cosine(1) });
        let r: KernelSpec = serde_json::from_str(r#"{"family":"rope","beta":1.0,"omega":6.0}"#).unwrap();
        assert_eq!(r, KernelSpec::Rope { beta: 1.0, omega: 6.0, plane: plane() });
    }
}

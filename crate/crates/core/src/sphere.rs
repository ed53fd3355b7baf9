//! Linear-algebra primitives on the unit sphere S^{d-1}.
//!
//! Everything here is a pure function of its inputs. Vectors are plain
//! `f64` slices in ambient coordinates; [`UnitVector`] is the checked
//! newtype used at API boundaries.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when a caller hands us something that should already be
/// a unit vector.
pub const UNIT_TOL: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Scales `v` to unit length in place and returns the previous norm.
#[inline]
pub fn normalize_in_place(v: &mut [f64]) -> f64 {
    let n = norm(v);
    let inv = 1.0 / n;
    v.iter_mut().for_each(|x| *x *= inv);
    n
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// A point on S^{d-1}, d >= 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `coords` onto the sphere.
    pub fn new(mut coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::DimensionTooSmall(coords.len()));
        }
        let n = norm(&coords);
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::ZeroVector(n));
        }
        normalize_in_place(&mut coords);
        Ok(Self(coords))
    }

    /// Wraps coordinates that are already unit length (within [`UNIT_TOL`]).
    pub fn from_unit(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::DimensionTooSmall(coords.len()));
        }
        let n = norm(&coords);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidParameter(format!(
                "expected a unit vector, norm is {n}"
            )));
        }
        Ok(Self(coords))
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    /// The standard basis vector e_i in R^d.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        if i >= d {
            return Err(Error::AxisOutOfRange { axis: i, dim: d });
        }
        let mut c = vec![0.0; d];
        c[i] = 1.0;
        Ok(Self(c))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Self {
        Self(random_unit(rng, d))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        UnitVector::new(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(u: UnitVector) -> Vec<f64> {
        u.0
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Uniform sample on S^{d-1} via a normalized Gaussian.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}

/// Uniform sample (w.r.t. surface measure) from the geodesic cap of the
/// given radius around `center`.
///
/// Draws a tangent vector uniformly in the disk of radius `radius`, accepts
/// it with the Jacobian of the exponential map `(sin ρ / ρ)^{d-2}`, then maps
/// it to the sphere.
pub fn sample_cap<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    if radius <= 0.0 {
        return center.to_vec();
    }
    loop {
        // uniform point in the tangent disk
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let mut t = project_tangent_raw(center, &g);
        let tn = norm(&t);
        if tn < 1e-300 {
            continue;
        }
        let u: f64 = rng.random();
        let rho = radius * u.powf(1.0 / (d as f64 - 1.0));
        let jac = if rho > 0.0 { (rho.sin() / rho).powi(d as i32 - 2) } else { 1.0 };
        let a: f64 = rng.random();
        if a > jac {
            continue;
        }
        t.iter_mut().for_each(|x| *x /= tn);
        let (s, c) = rho.sin_cos();
        let mut x: Vec<f64> = center.iter().zip(&t).map(|(ci, ti)| c * ci + s * ti).collect();
        normalize_in_place(&mut x);
        return x;
    }
}

#[inline]
pub(crate) fn project_tangent_raw(x: &[f64], v: &[f64]) -> Vec<f64> {
    let a = dot(x, v);
    v.iter().zip(x).map(|(vi, xi)| vi - a * xi).collect()
}

/// `v - <x, v> x`, the component of `v` tangent to the sphere at `x`.
pub fn project_tangent(x: &UnitVector, v: &[f64]) -> Result<Vec<f64>> {
    check_dim(x.dim(), v.len())?;
    Ok(project_tangent_raw(x.as_slice(), v))
}

/// Geodesic distance in [0, π]. The inner product is clamped before `acos`.
pub fn geodesic_angle(x: &UnitVector, y: &UnitVector) -> Result<f64> {
    check_dim(x.dim(), y.dim())?;
    Ok(angle_between(x.as_slice(), y.as_slice()))
}

#[inline]
pub(crate) fn angle_between(x: &[f64], y: &[f64]) -> f64 {
    dot(x, y).clamp(-1.0, 1.0).acos()
}

/// The oriented 2-plane a planar rotation acts on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationPlane {
    /// span{e_a, e_b}, rotating e_a toward e_b.
    Coordinate { a: usize, b: usize },
    /// span{a, b} for orthonormal a, b.
    Span { a: Vec<f64>, b: Vec<f64> },
}

impl Default for RotationPlane {
    fn default() -> Self {
        RotationPlane::Coordinate { a: 0, b: 1 }
    }
}

impl RotationPlane {
    pub fn coordinate(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::DegeneratePlane(a));
        }
        Ok(RotationPlane::Coordinate { a, b })
    }

    /// General plane through two orthonormal spanning vectors.
    pub fn span(a: &UnitVector, b: &UnitVector) -> Result<Self> {
        check_dim(a.dim(), b.dim())?;
        let c = a.dot(b);
        if c.abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "plane vectors must be orthogonal, <a,b> = {c:e}"
            )));
        }
        Ok(RotationPlane::Span { a: a.as_slice().to_vec(), b: b.as_slice().to_vec() })
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            RotationPlane::Coordinate { a, b } => {
                if a == b {
                    return Err(Error::DegeneratePlane(*a));
                }
                for &axis in [a, b] {
                    if axis >= d {
                        return Err(Error::AxisOutOfRange { axis, dim: d });
                    }
                }
                Ok(())
            }
            RotationPlane::Span { a, b } => {
                check_dim(d, a.len())?;
                check_dim(d, b.len())
            }
        }
    }

    /// Rotates `v` in place by `angle` within this plane.
    #[inline]
    pub fn rotate_in_place(&self, angle: f64, v: &mut [f64]) {
        let (s, c) = angle.sin_cos();
        match self {
            RotationPlane::Coordinate { a, b } => {
                let (xa, xb) = (v[*a], v[*b]);
                v[*a] = c * xa - s * xb;
                v[*b] = s * xa + c * xb;
            }
            RotationPlane::Span { a, b } => {
                let pa = dot(a, v);
                let pb = dot(b, v);
                for k in 0..v.len() {
                    v[k] += (c - 1.0) * (pa * a[k] + pb * b[k]) + s * (pa * b[k] - pb * a[k]);
                }
            }
        }
    }

    /// The d×d matrix of the rotation by `angle`.
    pub fn matrix(&self, angle: f64, d: usize) -> OrthogonalGauge {
        let mut m = vec![0.0; d * d];
        let mut col = vec![0.0; d];
        for j in 0..d {
            col.iter_mut().for_each(|x| *x = 0.0);
            col[j] = 1.0;
            self.rotate_in_place(angle, &mut col);
            for i in 0..d {
                m[i * d + j] = col[i];
            }
        }
        OrthogonalGauge { d, data: m }
    }
}

/// R_θ restricted to a fixed plane, identity on its orthogonal complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarRotation {
    pub plane: RotationPlane,
    pub angle: f64,
}

impl PlanarRotation {
    pub fn new(axis_a: usize, axis_b: usize, angle: f64) -> Result<Self> {
        Ok(Self { plane: RotationPlane::coordinate(axis_a, axis_b)?, angle })
    }

    pub fn in_plane(plane: RotationPlane, angle: f64) -> Self {
        Self { plane, angle }
    }

    pub fn then(&self, angle: f64) -> Self {
        Self { plane: self.plane.clone(), angle: self.angle + angle }
    }
}

/// Applies the rotation. Coordinates outside a coordinate plane are left
/// untouched; no renormalization is performed.
pub fn apply_rotation(r: &PlanarRotation, x: &UnitVector) -> Result<UnitVector> {
    r.plane.validate(x.dim())?;
    let mut v = x.as_slice().to_vec();
    r.plane.rotate_in_place(r.angle, &mut v);
    Ok(UnitVector(v))
}

/// A d×d orthogonal matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalGauge {
    d: usize,
    data: Vec<f64>,
}

impl OrthogonalGauge {
    pub const TOL: f64 = 1e-10;

    /// Checked constructor: `‖MᵀM − I‖_F` must be below [`Self::TOL`].
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        let g = Self::from_rows_unchecked(d, data)?;
        let r = g.orthogonality_residual();
        if r > Self::TOL {
            return Err(Error::NotOrthogonal(r));
        }
        Ok(g)
    }

    /// Shape-checked only. Orthogonality is verified by consumers that
    /// depend on it.
    pub fn from_rows_unchecked(d: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(d * d, data.len())?;
        Ok(Self { d, data })
    }

    pub fn identity(d: usize) -> Self {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = 1.0;
        }
        Self { d, data }
    }

    pub fn minus_identity(d: usize) -> Self {
        let mut g = Self::identity(d);
        g.data.iter_mut().for_each(|x| *x = -*x);
        g
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    /// M v.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.apply_into(v, &mut out);
        out
    }

    #[inline]
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let d = self.d;
        for i in 0..d {
            out[i] = dot(&self.data[i * d..(i + 1) * d], v);
        }
    }

    /// Mᵀ v.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.apply_transpose_into(v, &mut out);
        out
    }

    #[inline]
    pub fn apply_transpose_into(&self, v: &[f64], out: &mut [f64]) {
        let d = self.d;
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..d {
            let vi = v[i];
            let row = &self.data[i * d..(i + 1) * d];
            for j in 0..d {
                out[j] += row[j] * vi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let d = self.d;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                data[j * d + i] = self.data[i * d + j];
            }
        }
        Self { d, data }
    }

    /// self · other.
    pub fn compose(&self, other: &OrthogonalGauge) -> Self {
        let d = self.d;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                for j in 0..d {
                    data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        Self { d, data }
    }

    /// Frobenius norm of MᵀM − I.
    pub fn orthogonality_residual(&self) -> f64 {
        let d = self.d;
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += self.data[k * d + i] * self.data[k * d + j];
                }
                let e = s - if i == j { 1.0 } else { 0.0 };
                acc += e * e;
            }
        }
        acc.sqrt()
    }
}

/// Below this ‖u + g‖ the symmetric form `2vvᵀ − I` loses accuracy and the
/// reflection `I − 2wwᵀ`, w ∝ u − g, is used instead.
const HOUSEHOLDER_SWITCH: f64 = 1e-3;

/// An orthogonal Ψ with Ψu = g.
///
/// Uses `2vvᵀ − I` with `v = (u+g)/‖u+g‖`, and `−I` when `g = −u` exactly.
/// In the thin band where `g` is numerically close to but not exactly `−u`
/// the plain Householder reflection through `u − g` is returned.
pub fn householder_gauge(u: &UnitVector, g: &UnitVector) -> Result<OrthogonalGauge> {
    check_dim(u.dim(), g.dim())?;
    let d = u.dim();
    let (u, g) = (u.as_slice(), g.as_slice());
    let s: Vec<f64> = u.iter().zip(g).map(|(a, b)| a + b).collect();
    let sn = norm(&s);
    if sn == 0.0 {
        return Ok(OrthogonalGauge::minus_identity(d));
    }
    let mut data = vec![0.0; d * d];
    if sn >= HOUSEHOLDER_SWITCH {
        let v: Vec<f64> = s.iter().map(|x| x / sn).collect();
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = 2.0 * v[i] * v[j] - if i == j { 1.0 } else { 0.0 };
            }
        }
    } else {
        let mut w: Vec<f64> = u.iter().zip(g).map(|(a, b)| a - b).collect();
        normalize_in_place(&mut w);
        for i in 0..d {
            for j in 0..d {
                data[i * d + j] = if i == j { 1.0 } else { 0.0 } - 2.0 * w[i] * w[j];
            }
        }
    }
    Ok(OrthogonalGauge { d, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn e(d: usize, i: usize) -> UnitVector {
        UnitVector::basis(d, i).unwrap()
    }

    #[test]
    fn tangent_projection_examples() {
        let x = e(3, 0);
        assert_eq!(project_tangent(&x, &[1.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(project_tangent(&x, &[1.0, 1.0, 0.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(project_tangent(&x, &[1.0, 0.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = UnitVector::random(&mut rng, 5);
            let v = random_unit(&mut rng, 5);
            let p = project_tangent(&x, &v).unwrap();
            assert!(dot(x.as_slice(), &p).abs() < 1e-14);
        }
    }

    #[test]
    fn rotation_examples() {
        let r = PlanarRotation::new(0, 1, PI / 2.0).unwrap();
        let y = apply_rotation(&r, &e(3, 0)).unwrap();
        assert!((y.as_slice()[0]).abs() < 1e-16 && (y.as_slice()[1] - 1.0).abs() < 1e-16);
        let r = PlanarRotation::new(0, 1, 1.234).unwrap();
        assert_eq!(apply_rotation(&r, &e(3, 2)).unwrap(), e(3, 2));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = UnitVector::random(&mut rng, 4);
        let r = PlanarRotation::new(0, 1, 2.0 * PI / 3.0).unwrap();
        let mut y = x.clone();
        for _ in 0..3 {
            y = apply_rotation(&r, &y).unwrap();
        }
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_axis_errors() {
        let r = PlanarRotation::new(0, 3, 0.1).unwrap();
        assert!(matches!(
            apply_rotation(&r, &e(3, 0)),
            Err(Error::AxisOutOfRange { axis: 3, dim: 3 })
        ));
        assert!(PlanarRotation::new(1, 1, 0.1).is_err());
    }

    #[test]
    fn span_plane_matches_coordinate_plane() {
        let plane = RotationPlane::span(&e(4, 0), &e(4, 1)).unwrap();
        let coord = RotationPlane::coordinate(0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_unit(&mut rng, 4);
        let (mut a, mut b) = (x.clone(), x);
        plane.rotate_in_place(0.7, &mut a);
        coord.rotate_in_place(0.7, &mut b);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn householder_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = UnitVector::random(&mut rng, 4);
        let psi = householder_gauge(&u, &u).unwrap();
        let pu = psi.apply(u.as_slice());
        for (a, b) in pu.iter().zip(u.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
        for i in 0..4 {
            for j in 0..4 {
                let want = 2.0 * u.as_slice()[i] * u.as_slice()[j] - if i == j { 1.0 } else { 0.0 };
                assert!((psi.get(i, j) - want).abs() < 1e-15);
            }
        }
        assert_eq!(householder_gauge(&u, &u.neg()).unwrap(), OrthogonalGauge::minus_identity(4));

        // nearly antipodal: the reflection branch still maps u onto g
        let mut g = u.neg().into_inner();
        g[0] += 1e-9;
        let g = UnitVector::new(g).unwrap();
        let psi = householder_gauge(&u, &g).unwrap();
        let pu = psi.apply(u.as_slice());
        for (a, b) in pu.iter().zip(g.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(psi.orthogonality_residual() < 1e-12);
    }

    #[test]
    fn householder_residual_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for &d in &[2usize, 3, 8, 64] {
            for _ in 0..1000 {
                let u = UnitVector::random(&mut rng, d);
                let g = UnitVector::random(&mut rng, d);
                let psi = householder_gauge(&u, &g).unwrap();
                assert!(psi.orthogonality_residual() < 1e-10);
                let pu = psi.apply(u.as_slice());
                for (a, b) in pu.iter().zip(g.as_slice()) {
                    assert!((a - b).abs() < 1e-12, "d={d}");
                }
            }
        }
    }

    #[test]
    fn angles() {
        assert_eq!(geodesic_angle(&e(3, 0), &e(3, 0)).unwrap(), 0.0);
        assert!((geodesic_angle(&e(3, 0), &e(3, 1)).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!((geodesic_angle(&e(3, 0), &e(3, 0).neg()).unwrap() - PI).abs() < 1e-15);
        // roundoff above 1 is clamped rather than producing NaN
        let x = UnitVector::from_raw(vec![1.0 + 1e-16, 0.0, 0.0]);
        assert_eq!(geodesic_angle(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn cap_samples_stay_in_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let c = e(3, 2);
        for _ in 0..500 {
            let x = sample_cap(&mut rng, c.as_slice(), 0.3);
            assert!((norm(&x) - 1.0).abs() < 1e-14);
            assert!(angle_between(&x, c.as_slice()) <= 0.3 + 1e-12);
        }
        assert_eq!(sample_cap(&mut rng, c.as_slice(), 0.0), c.as_slice().to_vec());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec_in(d: usize) -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(-1.0f64..1.0, d)
                .prop_filter("nonzero", |v| norm(v) > 1e-3)
        }

        proptest! {
            #[test]
            fn projection_is_orthogonal_and_idempotent(x in vec_in(6), v in vec_in(6)) {
                let x = UnitVector::new(x).unwrap();
                let p = project_tangent(&x, &v).unwrap();
                let pp = project_tangent(&x, &p).unwrap();
                prop_assert!(dot(x.as_slice(), &p).abs() < 1e-14);
                for (a, b) in p.iter().zip(&pp) {
                    prop_assert!((a - b).abs() < 1e-14);
                }
            }

            #[test]
            fn rotations_compose_and_preserve_norm(x in vec_in(5), a in -7.0f64..7.0, b in -7.0f64..7.0) {
                let x = UnitVector::new(x).unwrap();
                let ra = PlanarRotation::new(1, 3, a).unwrap();
                let rb = PlanarRotation::new(1, 3, b).unwrap();
                let ab = apply_rotation(&rb, &apply_rotation(&ra, &x).unwrap()).unwrap();
                let ba = apply_rotation(&ra, &apply_rotation(&rb, &x).unwrap()).unwrap();
                let sum = apply_rotation(&ra.then(b), &x).unwrap();
                prop_assert!((norm(ab.as_slice()) - 1.0).abs() < 1e-13);
                for k in 0..5 {
                    prop_assert!((ab.as_slice()[k] - sum.as_slice()[k]).abs() < 1e-12);
                    prop_assert!((ab.as_slice()[k] - ba.as_slice()[k]).abs() < 1e-13);
                }
                prop_assert_eq!(ab.as_slice()[0], x.as_slice()[0]);
                prop_assert_eq!(ab.as_slice()[2], x.as_slice()[2]);
            }
        }
    }
}

//! Finite-particle dynamics: the system type, the mean force, the projected
//! Heun integrator and the discrete energy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{AuxLabel, KernelSpec, Profile};
use crate::metrics::{self, MetricRow};
use crate::sphere::{dot, UnitVector, UNIT_TOL};

/// n paired states `(x_i, ξ_i)` on S^{d-1}, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    dim: usize,
    coords: Vec<f64>,
    labels: Vec<AuxLabel>,
}

impl ParticleSystem {
    pub fn new(states: Vec<UnitVector>, labels: Vec<AuxLabel>) -> Result<Self> {
        let dim = states.first().map(|s| s.dim()).ok_or(Error::TooFewParticles { need: 1, got: 0 })?;
        if states.len() != labels.len() {
            return Err(Error::CountMismatch(states.len(), labels.len()));
        }
        let mut coords = Vec::with_capacity(states.len() * dim);
        for s in &states {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
            }
            coords.extend_from_slice(s.as_slice());
        }
        Ok(Self { dim, coords, labels })
    }

    /// Builds from flat row-major coordinates, checking that each row is unit.
    pub fn from_flat(dim: usize, coords: Vec<f64>, labels: Vec<AuxLabel>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::DimensionTooSmall(dim));
        }
        if coords.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch { expected: dim * labels.len(), got: coords.len() });
        }
        if labels.is_empty() {
            return Err(Error::TooFewParticles { need: 1, got: 0 });
        }
        for row in coords.chunks(dim) {
            let r = dot(row, row).sqrt();
            if (r - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidParameter(format!("state has norm {r}, expected 1")));
            }
        }
        Ok(Self { dim, coords, labels })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> std::slice::Chunks<'_, f64> {
        self.coords.chunks(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn unit(&self, i: usize) -> UnitVector {
        UnitVector::from_raw(self.state(i).to_vec())
    }

    pub fn labels(&self) -> &[AuxLabel] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &AuxLabel {
        &self.labels[i]
    }

    /// max_i |‖x_i‖ − 1|
    pub fn max_norm_defect(&self) -> f64 {
        self.states().map(|x| (dot(x, x).sqrt() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Particle `k` of the result is particle `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::CountMismatch(perm.len(), self.n()));
        }
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut labels = Vec::with_capacity(self.n());
        for &p in perm {
            coords.extend_from_slice(self.state(p));
            labels.push(self.labels[p].clone());
        }
        Ok(Self { dim: self.dim, coords, labels })
    }

    /// Each particle repeated `times` times consecutively; the empirical law
    /// is unchanged.
    pub fn replicated(&self, times: usize) -> Self {
        let mut coords = Vec::with_capacity(self.coords.len() * times);
        let mut labels = Vec::with_capacity(self.n() * times);
        for i in 0..self.n() {
            for _ in 0..times {
                coords.extend_from_slice(self.state(i));
                labels.push(self.labels[i].clone());
            }
        }
        Self { dim: self.dim, coords, labels }
    }

    /// The first `m` particles.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n() {
            return Err(Error::InvalidParameter(format!("cannot take {m} of {} particles", self.n())));
        }
        Ok(Self {
            dim: self.dim,
            coords: self.coords[..m * self.dim].to_vec(),
            labels: self.labels[..m].to_vec(),
        })
    }

    fn with_coords(&self, coords: Vec<f64>) -> Self {
        Self { dim: self.dim, coords, labels: self.labels.clone() }
    }
}

/// Integration and recording parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub snapshot_every: f64,
    #[serde(default = "default_stop_window")]
    pub stop_window: f64,
    #[serde(default = "default_stop_rel_tol")]
    pub stop_rel_tol: f64,
    /// Disable to always integrate to `t_final`.
    #[serde(default = "default_true")]
    pub early_stop: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub record_states: bool,
}

fn default_stop_window() -> f64 {
    1.0
}
fn default_stop_rel_tol() -> f64 {
    1e-8
}
fn default_true() -> bool {
    true
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_final: 20.0,
            snapshot_every: 0.5,
            stop_window: 1.0,
            stop_rel_tol: 1e-8,
            early_stop: true,
            seed: 0,
            record_states: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.dt.is_finite()
            && self.t_final.is_finite()
            && self.dt <= self.snapshot_every * (1.0 + 1e-12)
            && self.snapshot_every <= self.t_final * (1.0 + 1e-12)
            && self.stop_window > 0.0
            && self.stop_rel_tol > 0.0;
        if !ok {
            return Err(Error::Config(format!(
                "need 0 < dt <= snapshot_every <= t_final and positive stop tolerances, got dt={}, snapshot_every={}, t_final={}, stop_window={}, stop_rel_tol={}",
                self.dt, self.snapshot_every, self.t_final, self.stop_window, self.stop_rel_tol
            )));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn snapshot_stride(&self) -> usize {
        ((self.snapshot_every / self.dt).round() as usize).max(1)
    }

    pub fn stop_window_steps(&self) -> usize {
        ((self.stop_window / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

/// Snapshot series produced by [`simulate`].
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub production: Vec<f64>,
    pub metrics: Vec<MetricRow>,
    /// Full states at each snapshot, when requested.
    pub snapshots: Vec<ParticleSystem>,
    pub final_state: ParticleSystem,
    /// Integration steps taken.
    pub steps: usize,
    /// Time of the energy-plateau stop, if it happened before `t_final`.
    pub stopped_at: Option<f64>,
    /// Steps with E_{k+1} < E_k − 1e-9·(1+|E_k|).
    pub ascent_violations: usize,
    /// Most negative per-step increment relative to 1+|E|, or 0.
    pub worst_ascent: f64,
    /// Largest per-snapshot |‖x_i‖ − 1|.
    pub max_norm_defect: f64,
}

impl TrajectoryRecord {
    pub fn final_energy(&self) -> f64 {
        *self.energy.last().expect("at least the initial snapshot")
    }
}

/// Per-step tolerance of the discrete ascent property.
pub fn ascent_tolerance(e: f64) -> f64 {
    1e-9 * (1.0 + e.abs())
}

/// Label-dependent data of a kernel, precomputed once per label set.
///
/// Every kernel family is evaluated as `w_ij φ(<q_i, q_j>)` with
/// `q_i = G_i x_i`, which turns each pair into one dot product and one
/// exponential. The pair table is filled on the upper triangle only.
pub struct Interaction {
    n: usize,
    d: usize,
    profile: Profile,
    gauges: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

/// Outcome of one force evaluation.
pub struct ForceEval {
    /// Tangent velocities, row-major.
    pub velocity: Vec<f64>,
    /// Ambient mean forces F_i, row-major.
    pub force: Vec<f64>,
    pub energy: f64,
}

impl ForceEval {
    pub fn production(&self, n: usize) -> f64 {
        dot(&self.velocity, &self.velocity) / n as f64
    }
}

impl Interaction {
    pub fn new(kernel: &KernelSpec, labels: &[AuxLabel], d: usize) -> Result<Self> {
        kernel.validate(d)?;
        let n = labels.len();
        let mut gauges: Option<Vec<f64>> = None;
        for (i, l) in labels.iter().enumerate() {
            if let Some(g) = kernel.gauge(l, d)? {
                if g.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: g.dim() });
                }
                let buf = gauges.get_or_insert_with(|| {
                    let mut b = vec![0.0; n * d * d];
                    for k in 0..n {
                        for a in 0..d {
                            b[k * d * d + a * d + a] = 1.0;
                        }
                    }
                    b
                });
                buf[i * d * d..(i + 1) * d * d].copy_from_slice(g.as_slice());
            }
        }
        let weights = if kernel.has_unit_weights() {
            None
        } else {
            let mut w = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    w[i * n + j] = kernel.pair_weight(&labels[i], &labels[j])?;
                }
            }
            Some(w)
        };
        Ok(Self { n, d, profile: kernel.profile(), gauges, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Gauge variables q_i = G_i x_i, row-major.
    pub fn gauge_coords(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        match &self.gauges {
            None => x.to_vec(),
            Some(g) => {
                let mut q = vec![0.0; x.len()];
                q.par_chunks_mut(d).enumerate().for_each(|(i, qi)| {
                    let gi = &g[i * d * d..(i + 1) * d * d];
                    let xi = &x[i * d..(i + 1) * d];
                    for a in 0..d {
                        qi[a] = dot(&gi[a * d..(a + 1) * d], xi);
                    }
                });
                q
            }
        }
    }

    /// Forces, tangent velocities and energy at the flat state `x`.
    pub fn evaluate(&self, x: &[f64]) -> ForceEval {
        let (n, d) = (self.n, self.d);
        let q = self.gauge_coords(x);
        let profile = self.profile;
        let weights = self.weights.as_deref();

        // Upper-triangular pair table: slope w·φ' and value w·φ.
        let mut slope = vec![0.0; n * n];
        let mut value_rows = vec![0.0; n];
        slope
            .par_chunks_mut(n)
            .zip(value_rows.par_iter_mut())
            .enumerate()
            .for_each(|(i, (row, vsum))| {
                let qi = &q[i * d..(i + 1) * d];
                let mut off = 0.0;
                let mut diag = 0.0;
                for j in i..n {
                    let c = dot(qi, &q[j * d..(j + 1) * d]);
                    let (phi, dphi) = profile.value_and_slope(c);
                    let w = weights.map_or(1.0, |w| w[i * n + j]);
                    row[j] = w * dphi;
                    if j == i {
                        diag = w * phi;
                    } else {
                        off += w * phi;
                    }
                }
                *vsum = diag + 2.0 * off;
            });
        let energy = value_rows.iter().sum::<f64>() / (2.0 * (n * n) as f64);

        let inv_n = 1.0 / n as f64;
        let mut force = vec![0.0; n * d];
        let mut velocity = vec![0.0; n * d];
        force
            .par_chunks_mut(d)
            .zip(velocity.par_chunks_mut(d))
            .enumerate()
            .for_each(|(i, (fi, vi))| {
                let mut acc = [0.0f64; 16];
                let mut acc_heap;
                let acc: &mut [f64] = if d <= 16 {
                    &mut acc[..d]
                } else {
                    acc_heap = vec![0.0; d];
                    &mut acc_heap
                };
                for j in 0..n {
                    let k = if j >= i { slope[i * n + j] } else { slope[j * n + i] };
                    let qj = &q[j * d..(j + 1) * d];
                    for a in 0..d {
                        acc[a] += k * qj[a];
                    }
                }
                match &self.gauges {
                    None => {
                        for a in 0..d {
                            fi[a] = acc[a] * inv_n;
                        }
                    }
                    Some(g) => {
                        let gi = &g[i * d * d..(i + 1) * d * d];
                        for b in 0..d {
                            let mut s = 0.0;
                            for a in 0..d {
                                s += gi[a * d + b] * acc[a];
                            }
                            fi[b] = s * inv_n;
                        }
                    }
                }
                let xi = &x[i * d..(i + 1) * d];
                let r = dot(xi, fi);
                for a in 0..d {
                    vi[a] = fi[a] - r * xi[a];
                }
            });
        ForceEval { velocity, force, energy }
    }
}

fn check_finite(x: &[f64], d: usize, step: usize, time: f64) -> Result<()> {
    if let Some(k) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step, time, particle: k / d });
    }
    Ok(())
}

fn renormalize_rows(x: &mut [f64], d: usize) {
    x.par_chunks_mut(d).for_each(|row| {
        let r = dot(row, row).sqrt();
        for v in row.iter_mut() {
            *v /= r;
        }
    });
}

/// v_i = P⊥_{x_i}[(1/n) Σ_j ∇_x h((x_i,ξ_i),(x_j,ξ_j))], self term included.
pub fn velocity_field(sys: &ParticleSystem, k: &KernelSpec) -> Result<Vec<Vec<f64>>> {
    let it = Interaction::new(k, sys.labels(), sys.dim())?;
    Ok(it.evaluate(sys.coords()).velocity.chunks(sys.dim()).map(<[f64]>::to_vec).collect())
}

/// (1/2n²) Σ_{i,j} h, diagonal included.
pub fn energy(sys: &ParticleSystem, k: &KernelSpec) -> Result<f64> {
    let it = Interaction::new(k, sys.labels(), sys.dim())?;
    Ok(it.evaluate(sys.coords()).energy)
}

/// (1/n) Σ_i ‖v_i‖².
pub fn energy_production(sys: &ParticleSystem, k: &KernelSpec) -> Result<f64> {
    let it = Interaction::new(k, sys.labels(), sys.dim())?;
    Ok(it.evaluate(sys.coords()).production(sys.n()))
}

/// Same energy through pointwise kernel evaluation; O(n²) allocations, for
/// checks only.
pub fn energy_direct(sys: &ParticleSystem, k: &KernelSpec) -> Result<f64> {
    let n = sys.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += k.eval(sys.state(i), sys.label(i), sys.state(j), sys.label(j))?;
        }
    }
    Ok(total / (2.0 * (n * n) as f64))
}

/// Velocity field through pointwise kernel gradients, for checks only.
pub fn velocity_field_direct(sys: &ParticleSystem, k: &KernelSpec) -> Result<Vec<Vec<f64>>> {
    let (n, d) = (sys.n(), sys.dim());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut f = vec![0.0; d];
        for j in 0..n {
            let g = k.grad_x(sys.state(i), sys.label(i), sys.state(j), sys.label(j))?;
            for a in 0..d {
                f[a] += g[a] / n as f64;
            }
        }
        let x = sys.state(i);
        let r = dot(x, &f);
        out.push(f.iter().zip(x).map(|(fa, xa)| fa - r * xa).collect());
    }
    Ok(out)
}

/// One Heun step with renormalization after both stages. Returns the new
/// flat state and the first-stage evaluation (at the input state).
fn heun(it: &Interaction, x: &[f64], d: usize, dt: f64) -> (Vec<f64>, ForceEval) {
    let first = it.evaluate(x);
    let mut provisional: Vec<f64> = x.iter().zip(&first.velocity).map(|(a, v)| a + dt * v).collect();
    renormalize_rows(&mut provisional, d);
    let second = it.evaluate(&provisional);
    let half = 0.5 * dt;
    let mut next: Vec<f64> = x
        .iter()
        .zip(first.velocity.iter().zip(&second.velocity))
        .map(|(a, (k1, k2))| a + half * (k1 + k2))
        .collect();
    renormalize_rows(&mut next, d);
    (next, first)
}

/// One projected Heun step.
pub fn step_rk2(sys: &ParticleSystem, k: &KernelSpec, dt: f64) -> Result<ParticleSystem> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let it = Interaction::new(k, sys.labels(), sys.dim())?;
    let (next, _) = heun(&it, sys.coords(), sys.dim(), dt);
    check_finite(&next, sys.dim(), 1, dt)?;
    Ok(sys.with_coords(next))
}

/// Metrics computed at each snapshot: `(time, state, energy) -> row`.
pub type Observer<'a> = dyn FnMut(f64, &ParticleSystem, f64) -> Result<MetricRow> + 'a;

/// Integrates with the standard metric row at each snapshot.
pub fn simulate(sys: &ParticleSystem, k: &KernelSpec, cfg: &SimConfig) -> Result<TrajectoryRecord> {
    let mut obs = |_t: f64, s: &ParticleSystem, e: f64| metrics::standard_row(s, k, e);
    simulate_with(sys, k, cfg, &mut obs)
}

/// Integrates to `t_final` or to the energy plateau, calling `observe` at the
/// initial state, every `snapshot_every`, and at the final state.
pub fn simulate_with(
    sys: &ParticleSystem,
    k: &KernelSpec,
    cfg: &SimConfig,
    observe: &mut Observer<'_>,
) -> Result<TrajectoryRecord> {
    simulate_until(sys, k, cfg, observe, &mut |_| false)
}

/// As [`simulate_with`], additionally stopping after the first snapshot
/// whose metric row satisfies `halt`.
pub fn simulate_until(
    sys: &ParticleSystem,
    k: &KernelSpec,
    cfg: &SimConfig,
    observe: &mut Observer<'_>,
    halt: &mut dyn FnMut(&MetricRow) -> bool,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let d = sys.dim();
    let n = sys.n();
    let it = Interaction::new(k, sys.labels(), d)?;
    let total = cfg.total_steps();
    let stride = cfg.snapshot_stride();
    let window = cfg.stop_window_steps();

    let mut rec = TrajectoryRecord {
        times: Vec::new(),
        energy: Vec::new(),
        production: Vec::new(),
        metrics: Vec::new(),
        snapshots: Vec::new(),
        final_state: sys.clone(),
        steps: 0,
        stopped_at: None,
        ascent_violations: 0,
        worst_ascent: 0.0,
        max_norm_defect: sys.max_norm_defect(),
    };
    let push = |rec: &mut TrajectoryRecord, t: f64, x: &[f64], ev: &ForceEval, observe: &mut Observer<'_>| -> Result<()> {
        let state = sys.with_coords(x.to_vec());
        rec.times.push(t);
        rec.energy.push(ev.energy);
        rec.production.push(ev.production(n));
        rec.metrics.push(observe(t, &state, ev.energy)?);
        rec.max_norm_defect = rec.max_norm_defect.max(state.max_norm_defect());
        if cfg.record_states {
            rec.snapshots.push(state);
        }
        Ok(())
    };

    check_finite(sys.coords(), d, 0, 0.0)?;
    let mut x = sys.coords().to_vec();
    // Energies of the last `window + 1` states, oldest first.
    let mut history: std::collections::VecDeque<f64> = std::collections::VecDeque::with_capacity(window + 2);
    let mut prev_energy = f64::NAN;
    let mut step = 0;
    loop {
        let t = step as f64 * cfg.dt;
        let last = step == total;
        let ev_here;
        let next;
        if last {
            ev_here = it.evaluate(&x);
            next = None;
        } else {
            let (nx, ev) = heun(&it, &x, d, cfg.dt);
            ev_here = ev;
            next = Some(nx);
        }
        if !ev_here.energy.is_finite() {
            return Err(Error::NonFinite { step, time: t, particle: 0 });
        }
        if step > 0 {
            let inc = ev_here.energy - prev_energy;
            if inc < -ascent_tolerance(prev_energy) {
                rec.ascent_violations += 1;
            }
            rec.worst_ascent = rec.worst_ascent.min(inc / (1.0 + prev_energy.abs()));
        }
        prev_energy = ev_here.energy;
        history.push_back(ev_here.energy);
        if history.len() > window + 1 {
            history.pop_front();
        }
        let plateau = cfg.early_stop
            && history.len() == window + 1
            && !last
            && {
                let old = history[0];
                (ev_here.energy - old) / old.abs().max(f64::MIN_POSITIVE) < cfg.stop_rel_tol
            };
        let mut halted = false;
        if step % stride == 0 || last || plateau {
            push(&mut rec, t, &x, &ev_here, observe)?;
            halted = !last && halt(rec.metrics.last().expect("just pushed"));
        }
        if last || plateau || halted {
            if plateau || halted {
                rec.stopped_at = Some(t);
            }
            rec.steps = step;
            rec.final_state = sys.with_coords(x);
            return Ok(rec);
        }
        let nx = next.expect("not the last step");
        check_finite(&nx, d, step + 1, t + cfg.dt)?;
        x = nx;
        step += 1;
    }
}

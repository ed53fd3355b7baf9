//! Clustered initial data for distance-bias kernels, coarse-grained
//! couplings, the reduced K-point flow, and the two-time-scale report
//! (contraction time, trapping interval, first merger).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ascent_tolerance, simulate_until, ParticleSystem, SimConfig, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::experiments::rng::stream_rng;
use crate::kernels::{AuxLabel, Bias, KernelSpec};
use crate::metrics::{cluster_stats, collapse_gap, validate_partition, MetricRow};
use crate::sphere::{angle_between, dot, normalize_in_place, sample_cap, UnitVector};

/// K clusters: centers, cap radius r0, sizes and separation σ0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub centers: Vec<UnitVector>,
    pub r0: f64,
    pub sizes: Vec<usize>,
    pub sigma0: f64,
}

impl ClusterSpec {
    pub fn new(centers: Vec<UnitVector>, r0: f64, sizes: Vec<usize>, sigma0: f64) -> Result<Self> {
        let s = Self { centers, r0, sizes, sigma0 };
        s.validate()?;
        Ok(s)
    }

    /// K centers evenly spaced on the great circle of coordinates (0, 1).
    pub fn equatorial(k: usize, d: usize, r0: f64, sigma0: f64, sizes: Vec<usize>) -> Result<Self> {
        if d < 2 {
            return Err(Error::DimensionTooSmall(d));
        }
        let centers = (0..k)
            .map(|p| {
                let a = 2.0 * PI * p as f64 / k as f64;
                let mut v = vec![0.0; d];
                v[0] = a.cos();
                v[1] = a.sin();
                UnitVector::new(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(centers, r0, sizes, sigma0)
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k < 2 {
            return Err(Error::InvalidParameter(format!("need at least two clusters, got {k}")));
        }
        if self.sizes.len() != k {
            return Err(Error::CountMismatch(k, self.sizes.len()));
        }
        if let Some(p) = self.sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyCluster(p));
        }
        if !(0.0..0.25).contains(&self.r0) {
            return Err(Error::InvalidParameter(format!("cap radius must lie in [0, 1/4), got {}", self.r0)));
        }
        if !(self.sigma0 > 0.0 && self.sigma0 <= PI / 2.0) {
            return Err(Error::InvalidParameter(format!("sigma0 must lie in (0, pi/2], got {}", self.sigma0)));
        }
        let d = self.centers[0].dim();
        for c in &self.centers {
            if c.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: c.dim() });
            }
        }
        let min = self.min_center_angle();
        if min < 2.0 * self.sigma0 - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "centers are {min} apart, below 2*sigma0 = {}",
                2.0 * self.sigma0
            )));
        }
        Ok(())
    }

    pub fn min_center_angle(&self) -> f64 {
        let mut m = f64::INFINITY;
        for p in 0..self.k() {
            for q in p + 1..self.k() {
                m = m.min(angle_between(self.centers[p].as_slice(), self.centers[q].as_slice()));
            }
        }
        m
    }

    /// Contiguous index blocks, cluster p first after clusters 0..p.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut start = 0;
        self.sizes
            .iter()
            .map(|&s| {
                let b = (start..start + s).collect();
                start += s;
                b
            })
            .collect()
    }
}

/// Particles drawn uniformly from the caps, particle i at position (i+1)/n,
/// so clusters occupy contiguous position blocks. Particle i uses stream i
/// of `seed`.
pub fn clustered_init(spec: &ClusterSpec, seed: u64) -> Result<ParticleSystem> {
    spec.validate()?;
    let n = spec.n();
    let mut states = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut i = 0usize;
    for (p, &size) in spec.sizes.iter().enumerate() {
        for _ in 0..size {
            let mut rng = stream_rng(seed, i as u64);
            states.push(UnitVector::new(sample_cap(&mut rng, spec.centers[p].as_slice(), spec.r0))?);
            labels.push(AuxLabel::position((i + 1) as f64 / n as f64)?);
            i += 1;
        }
    }
    ParticleSystem::new(states, labels)
}

/// Coarse-grained positional couplings of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseCouplings {
    /// K×K row-major W_pq.
    pub w_matrix: Vec<f64>,
    /// w_p = n_p / n
    pub weights: Vec<f64>,
    pub b_par: f64,
    pub b_cross: f64,
    /// Λ = max_p Σ_q w_q W_pq
    pub lambda_max: f64,
    /// λ_cross = min_{p≠q} (w_q W_pq + w_p W_qp)
    pub lambda_cross: f64,
}

impl CoarseCouplings {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn w(&self, p: usize, q: usize) -> f64 {
        self.w_matrix[p * self.k() + q]
    }
}

/// b_ij = b(s_i, s_j) for the position labels of `sys`.
pub fn bias_matrix(sys: &ParticleSystem, bias: &Bias) -> Result<Vec<f64>> {
    let n = sys.n();
    let mut pos = Vec::with_capacity(n);
    for l in sys.labels() {
        match l {
            AuxLabel::Position(s) => pos.push(*s),
            other => {
                return Err(Error::LabelMismatch { family: "distance_bias", label: other.kind().into() });
            }
        }
    }
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = bias.value(pos[i], pos[j]);
        }
    }
    Ok(b)
}

/// W_pq, w_p, B_∥, B_×, Λ and λ_cross from an n×n bias matrix.
pub fn coarse_couplings(b: &[f64], n: usize, partition: &[Vec<usize>]) -> Result<CoarseCouplings> {
    if b.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: b.len() });
    }
    validate_partition(partition, n)?;
    if b.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidParameter("bias matrix must be finite and nonnegative".into()));
    }
    let k = partition.len();
    let nf = n as f64;
    let weights: Vec<f64> = partition.iter().map(|c| c.len() as f64 / nf).collect();
    let mut w_matrix = vec![0.0; k * k];
    for (p, cp) in partition.iter().enumerate() {
        for (q, cq) in partition.iter().enumerate() {
            let s: f64 = cp.iter().map(|&i| cq.iter().map(|&j| b[i * n + j]).sum::<f64>()).sum();
            w_matrix[p * k + q] = s / (cp.len() * cq.len()) as f64;
        }
    }
    let mut b_par = f64::INFINITY;
    let mut b_cross = 0.0f64;
    for (p, cp) in partition.iter().enumerate() {
        for &i in cp {
            b_par = b_par.min(cp.iter().map(|&j| b[i * n + j]).sum::<f64>() / nf);
            for (q, cq) in partition.iter().enumerate() {
                if q != p {
                    b_cross = b_cross.max(cq.iter().map(|&j| b[i * n + j]).sum::<f64>() / nf);
                }
            }
        }
    }
    let lambda_max = (0..k)
        .map(|p| (0..k).map(|q| weights[q] * w_matrix[p * k + q]).sum::<f64>())
        .fold(0.0, f64::max);
    let mut lambda_cross = f64::INFINITY;
    for p in 0..k {
        for q in 0..k {
            if p != q {
                lambda_cross = lambda_cross.min(weights[q] * w_matrix[p * k + q] + weights[p] * w_matrix[q * k + p]);
            }
        }
    }
    if k < 2 {
        lambda_cross = 0.0;
    }
    Ok(CoarseCouplings { w_matrix, weights, b_par, b_cross, lambda_max, lambda_cross })
}

/// ℰ^(K)(u) = (1/2β) Σ_{p,q} w_p w_q W_pq e^{β<u_p,u_q>}
pub fn reduced_energy(centers: &[f64], d: usize, c: &CoarseCouplings, beta: f64) -> f64 {
    let k = c.k();
    let mut s = 0.0;
    for p in 0..k {
        for q in 0..k {
            let e = (beta * dot(&centers[p * d..(p + 1) * d], &centers[q * d..(q + 1) * d])).exp();
            s += c.weights[p] * c.weights[q] * c.w(p, q) * e;
        }
    }
    s / (2.0 * beta)
}

fn reduced_velocity(u: &[f64], d: usize, c: &CoarseCouplings, beta: f64) -> Vec<f64> {
    let k = c.k();
    let mut v = vec![0.0; k * d];
    for p in 0..k {
        let up = &u[p * d..(p + 1) * d];
        let mut f = vec![0.0; d];
        for q in 0..k {
            let uq = &u[q * d..(q + 1) * d];
            let a = c.weights[q] * c.w(p, q) * (beta * dot(up, uq)).exp();
            for t in 0..d {
                f[t] += a * uq[t];
            }
        }
        let r = dot(up, &f);
        for t in 0..d {
            v[p * d + t] = f[t] - r * up[t];
        }
    }
    v
}

fn renormalized(mut x: Vec<f64>, d: usize) -> Vec<f64> {
    for row in x.chunks_mut(d) {
        normalize_in_place(row);
    }
    x
}

fn angle_row(u: &ParticleSystem) -> MetricRow {
    let k = u.n();
    let mut angles = Vec::new();
    let mut min = f64::INFINITY;
    for p in 0..k {
        for q in p + 1..k {
            let a = angle_between(u.state(p), u.state(q));
            min = min.min(a);
            angles.push(a);
        }
    }
    MetricRow {
        g_x: if k >= 2 { collapse_gap(u).unwrap_or(0.0) } else { 0.0 },
        theta_min: (k >= 2).then_some(min),
        center_angles: Some(angles),
        ..MetricRow::default()
    }
}

/// Integrates u̇_p = P⊥_{u_p}[Σ_q w_q W_pq e^{β<u_p,u_q>} u_q] with the
/// projected Heun scheme. The record's energy column holds ℰ^(K) and its
/// states are the K centers.
pub fn reduced_flow(centers: &[UnitVector], c: &CoarseCouplings, beta: f64, cfg: &SimConfig) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let k = centers.len();
    if k != c.k() {
        return Err(Error::CountMismatch(k, c.k()));
    }
    let d = centers.first().ok_or(Error::TooFewParticles { need: 1, got: 0 })?.dim();
    let snapshot = |x: &[f64]| ParticleSystem::from_flat(d, x.to_vec(), vec![AuxLabel::None; k]);
    let mut x: Vec<f64> = centers.iter().flat_map(|u| u.as_slice().to_vec()).collect();
    let total = cfg.total_steps();
    let stride = cfg.snapshot_stride();
    let mut rec = TrajectoryRecord {
        times: vec![],
        energy: vec![],
        production: vec![],
        metrics: vec![],
        snapshots: vec![],
        final_state: snapshot(&x)?,
        steps: total,
        stopped_at: None,
        ascent_violations: 0,
        worst_ascent: 0.0,
        max_norm_defect: 0.0,
    };
    let mut prev = reduced_energy(&x, d, c, beta);
    for step in 0..=total {
        let t = step as f64 * cfg.dt;
        let e = reduced_energy(&x, d, c, beta);
        if !e.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step, time: t, particle: 0 });
        }
        if step > 0 {
            let inc = e - prev;
            if inc < -ascent_tolerance(prev) {
                rec.ascent_violations += 1;
            }
            rec.worst_ascent = rec.worst_ascent.min(inc / (1.0 + prev.abs()));
        }
        prev = e;
        let v1 = reduced_velocity(&x, d, c, beta);
        if step % stride == 0 || step == total {
            let s = snapshot(&x)?;
            rec.times.push(t);
            rec.energy.push(e);
            rec.production.push(
                (0..k).map(|p| c.weights[p] * dot(&v1[p * d..(p + 1) * d], &v1[p * d..(p + 1) * d])).sum(),
            );
            rec.metrics.push(angle_row(&s));
            rec.max_norm_defect = rec.max_norm_defect.max(s.max_norm_defect());
            if cfg.record_states {
                rec.snapshots.push(s);
            }
        }
        if step == total {
            break;
        }
        let prov = renormalized(x.iter().zip(&v1).map(|(a, b)| a + cfg.dt * b).collect(), d);
        let v2 = reduced_velocity(&prov, d, c, beta);
        x = renormalized(
            x.iter().zip(v1.iter().zip(&v2)).map(|(a, (b, c2))| a + 0.5 * cfg.dt * (b + c2)).collect(),
            d,
        );
    }
    rec.final_state = snapshot(&x)?;
    Ok(rec)
}

/// First snapshot time with min_{p≠q} Θ_pq below `threshold`.
pub fn detect_merger(traj: &TrajectoryRecord, threshold: f64) -> Option<f64> {
    traj.times
        .iter()
        .zip(&traj.metrics)
        .find(|(_, m)| m.theta_min.is_some_and(|a| a < threshold))
        .map(|(t, _)| *t)
}

/// Thresholds of the two-time-scale report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetastabOptions {
    /// Trapping radius r; defaults to σ0/8.
    #[serde(default)]
    pub r: Option<f64>,
    /// Merger angle; defaults to σ0/2.
    #[serde(default)]
    pub merge_threshold: Option<f64>,
    /// A trapping plateau is flagged when T_m − T_f ≥ ratio · T_f.
    #[serde(default = "default_plateau_ratio")]
    pub plateau_ratio: f64,
    /// Stop each run at the first merger.
    #[serde(default = "default_true")]
    pub stop_at_merger: bool,
}

fn default_plateau_ratio() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

impl Default for MetastabOptions {
    fn default() -> Self {
        Self { r: None, merge_threshold: None, plateau_ratio: 1.0, stop_at_merger: true }
    }
}

/// One β of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetastabRun {
    pub beta: f64,
    #[serde(rename = "T_f")]
    pub t_f: Option<f64>,
    #[serde(rename = "T_m")]
    pub t_m: Option<f64>,
    pub t_merge: Option<f64>,
    /// e^β/β: one unit of simulation time in the clock of the kernel
    /// b(s,t) e^{β(<x,y>−1)}, where intra-cluster contraction runs at rate βB_∥.
    pub clock: f64,
    pub t_f_scaled: Option<f64>,
    pub t_merge_scaled: Option<f64>,
    pub max_center_deviation: Option<f64>,
    pub reduced_energy_final: Option<f64>,
    /// max deviation / (r + e^{−β(1−cos σ0)})
    pub fitted_c: Option<f64>,
    /// min_{p≠q} (1 − cos Θ_pq(T_f))
    pub delta_gap: Option<f64>,
    pub trapping_plateau: bool,
    /// Δ_p ≤ 2r and Θ_pq ≥ σ0 at every snapshot of [T_f, T_m].
    pub certificate_holds: bool,
    pub r: f64,
    pub couplings: CoarseCouplings,
    pub ascent_violations: usize,
    pub reduced_ascent_violations: usize,
}

/// Regression of log t_merge on β across the runs with a merger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub betas: Vec<f64>,
    /// slope of log t_merge_scaled
    pub log_merge_slope: Option<f64>,
    /// slope of log t_merge in simulation time
    pub log_merge_slope_raw: Option<f64>,
    /// 1 − cos σ0
    pub exponent_sigma: f64,
    /// mean δ_gap over the fitted runs
    pub exponent_gap: Option<f64>,
    pub slope_over_sigma: Option<f64>,
    pub slope_over_gap: Option<f64>,
    /// T_f strictly decreasing in β, in the scaled clock.
    pub t_f_decreasing: bool,
    pub t_f_decreasing_raw: bool,
}

#[derive(Debug, Clone)]
pub struct MetastabOutcome {
    pub runs: Vec<MetastabRun>,
    pub trajectories: Vec<TrajectoryRecord>,
    pub reduced: Vec<Option<TrajectoryRecord>>,
    pub fit: ScalingFit,
}

/// Least-squares slope of y on x.
pub fn regression_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Merger-time regression and T_f monotonicity over runs sorted by β.
pub fn scaling_fit(sigma0: f64, runs: &[MetastabRun]) -> ScalingFit {
    let merged: Vec<&MetastabRun> = runs.iter().filter(|r| r.t_merge.is_some_and(|t| t > 0.0)).collect();
    let xs: Vec<f64> = merged.iter().map(|r| r.beta).collect();
    let ys: Vec<f64> = merged.iter().map(|r| r.t_merge.unwrap().ln()).collect();
    let slope_raw = regression_slope(&xs, &ys);
    let ys: Vec<f64> = merged.iter().map(|r| (r.t_merge.unwrap() * r.clock).ln()).collect();
    let slope = regression_slope(&xs, &ys);
    let exponent_sigma = 1.0 - sigma0.cos();
    let gaps: Vec<f64> = merged.iter().filter_map(|r| r.delta_gap).collect();
    let exponent_gap = (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64);
    let decreasing = |t: Vec<Option<f64>>| {
        t.iter().all(Option::is_some) && t.windows(2).all(|w| w[1].unwrap() < w[0].unwrap())
    };
    let t_f_decreasing = decreasing(runs.iter().map(|r| r.t_f_scaled).collect());
    let t_f_decreasing_raw = decreasing(runs.iter().map(|r| r.t_f).collect());
    ScalingFit {
        betas: xs,
        log_merge_slope: slope,
        log_merge_slope_raw: slope_raw,
        exponent_sigma,
        exponent_gap,
        slope_over_sigma: slope.map(|s| s / exponent_sigma),
        slope_over_gap: slope.zip(exponent_gap).map(|(s, g)| s / g),
        t_f_decreasing,
        t_f_decreasing_raw,
    }
}

/// Simulates the clustered system for each β and measures T_f, the trapping
/// interval, the center deviation from the reduced flow and the first merger.
pub fn metastability_report(
    spec: &ClusterSpec,
    kernel: &KernelSpec,
    betas: &[f64],
    cfg: &SimConfig,
    opts: &MetastabOptions,
    seed: u64,
) -> Result<MetastabOutcome> {
    let bias = match kernel {
        KernelSpec::DistanceBias { bias, .. } => bias.clone(),
        other => {
            return Err(Error::InvalidParameter(format!(
                "metastability needs a distance-bias kernel, got {}",
                other.family().name()
            )))
        }
    };
    let r = opts.r.unwrap_or(spec.sigma0 / 8.0);
    if !(r > 0.0 && r < spec.sigma0 / 4.0) {
        return Err(Error::InvalidParameter(format!("trapping radius must lie in (0, sigma0/4), got {r}")));
    }
    let merge = opts.merge_threshold.unwrap_or(spec.sigma0 / 2.0);
    let partition = spec.partition();
    let init = clustered_init(spec, seed)?;
    let d = init.dim();
    let b = bias_matrix(&init, &bias)?;
    let couplings = coarse_couplings(&b, init.n(), &partition)?;
    let sim_cfg = SimConfig { early_stop: false, record_states: false, ..cfg.clone() };

    let mut runs = Vec::new();
    let mut trajectories = Vec::new();
    let mut reduced = Vec::new();
    for &beta in betas {
        let k = KernelSpec::DistanceBias { beta, bias: bias.clone() };
        let mut centers: Vec<Vec<UnitVector>> = Vec::new();
        let mut observe = |_t: f64, s: &ParticleSystem, _e: f64| {
            let st = cluster_stats(s, &partition)?;
            let row = MetricRow {
                g_x: collapse_gap(s)?,
                delta_max: Some(st.max_diameter()),
                theta_min: Some(st.min_angle()),
                cluster_diameters: Some(st.diameters.clone()),
                center_angles: Some(st.upper_angles()),
                ..MetricRow::default()
            };
            centers.push(st.centers);
            Ok(row)
        };
        let stop = opts.stop_at_merger;
        let mut halt = |m: &MetricRow| stop && m.theta_min.is_some_and(|a| a < merge);
        let traj = simulate_until(&init, &k, &sim_cfg, &mut observe, &mut halt)?;
        let t_merge = detect_merger(&traj, merge);

        let t_f_idx = traj.metrics.iter().position(|m| m.delta_max.is_some_and(|v| v < 2.0 * r));
        let holds = |m: &MetricRow| {
            m.delta_max.is_some_and(|v| v <= 2.0 * r) && m.theta_min.is_some_and(|a| a >= spec.sigma0)
        };
        let mut t_m_idx = None;
        if let Some(f) = t_f_idx {
            let mut last = None;
            for (idx, m) in traj.metrics.iter().enumerate().skip(f) {
                if !holds(m) {
                    break;
                }
                last = Some(idx);
            }
            t_m_idx = last;
        }
        let certificate_holds = match (t_f_idx, t_m_idx) {
            (Some(f), Some(m)) => traj.metrics[f..=m].iter().all(holds),
            _ => t_f_idx.is_none(),
        };

        let mut max_dev = None;
        let mut red_energy = None;
        let mut red_violations = 0;
        let mut delta_gap = None;
        let mut red_rec = None;
        if let (Some(f), Some(m)) = (t_f_idx, t_m_idx) {
            let t0 = traj.times[f];
            delta_gap = traj.metrics[f]
                .center_angles
                .as_ref()
                .map(|a| a.iter().map(|t| 1.0 - t.cos()).fold(f64::INFINITY, f64::min));
            if m > f {
                let span = traj.times[m] - t0;
                let rcfg = SimConfig {
                    t_final: span,
                    snapshot_every: cfg.snapshot_every.min(span),
                    record_states: true,
                    early_stop: false,
                    ..cfg.clone()
                };
                let red = reduced_flow(&centers[f], &couplings, beta, &rcfg)?;
                let mut dev = 0.0f64;
                for (rt, rs) in red.times.iter().zip(&red.snapshots) {
                    let t = t0 + rt;
                    if let Some(idx) = traj.times.iter().position(|x| (x - t).abs() < 0.5 * cfg.dt) {
                        for p in 0..spec.k() {
                            dev = dev.max(angle_between(centers[idx][p].as_slice(), rs.state(p)));
                        }
                    }
                }
                max_dev = Some(dev);
                red_energy = Some(red.final_energy());
                red_violations = red.ascent_violations;
                red_rec = Some(red);
            } else {
                max_dev = Some(0.0);
                let u: Vec<f64> = centers[f].iter().flat_map(|c| c.as_slice().to_vec()).collect();
                red_energy = Some(reduced_energy(&u, d, &couplings, beta));
            }
        }
        let t_f = t_f_idx.map(|i| traj.times[i]);
        let t_m = t_m_idx.map(|i| traj.times[i]);
        let trapping_plateau = match (t_f, t_m) {
            (Some(f), Some(m)) => m - f >= opts.plateau_ratio * f && m > f,
            _ => false,
        };
        let scale = r + (-beta * (1.0 - spec.sigma0.cos())).exp();
        let clock = beta.exp() / beta;
        runs.push(MetastabRun {
            beta,
            t_f,
            t_m,
            t_merge,
            clock,
            t_f_scaled: t_f.map(|t| t * clock),
            t_merge_scaled: t_merge.map(|t| t * clock),
            max_center_deviation: max_dev,
            reduced_energy_final: red_energy,
            fitted_c: max_dev.map(|v| v / scale),
            delta_gap,
            trapping_plateau,
            certificate_holds,
            r,
            couplings: couplings.clone(),
            ascent_violations: traj.ascent_violations,
            reduced_ascent_violations: red_violations,
        });
        trajectories.push(traj);
        reduced.push(red_rec);
    }

    let fit = scaling_fit(spec.sigma0, &runs);
    Ok(MetastabOutcome { runs, trajectories, reduced, fit })
}

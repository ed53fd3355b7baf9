//! Scalar diagnostics of particle systems: collapse and gauge gaps,
//! conditional diameter, energy gap to the ceiling, cluster statistics and
//! the empirical Wasserstein-1 distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dynamics::ParticleSystem;
use crate::error::{Error, Result};
use crate::kernels::{torus_distance, AuxLabel, KernelFamily, KernelSpec};
use crate::maximizers::kernel_energy_ceiling;
use crate::sphere::{angle_between, dot, norm, UnitVector};

/// One snapshot's diagnostics. Absent values are empty CSV cells.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub g_x: f64,
    pub g_q: Option<f64>,
    pub d_cond: Option<f64>,
    pub delta_e: Option<f64>,
    pub delta_max: Option<f64>,
    pub theta_min: Option<f64>,
    pub w1: Option<f64>,
    pub cluster_diameters: Option<Vec<f64>>,
    pub center_angles: Option<Vec<f64>>,
}

impl MetricRow {
    pub const COLUMNS: [&'static str; 7] = ["g_x", "g_q", "d_cond", "delta_e", "delta_max", "theta_min", "w1"];

    /// Values in [`MetricRow::COLUMNS`] order.
    pub fn values(&self) -> [Option<f64>; 7] {
        [
            Some(self.g_x),
            self.g_q,
            self.d_cond,
            self.delta_e,
            self.delta_max,
            self.theta_min,
            self.w1,
        ]
    }
}

/// 1 − mean_{i≠j} <x_i, x_j> over row-major coordinates.
pub fn collapse_gap_coords(d: usize, coords: &[f64]) -> Result<f64> {
    let n = coords.len() / d;
    if n < 2 {
        return Err(Error::TooFewParticles { need: 2, got: n });
    }
    let mut sum = vec![0.0; d];
    let mut sq = 0.0;
    for x in coords.chunks(d) {
        for a in 0..d {
            sum[a] += x[a];
        }
        sq += dot(x, x);
    }
    let off = dot(&sum, &sum) - sq;
    Ok(1.0 - off / (n * (n - 1)) as f64)
}

/// G_x = 1 − (1/(n(n−1))) Σ_{i≠j} <x_i, x_j>.
pub fn collapse_gap(sys: &ParticleSystem) -> Result<f64> {
    collapse_gap_coords(sys.dim(), sys.coords())
}

/// Gauge variables q_i of `sys` for `kernel`, row-major.
pub fn gauge_coords(sys: &ParticleSystem, kernel: &KernelSpec) -> Result<Vec<f64>> {
    let d = sys.dim();
    let mut q = Vec::with_capacity(sys.coords().len());
    for (x, l) in sys.states().zip(sys.labels()) {
        if matches!(l, AuxLabel::None) {
            return Err(Error::LabelMismatch { family: "gauge map", label: "none".into() });
        }
        match kernel.gauge(l, d)? {
            Some(g) => q.extend(g.apply(x)),
            None => q.extend_from_slice(x),
        }
    }
    Ok(q)
}

/// G_q: the collapse gap of the gauge variables.
pub fn gauge_gap(sys: &ParticleSystem, kernel: &KernelSpec) -> Result<f64> {
    collapse_gap_coords(sys.dim(), &gauge_coords(sys, kernel)?)
}

/// Largest pairwise geodesic angle inside each label group, maximized over
/// groups. Singleton groups contribute 0.
pub fn conditional_diameter(sys: &ParticleSystem) -> f64 {
    let mut groups: BTreeMap<(u8, u64), Vec<usize>> = BTreeMap::new();
    for (i, l) in sys.labels().iter().enumerate() {
        groups.entry(l.group_key()).or_default().push(i);
    }
    let mut best = 0.0f64;
    for members in groups.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                best = best.max(angle_between(sys.state(i), sys.state(j)));
            }
        }
    }
    best
}

/// (E_max − e_now)/E_max with E_max = sup_b·e^β/(2β).
pub fn relative_energy_gap(e_now: f64, beta: f64, sup_b: f64) -> f64 {
    let cap = crate::maximizers::energy_ceiling(beta, sup_b);
    (cap - e_now) / cap
}

/// The metrics every trajectory records: G_x, G_q for gauge-structured
/// kernels, D_cond, and Δ_E where the ceiling is known and positive.
pub fn standard_row(sys: &ParticleSystem, kernel: &KernelSpec, energy: f64) -> Result<MetricRow> {
    let g_q = match kernel.family() {
        KernelFamily::Rope | KernelFamily::PhaseField | KernelFamily::PromptGauge => Some(gauge_gap(sys, kernel)?),
        _ => None,
    };
    let delta_e = kernel_energy_ceiling(kernel).filter(|c| *c > 0.0).map(|c| (c - energy) / c);
    Ok(MetricRow {
        g_x: collapse_gap(sys)?,
        g_q,
        d_cond: Some(conditional_diameter(sys)),
        delta_e,
        ..MetricRow::default()
    })
}

/// Per-cluster diameters, centers and pairwise center angles.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    pub diameters: Vec<f64>,
    pub centers: Vec<UnitVector>,
    /// K×K row-major, zero diagonal.
    pub angles: Vec<f64>,
}

impl ClusterStats {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn angle(&self, p: usize, q: usize) -> f64 {
        self.angles[p * self.k() + q]
    }

    pub fn max_diameter(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_angle(&self) -> f64 {
        let k = self.k();
        let mut m = f64::INFINITY;
        for p in 0..k {
            for q in p + 1..k {
                m = m.min(self.angle(p, q));
            }
        }
        m
    }

    /// Upper-triangle angles Θ_pq, p < q, in row order.
    pub fn upper_angles(&self) -> Vec<f64> {
        let k = self.k();
        (0..k).flat_map(|p| (p + 1..k).map(move |q| (p, q))).map(|(p, q)| self.angle(p, q)).collect()
    }
}

/// Checks that `partition` covers 0..n disjointly with non-empty blocks.
pub fn validate_partition(partition: &[Vec<usize>], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for (p, block) in partition.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::EmptyCluster(p));
        }
        for &i in block {
            if i >= n || seen[i] {
                return Err(Error::InvalidParameter(format!("partition is not a disjoint cover (index {i})")));
            }
            seen[i] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidParameter(format!("partition misses index {i}")));
    }
    Ok(())
}

/// Δ_p, u_p and Θ_pq for a partition of the particle indices.
pub fn cluster_stats(sys: &ParticleSystem, partition: &[Vec<usize>]) -> Result<ClusterStats> {
    validate_partition(partition, sys.n())?;
    let d = sys.dim();
    let mut diameters = Vec::with_capacity(partition.len());
    let mut centers = Vec::with_capacity(partition.len());
    for (p, block) in partition.iter().enumerate() {
        let mut mean = vec![0.0; d];
        for &i in block {
            for (m, x) in mean.iter_mut().zip(sys.state(i)) {
                *m += x;
            }
        }
        let r = norm(&mean) / block.len() as f64;
        if r <= 1e-12 {
            return Err(Error::DegenerateCluster(p, r));
        }
        centers.push(UnitVector::new(mean)?);
        let mut diam = 0.0f64;
        for (a, &i) in block.iter().enumerate() {
            for &j in &block[a + 1..] {
                diam = diam.max(angle_between(sys.state(i), sys.state(j)));
            }
        }
        diameters.push(diam);
    }
    let k = centers.len();
    let mut angles = vec![0.0; k * k];
    for p in 0..k {
        for q in p + 1..k {
            let a = angle_between(centers[p].as_slice(), centers[q].as_slice());
            angles[p * k + q] = a;
            angles[q * k + p] = a;
        }
    }
    Ok(ClusterStats { diameters, centers, angles })
}

/// Distance on auxiliary labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMetric {
    /// |s − t| on positions.
    Absolute,
    /// min(|s − t|, 1 − |s − t|) on positions.
    Torus,
}

impl LabelMetric {
    pub fn for_kernel(k: &KernelSpec) -> Self {
        if k.is_periodic() {
            LabelMetric::Torus
        } else {
            LabelMetric::Absolute
        }
    }

    /// d_A(ξ, ζ). Prompts use the discrete metric, labels of different
    /// kinds are at distance 1.
    pub fn distance(self, a: &AuxLabel, b: &AuxLabel) -> f64 {
        match (a, b) {
            (AuxLabel::None, AuxLabel::None) => 0.0,
            (AuxLabel::Position(s), AuxLabel::Position(t)) => match self {
                LabelMetric::Absolute => (s - t).abs(),
                LabelMetric::Torus => torus_distance(*s, *t),
            },
            (AuxLabel::Prompt { index: i, .. }, AuxLabel::Prompt { index: j, .. })
                if i == j => {
                    0.0
                }
            _ => 1.0,
        }
    }
}

/// Minimum-cost perfect assignment on a square row-major cost matrix.
/// Returns `(cost, assignment)` with row `i` matched to column `assignment[i]`.
pub fn min_cost_assignment(n: usize, cost: &[f64]) -> (f64, Vec<usize>) {
    // Shortest augmenting paths with potentials, 1-based sentinel column 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    (total, assignment)
}

/// Ground cost d_X((x,ξ),(y,ζ)) = ‖x − y‖ + d_A(ξ,ζ).
pub fn ground_distance(x: &[f64], a: &AuxLabel, y: &[f64], b: &AuxLabel, metric: LabelMetric) -> f64 {
    let e: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    e + metric.distance(a, b)
}

/// Exact W1 between two equal-size, equal-weight empirical measures.
pub fn empirical_w1(a: &ParticleSystem, b: &ParticleSystem, metric: LabelMetric) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::CountMismatch(a.n(), b.n()));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let n = a.n();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = ground_distance(a.state(i), a.label(i), b.state(j), b.label(j), metric);
        }
    }
    let (total, _) = min_cost_assignment(n, &cost);
    Ok(total / n as f64)
}

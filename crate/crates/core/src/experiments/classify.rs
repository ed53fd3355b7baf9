//! Shape classification of final states: Dirac, plane circle, multi-cluster,
//! label-conditional curve, or unclassified.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::ParticleSystem;
use crate::error::Result;
use crate::experiments::config::ClassifyParams;
use crate::metrics::{collapse_gap, conditional_diameter};
use crate::sphere::{angle_between, dot, norm, normalize_in_place};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Dirac,
    CircleLike,
    MultiCluster,
    Curve,
    Unclassified,
}

/// Total least-squares fit of a circle in an affine 2-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleFit {
    pub center: Vec<f64>,
    /// Orthonormal basis of the plane direction.
    pub axes: [Vec<f64>; 2],
    pub radius: f64,
    /// max distance of a point from the fitted plane
    pub plane_residual: f64,
    /// max |distance to center within the plane − radius|
    pub radius_residual: f64,
    /// distance of the plane from the origin
    pub plane_offset: f64,
}

impl CircleFit {
    pub fn residual(&self) -> f64 {
        self.plane_residual.max(self.radius_residual)
    }
}

/// Centroid, top-two principal axes, then radius and residuals.
pub fn fit_circle(sys: &ParticleSystem) -> CircleFit {
    let (n, d) = (sys.n(), sys.dim());
    let mut c = vec![0.0; d];
    for x in sys.states() {
        for a in 0..d {
            c[a] += x[a] / n as f64;
        }
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for x in sys.states() {
        for a in 0..d {
            for b in 0..d {
                cov[(a, b)] += (x[a] - c[a]) * (x[b] - c[b]);
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let col = |k: usize| -> Vec<f64> { eig.eigenvectors.column(order[k]).iter().copied().collect() };
    let axes = [col(0), col(1)];
    let mut plane_residual = 0.0f64;
    let mut radii = Vec::with_capacity(n);
    for x in sys.states() {
        let r: Vec<f64> = x.iter().zip(&c).map(|(a, b)| a - b).collect();
        let u = dot(&r, &axes[0]);
        let v = dot(&r, &axes[1]);
        let off: Vec<f64> = (0..d).map(|a| r[a] - u * axes[0][a] - v * axes[1][a]).collect();
        plane_residual = plane_residual.max(norm(&off));
        radii.push((u * u + v * v).sqrt());
    }
    let radius = radii.iter().sum::<f64>() / n as f64;
    let radius_residual = radii.iter().map(|r| (r - radius).abs()).fold(0.0, f64::max);
    // component of the centroid normal to the plane directions
    let cu = dot(&c, &axes[0]);
    let cv = dot(&c, &axes[1]);
    let offset: Vec<f64> = (0..d).map(|a| c[a] - cu * axes[0][a] - cv * axes[1][a]).collect();
    CircleFit { center: c, axes, radius, plane_residual, radius_residual, plane_offset: norm(&offset) }
}

/// Single-linkage clusters at geodesic radius `link`, largest first.
pub fn linkage_clusters(sys: &ParticleSystem, link: f64) -> Vec<Vec<usize>> {
    let n = sys.n();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if angle_between(sys.state(i), sys.state(j)) < link {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut v: Vec<Vec<usize>> = groups.into_values().collect();
    v.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    v
}

/// Normalized mean of the members' states.
pub fn cluster_center(sys: &ParticleSystem, members: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; sys.dim()];
    for &i in members {
        for (a, v) in c.iter_mut().zip(sys.state(i)) {
            *a += v;
        }
    }
    normalize_in_place(&mut c);
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub count: usize,
    pub sizes: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub max_diameter: f64,
    /// None for a single cluster
    pub min_separation: Option<f64>,
}

fn summarize(sys: &ParticleSystem, groups: &[Vec<usize>]) -> ClusterSummary {
    let centers: Vec<Vec<f64>> = groups.iter().map(|g| cluster_center(sys, g)).collect();
    let mut max_diameter = 0.0f64;
    for g in groups {
        for (a, &i) in g.iter().enumerate() {
            for &j in &g[a + 1..] {
                max_diameter = max_diameter.max(angle_between(sys.state(i), sys.state(j)));
            }
        }
    }
    let mut min_separation: Option<f64> = None;
    for p in 0..centers.len() {
        for q in p + 1..centers.len() {
            let a = angle_between(&centers[p], &centers[q]);
            min_separation = Some(min_separation.map_or(a, |m| m.min(a)));
        }
    }
    ClusterSummary {
        count: groups.len(),
        sizes: groups.iter().map(Vec::len).collect(),
        centers,
        max_diameter,
        min_separation,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: ShapeClass,
    /// "great" or "latitude" for circles.
    pub circle_kind: Option<String>,
    pub g_x: f64,
    pub d_cond: f64,
    pub circle: CircleFit,
    pub clusters: ClusterSummary,
}

/// Checks in order: Dirac, multi-cluster, circle, curve.
pub fn classify(sys: &ParticleSystem, p: &ClassifyParams) -> Result<Classification> {
    let g_x = collapse_gap(sys)?;
    let d_cond = conditional_diameter(sys);
    let circle = fit_circle(sys);
    let groups = linkage_clusters(sys, p.cluster_link);
    let clusters = summarize(sys, &groups);
    let tight = clusters.max_diameter < p.cluster_link;
    let class = if g_x < p.dirac_gap {
        ShapeClass::Dirac
    } else if (2..=p.max_clusters).contains(&clusters.count) && tight && clusters.min_separation.is_some_and(|s| s > p.cluster_separation)
    {
        ShapeClass::MultiCluster
    } else if circle.residual() < p.circle_tol && circle.radius > p.circle_tol {
        ShapeClass::CircleLike
    } else if d_cond < p.cond_tol {
        ShapeClass::Curve
    } else {
        ShapeClass::Unclassified
    };
    let circle_kind = (class == ShapeClass::CircleLike).then(|| {
        if circle.plane_offset < p.great_circle_offset { "great" } else { "latitude" }.to_string()
    });
    Ok(Classification { class, circle_kind, g_x, d_cond, circle, clusters })
}

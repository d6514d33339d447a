use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use super::EvalError;
use crate::corpus::SourceLabel;
use crate::embedder::{distance, DistanceKind, Embeddings};
use crate::source::SourceId;

/// DBSCAN over cosine distance: a point with at least `min_pts` points
/// (itself included) within `eps` is a core point. Returns a cluster index per
/// point, `None` for noise. With `min_pts = 1` every point is core and the
/// clusters are the connected components of the eps-graph.
///
/// Clusters are numbered by first appearance in input order.
pub fn eps_components(points: &[&[f64]], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| distance(DistanceKind::Cosine, points[i], points[j]).clamp(0.0, 2.0) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts.max(1)).collect();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || label[start].is_some() {
            continue;
        }
        label[start] = Some(next);
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if label[q].is_none() {
                    label[q] = Some(next);
                    if core[q] {
                        stack.push(q);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

/// Top-2 principal components: coordinates per point and explained variance
/// ratios (non-increasing). Each axis is signed so its largest loading is
/// positive.
pub fn pca_2d(points: &[&[f64]]) -> ([f64; 2], Vec<[f64; 2]>) {
    let n = points.len();
    let dim = points.first().map_or(0, |p| p.len());
    if n < 2 || dim == 0 {
        return ([0.0, 0.0], vec![[0.0, 0.0]; n]);
    }
    let mut x = DMatrix::from_fn(n, dim, |i, j| points[i][j]);
    for j in 0..dim {
        let mean = x.column(j).mean();
        x.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = x.transpose() * &x / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut ratios = [0.0; 2];
    let mut coords = vec![[0.0; 2]; n];
    for (axis, &c) in order.iter().take(2).enumerate() {
        let mut v = eig.eigenvectors.column(c).clone_owned();
        let lead = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if lead < 0.0 {
            v = -v;
        }
        ratios[axis] = if total > 0.0 { eig.eigenvalues[c].max(0.0) / total } else { 0.0 };
        let proj = &x * v;
        for (i, p) in proj.iter().enumerate() {
            coords[i][axis] = *p;
        }
    }
    (ratios, coords)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSummary {
    pub id: usize,
    pub members: Vec<SourceId>,
    pub labeled: usize,
    pub unreliable: usize,
    /// Unreliable members over labeled members.
    pub unreliability_density: Option<f64>,
    pub mean_leaning: Option<f64>,
    /// Mean absolute leaning scaled to [0, 1].
    pub partisanship: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub explained_variance_ratio: [f64; 2],
    pub coords: BTreeMap<SourceId, [f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    pub eps: f64,
    pub min_pts: usize,
    /// Largest first, ties broken by smallest member.
    pub clusters: Vec<ClusterSummary>,
    pub noise: Vec<SourceId>,
    pub projection: Projection,
}

impl ClusterReport {
    pub fn cluster_of(&self, source: &str) -> Option<usize> {
        self.clusters.iter().find(|c| c.members.iter().any(|m| m.as_str() == source)).map(|c| c.id)
    }
}

fn summarize(members: Vec<SourceId>, labels: &BTreeMap<SourceId, SourceLabel>) -> ClusterSummary {
    let known: Vec<&SourceLabel> = members.iter().filter_map(|m| labels.get(m)).collect();
    let unreliable = known.iter().filter(|l| l.is_unreliable()).count();
    let n = known.len() as f64;
    let (density, leaning, partisanship) = if known.is_empty() {
        (None, None, None)
    } else {
        (
            Some(unreliable as f64 / n),
            Some(known.iter().map(|l| l.political_leaning as f64).sum::<f64>() / n),
            Some(known.iter().map(|l| (l.political_leaning as f64).abs()).sum::<f64>() / n / 3.0),
        )
    };
    ClusterSummary { id: 0, labeled: known.len(), unreliable, members, unreliability_density: density, mean_leaning: leaning, partisanship }
}

/// DBSCAN over the embeddings in source order, with per-cluster label
/// statistics and a 2-D projection.
pub fn cluster(emb: &Embeddings, eps: f64, min_pts: usize, labels: &BTreeMap<SourceId, SourceLabel>) -> Result<ClusterReport, EvalError> {
    if emb.is_empty() {
        return Err(EvalError::InvalidParameter("no embeddings to cluster".into()));
    }
    if !(eps >= 0.0) {
        return Err(EvalError::InvalidParameter(format!("eps must be non-negative, got {eps}")));
    }
    let names: Vec<&SourceId> = emb.keys().collect();
    let points: Vec<&[f64]> = emb.values().map(|e| e.vector.as_slice()).collect();
    let assignment = eps_components(&points, eps, min_pts);
    let mut groups: BTreeMap<usize, Vec<SourceId>> = BTreeMap::new();
    let mut noise = Vec::new();
    for (name, a) in names.iter().zip(&assignment) {
        match a {
            Some(c) => groups.entry(*c).or_default().push((*name).clone()),
            None => noise.push((*name).clone()),
        }
    }
    let mut clusters: Vec<ClusterSummary> = groups.into_values().map(|m| summarize(m, labels)).collect();
    clusters.sort_by(|a, b| b.members.len().cmp(&a.members.len()).then_with(|| a.members[0].cmp(&b.members[0])));
    for (id, c) in clusters.iter_mut().enumerate() {
        c.id = id;
    }
    let (ratios, coords) = pca_2d(&points);
    let projection = Projection { explained_variance_ratio: ratios, coords: names.into_iter().cloned().zip(coords).collect() };
    Ok(ClusterReport { eps, min_pts, clusters, noise, projection })
}

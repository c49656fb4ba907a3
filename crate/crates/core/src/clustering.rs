//! DBSCAN over projected candidate locations.
//!
//! A point is *core* when at least `min_pts` points (itself included) lie
//! within `eps` meters. Clusters are the sets density-reachable from core
//! points; everything else is noise. Points are scanned in input order and a
//! border point belongs to the first cluster that reaches it. Cluster ids are
//! then renumbered so that they increase with each cluster's lowest member
//! index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::PlanarPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Neighborhood radius in meters.
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    /// 75 m is half the long side of a typical downtown block.
    fn default() -> Self {
        DbscanParams { eps: 75.0, min_pts: 3 }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::invalid(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.min_pts == 0 {
            return Err(Error::invalid("min_pts must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Noise,
    Cluster(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterLabeling {
    pub labels: Vec<Label>,
    pub core: Vec<bool>,
    pub num_clusters: usize,
}

impl ClusterLabeling {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, l)| **l == Label::Cluster(cluster))
            .map(|(i, _)| i)
    }

    pub fn all_noise(&self) -> bool {
        self.num_clusters == 0
    }
}

fn neighborhood(points: &[PlanarPoint], i: usize, eps: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, q)| points[i].distance(q) <= eps)
        .map(|(j, _)| j)
        .collect()
}

pub fn dbscan(points: &[PlanarPoint], params: &DbscanParams) -> Result<ClusterLabeling> {
    params.validate()?;
    if let Some(p) = points.iter().find(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::invalid(format!("non-finite point {p:?}")));
    }
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| neighborhood(points, i, params.eps)).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_pts).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut clusters = 0;
    for start in 0..n {
        if labels[start].is_some() || !core[start] {
            continue;
        }
        let id = clusters;
        clusters += 1;
        labels[start] = Some(id);
        let mut stack = neighbors[start].clone();
        while let Some(j) = stack.pop() {
            if labels[j].is_some() {
                continue;
            }
            labels[j] = Some(id);
            if core[j] {
                stack.extend(neighbors[j].iter().copied().filter(|&k| labels[k].is_none()));
            }
        }
    }

    // renumber by lowest member index
    let mut remap = vec![usize::MAX; clusters];
    let mut next = 0;
    for l in labels.iter().flatten() {
        if remap[*l] == usize::MAX {
            remap[*l] = next;
            next += 1;
        }
    }
    Ok(ClusterLabeling {
        labels: labels
            .into_iter()
            .map(|l| l.map_or(Label::Noise, |c| Label::Cluster(remap[c])))
            .collect(),
        core,
        num_clusters: clusters,
    })
}

/// Non-noise cluster with the largest total weight (population when
/// `weights` is `None`), ties to the smaller id. `None` when everything is noise.
pub fn winning_cluster(labeling: &ClusterLabeling, weights: Option<&[f64]>) -> Result<Option<usize>> {
    if let Some(w) = weights {
        if w.len() != labeling.labels.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} points",
                w.len(),
                labeling.labels.len()
            )));
        }
        if let Some(bad) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("weights must be finite and non-negative, got {bad}")));
        }
    }
    let mut totals = vec![0.0f64; labeling.num_clusters];
    for (i, l) in labeling.labels.iter().enumerate() {
        if let Label::Cluster(c) = l {
            totals[*c] += weights.map_or(1.0, |w| w[i]);
        }
    }
    let mut best: Option<usize> = None;
    for (c, &t) in totals.iter().enumerate() {
        match best {
            Some(b) if !crate::voting::strictly_greater(t, totals[b]) => {}
            _ => best = Some(c),
        }
    }
    Ok(best)
}

//! Centralized k-means on the pooled dataset.

use serde::{Deserialize, Serialize};

use crate::data::{squared_distance, CentroidSet, Points};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub learning_rate: f64,
    pub rounds: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            learning_rate: 1.0,
            rounds: 1000,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    /// `losses[n]` is the loss after `n` iterations; `losses[0]` is the
    /// initial model.
    pub losses: Vec<f64>,
    pub centroids: CentroidSet,
}

/// Nearest-centroid label for every point.
pub fn assign(points: &Points, centroids: &CentroidSet) -> Result<Vec<usize>> {
    check_len(centroids.dim(), points.dim())?;
    Ok(points.iter().map(|x| centroids.nearest(x)).collect())
}

pub fn cluster_sizes(labels: &[usize], num_clusters: usize) -> Vec<u64> {
    let mut sizes = vec![0u64; num_clusters];
    for &c in labels {
        sizes[c] += 1;
    }
    sizes
}

/// Within-cluster sum of squares of a labelled partition, measured against
/// each cluster's own mean.
pub fn partition_loss(points: &Points, labels: &[usize], num_clusters: usize) -> Result<f64> {
    check_len(points.len(), labels.len())?;
    let dim = points.dim();
    let mut sums = vec![0.0; num_clusters * dim];
    let mut counts = vec![0u64; num_clusters];
    for (x, &c) in points.iter().zip(labels) {
        counts[c] += 1;
        for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            for s in &mut sums[c * dim..(c + 1) * dim] {
                *s /= n as f64;
            }
        }
    }
    Ok(points
        .iter()
        .zip(labels)
        .map(|(x, &c)| squared_distance(x, &sums[c * dim..(c + 1) * dim]))
        .sum())
}

/// Loss of the partition induced by `centroids`.
pub fn loss(points: &Points, centroids: &CentroidSet) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::input("loss of an empty dataset"));
    }
    let labels = assign(points, centroids)?;
    partition_loss(points, &labels, centroids.num_clusters())
}

/// One step of `c ← (1-μ)c + μ·mean(P_c)`. Clusters that own no points keep
/// their centroid.
pub fn lloyd_step(points: &Points, centroids: &CentroidSet, learning_rate: f64) -> Result<CentroidSet> {
    let labels = assign(points, centroids)?;
    let dim = points.dim();
    let num_clusters = centroids.num_clusters();
    let mut sums = vec![0.0; num_clusters * dim];
    for (x, &c) in points.iter().zip(&labels) {
        for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(x) {
            *s += v;
        }
    }
    let counts = cluster_sizes(&labels, num_clusters);
    let mut next = centroids.clone();
    for (c, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let mean = &sums[c * dim..(c + 1) * dim];
        for (ci, m) in next.centroid_mut(c).iter_mut().zip(mean) {
            *ci = (1.0 - learning_rate) * *ci + learning_rate * (m / n as f64);
        }
    }
    next.round = centroids.round + 1;
    Ok(next)
}

pub fn run_baseline(cfg: &BaselineConfig, points: &Points, initial: &CentroidSet) -> Result<BaselineRun> {
    cfg.validate()?;
    let mut centroids = initial.clone();
    let mut losses = Vec::with_capacity(cfg.rounds + 1);
    losses.push(loss(points, &centroids)?);
    for _ in 0..cfg.rounds {
        centroids = lloyd_step(points, &centroids, cfg.learning_rate)?;
        losses.push(loss(points, &centroids)?);
    }
    Ok(BaselineRun { losses, centroids })
}

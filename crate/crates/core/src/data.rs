//! Flat row-major point storage shared by the federated and centralized
//! algorithms.

use crate::error::{Error, Result};

/// A set of points in R^dim stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("point dimension must be at least 1"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::input(format!(
                "{} coordinates do not divide into points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("point coordinates must be finite"));
        }
        Ok(Points { dim, coords })
    }

    pub fn empty(dim: usize) -> Self {
        assert!(dim > 0, "point dimension must be at least 1");
        Points { dim, coords: Vec::new() }
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    actual: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Points::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }
}

/// The server's model: `C` centroids in R^dim plus the round they belong to.
///
/// Stored cluster-major, so the flat slice is exactly the vectorization used
/// on the uplink (element `q` is cluster `q / dim`, coordinate `q % dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    dim: usize,
    coords: Vec<f64>,
    pub round: usize,
}

impl CentroidSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        let pts = Points::new(dim, coords)?;
        if pts.is_empty() {
            return Err(Error::input("centroid set is empty"));
        }
        Ok(CentroidSet {
            dim,
            coords: pts.coords,
            round: 0,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let pts = Points::from_rows(dim, rows)?;
        CentroidSet::new(dim, pts.coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_clusters(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn centroid(&self, c: usize) -> &[f64] {
        &self.coords[c * self.dim..(c + 1) * self.dim]
    }

    pub(crate) fn centroid_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.coords[c * self.dim..(c + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Index of the nearest centroid in squared Euclidean distance. Ties go
    /// to the lowest index.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in self.iter().enumerate() {
            let d = squared_distance(x, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        best
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

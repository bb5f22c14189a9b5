//! Synthetic shopping-mall scenario.
//!
//! A square area is tiled into `rows × cols` stores, one edge device per
//! store. Customer locations come from an axis-aligned Gaussian mixture plus
//! a uniform background, and each point belongs to the device whose tile
//! contains it. Centroids start at the tile centers.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CentroidSet, Points};
use crate::error::{Error, Result};
use crate::seed::SeedTree;

const MAX_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl GmmComponent {
    pub const fn new(weight: f64, mean_x: f64, mean_y: f64, std_x: f64, std_y: f64) -> Self {
        GmmComponent {
            weight,
            mean: [mean_x, mean_y],
            std: [std_x, std_y],
        }
    }
}

/// The five-component mixture of the mall scenario.
pub const MALL_MIXTURE: [GmmComponent; 5] = [
    GmmComponent::new(0.6, 20.0, 20.0, 5.0, 1.0),
    GmmComponent::new(0.1, 75.0, 25.0, 7.0, 7.0),
    GmmComponent::new(0.1, 50.0, 50.0, 10.0, 1.0),
    GmmComponent::new(0.1, 75.0, 75.0, 0.5, 4.0),
    GmmComponent::new(0.1, 20.0, 60.0, 1.0, 10.0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub area_side: f64,
    pub rows: usize,
    pub cols: usize,
    pub gmm_components: Vec<GmmComponent>,
    pub gmm_count: usize,
    pub uniform_count: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            area_side: 100.0,
            rows: 10,
            cols: 10,
            gmm_components: MALL_MIXTURE.to_vec(),
            gmm_count: 10_000,
            uniform_count: 100,
            seed: 2024,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.tiling()?;
        if self.gmm_components.iter().any(|c| !(c.weight >= 0.0 && c.weight.is_finite())) {
            return Err(Error::config("mixture weights must be non-negative"));
        }
        if self.gmm_components.iter().any(|c| !(c.std[0] > 0.0 && c.std[1] > 0.0)) {
            return Err(Error::config("mixture standard deviations must be positive"));
        }
        if self.gmm_components.iter().any(|c| !(c.mean[0].is_finite() && c.mean[1].is_finite())) {
            return Err(Error::config("mixture means must be finite"));
        }
        if self.gmm_count > 0 {
            let total: f64 = self.gmm_components.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!("mixture weights sum to {total}, expected 1")));
            }
        }
        Ok(())
    }

    pub fn tiling(&self) -> Result<Tiling> {
        Tiling::new(self.area_side, self.rows, self.cols)
    }
}

/// Row-major tiling of `[0, side]²`. Tiles are half-open `[a, b)` except the
/// last row and column, which include the far edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tiling {
    area_side: f64,
    rows: usize,
    cols: usize,
}

impl Tiling {
    pub fn new(area_side: f64, rows: usize, cols: usize) -> Result<Self> {
        if !(area_side.is_finite() && area_side > 0.0) {
            return Err(Error::config(format!("area side must be positive, got {area_side}")));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::config("tiling needs at least one row and one column"));
        }
        Ok(Tiling { area_side, rows, cols })
    }

    pub fn num_tiles(&self) -> usize {
        self.rows * self.cols
    }

    pub fn area_side(&self) -> f64 {
        self.area_side
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().all(|&v| (0.0..=self.area_side).contains(&v))
    }

    pub fn tile_of(&self, p: &[f64]) -> Result<usize> {
        if p.len() != 2 || !self.contains(p) {
            return Err(Error::input(format!("point {p:?} lies outside the area")));
        }
        let col = ((p[0] / (self.area_side / self.cols as f64)).floor() as usize).min(self.cols - 1);
        let row = ((p[1] / (self.area_side / self.rows as f64)).floor() as usize).min(self.rows - 1);
        Ok(row * self.cols + col)
    }

    pub fn tile_center(&self, tile: usize) -> [f64; 2] {
        let (row, col) = (tile / self.cols, tile % self.cols);
        let w = self.area_side / self.cols as f64;
        let h = self.area_side / self.rows as f64;
        [(col as f64 + 0.5) * w, (row as f64 + 0.5) * h]
    }

    /// One centroid per tile, centroid `c` at the center of tile `c`.
    pub fn centers(&self) -> CentroidSet {
        let rows: Vec<[f64; 2]> = (0..self.num_tiles()).map(|t| self.tile_center(t)).collect();
        CentroidSet::from_rows(2, &rows).expect("tiling has at least one tile")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub tiling: Tiling,
    pub pooled: Points,
    /// Device (tile) index of every pooled point.
    pub owners: Vec<usize>,
    pub local: Vec<Points>,
    pub initial_centroids: CentroidSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub x: f64,
    pub y: f64,
    pub ed_index: usize,
}

impl Scenario {
    pub fn generate(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let tiling = cfg.tiling()?;
        let mut rng = SeedTree::new(cfg.seed).rng();
        let mut coords = Vec::with_capacity(2 * (cfg.gmm_count + cfg.uniform_count));

        if cfg.gmm_count > 0 {
            let picker = WeightedIndex::new(cfg.gmm_components.iter().map(|c| c.weight))
                .map_err(|e| Error::config(format!("mixture weights: {e}")))?;
            for _ in 0..cfg.gmm_count {
                let comp = &cfg.gmm_components[picker.sample(&mut rng)];
                coords.extend_from_slice(&sample_inside(comp, &tiling, &mut rng)?);
            }
        }
        for _ in 0..cfg.uniform_count {
            coords.push(rng.random_range(0.0..=cfg.area_side));
            coords.push(rng.random_range(0.0..=cfg.area_side));
        }
        Scenario::from_points(tiling, Points::new(2, coords)?)
    }

    /// Builds the per-device split of `pooled` by containing tile.
    pub fn from_points(tiling: Tiling, pooled: Points) -> Result<Self> {
        let owners = pooled.iter().map(|p| tiling.tile_of(p)).collect::<Result<Vec<_>>>()?;
        let mut local = vec![Points::empty(2); tiling.num_tiles()];
        for (p, &k) in pooled.iter().zip(&owners) {
            local[k].push(p);
        }
        Ok(Scenario {
            tiling,
            initial_centroids: tiling.centers(),
            pooled,
            owners,
            local,
        })
    }

    pub fn records(&self) -> Vec<PointRecord> {
        self.pooled
            .iter()
            .zip(&self.owners)
            .map(|(p, &ed_index)| PointRecord {
                x: p[0],
                y: p[1],
                ed_index,
            })
            .collect()
    }

    /// Writes one `x,y,ed_index` record per pooled point.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in self.records() {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a dataset written by [`Scenario::export_csv`]. Every record's
    /// device index must match the tile containing the point.
    pub fn import_csv(path: &Path, tiling: Tiling) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        let mut owners = Vec::new();
        for rec in r.deserialize() {
            let rec: PointRecord = rec?;
            rows.push([rec.x, rec.y]);
            owners.push(rec.ed_index);
        }
        let scenario = Scenario::from_points(tiling, Points::from_rows(2, &rows)?)?;
        if let Some(i) = (0..owners.len()).find(|&i| owners[i] != scenario.owners[i]) {
            return Err(Error::input(format!(
                "record {i} claims device {} but lies in tile {}",
                owners[i], scenario.owners[i]
            )));
        }
        Ok(scenario)
    }
}

fn sample_inside<R: Rng + ?Sized>(comp: &GmmComponent, tiling: &Tiling, rng: &mut R) -> Result<[f64; 2]> {
    for _ in 0..MAX_REJECTIONS {
        let zx: f64 = StandardNormal.sample(rng);
        let zy: f64 = StandardNormal.sample(rng);
        let p = [comp.mean[0] + comp.std[0] * zx, comp.mean[1] + comp.std[1] * zy];
        if tiling.contains(&p) {
            return Ok(p);
        }
    }
    Err(Error::config(format!(
        "mixture component at {:?} almost never lands inside the area",
        comp.mean
    )))
}

//! Federated k-means with over-the-air aggregation of the centroid updates.
//!
//! Each round:
//! 1. every device partitions its local data around the broadcast centroids
//!    and forms per-cluster update vectors `Δ_{k,c} = Σ_{x∈P_{k,c}} (x - c_c)`;
//! 2. the flattened updates are summed over the air (or exactly, in
//!    [`Aggregation::Perfect`] mode) while cardinalities and range metrics
//!    travel on an error-free side channel;
//! 3. the server moves every well-populated centroid by
//!    `μ · ΣΔ / |P_c|`, re-initializes clusters with fewer than `S_min`
//!    members next to a random healthy centroid, and sets the next clamping
//!    range to `α · max_k m_k`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline;
use crate::codec::CodecConfig;
use crate::data::{CentroidSet, Points};
use crate::error::{check_len, Error, Result};
use crate::phy::{self, ChannelDraw, ChannelKind, PhyConfig};
use crate::seed::{tag, SeedTree, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OacSettings {
    pub beta: u32,
    pub digits: u32,
    /// `None` is a noiseless receiver.
    pub snr_db: Option<f64>,
    pub channel: ChannelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Aggregation {
    Perfect,
    Oac(OacSettings),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FedConfig {
    pub num_clusters: usize,
    pub dim: usize,
    pub learning_rate: f64,
    pub s_min: u64,
    pub alpha: f64,
    pub reinit_variance: f64,
    pub v_max_init: f64,
    pub rounds: usize,
    pub aggregation: Aggregation,
}

impl FedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters == 0 || self.dim == 0 {
            return Err(Error::config("cluster count and dimension must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.reinit_variance.is_finite() && self.reinit_variance > 0.0) {
            return Err(Error::config("re-initialization variance must be positive"));
        }
        if let Aggregation::Oac(oac) = self.aggregation {
            if oac.snr_db.is_some_and(|s| !s.is_finite()) {
                return Err(Error::config("SNR must be finite"));
            }
            CodecConfig::new(oac.beta, oac.digits, self.v_max_init)?;
        } else if !(self.v_max_init.is_finite() && self.v_max_init > 0.0) {
            return Err(Error::config("initial v_max must be positive"));
        }
        Ok(())
    }

    /// Values each device sends per round, `L·C`.
    pub fn num_values(&self) -> usize {
        self.num_clusters * self.dim
    }

    pub fn phy_config(&self, v_max: f64, num_eds: usize) -> Result<Option<PhyConfig>> {
        match self.aggregation {
            Aggregation::Perfect => Ok(None),
            Aggregation::Oac(oac) => Ok(Some(PhyConfig {
                codec: CodecConfig::new(oac.beta, oac.digits, v_max)?,
                num_values: self.num_values(),
                snr_db: oac.snr_db,
                channel: oac.channel,
                num_eds,
            })),
        }
    }
}

/// What one device sends to the server in a round.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRoundReport {
    /// `[Δ_{k,0}, …, Δ_{k,C-1}]` flattened cluster-major.
    pub update_vectors: Vec<f64>,
    pub cardinalities: Vec<u64>,
    /// Largest update magnitude, `max_q |v_{k,q}|`.
    pub range_metric: f64,
}

/// Local partition: index sets into `points`, one per cluster.
pub fn assign_local(points: &Points, centroids: &CentroidSet) -> Result<Vec<Vec<usize>>> {
    check_len(centroids.dim(), points.dim())?;
    let mut sets = vec![Vec::new(); centroids.num_clusters()];
    for (i, x) in points.iter().enumerate() {
        sets[centroids.nearest(x)].push(i);
    }
    Ok(sets)
}

pub fn local_report(points: &Points, centroids: &CentroidSet) -> Result<LocalRoundReport> {
    check_len(centroids.dim(), points.dim())?;
    let dim = centroids.dim();
    let mut update_vectors = vec![0.0; centroids.num_clusters() * dim];
    let mut cardinalities = vec![0u64; centroids.num_clusters()];
    for x in points.iter() {
        let c = centroids.nearest(x);
        cardinalities[c] += 1;
        let centroid = centroids.centroid(c);
        for ((u, xi), ci) in update_vectors[c * dim..(c + 1) * dim].iter_mut().zip(x).zip(centroid) {
            *u += xi - ci;
        }
    }
    let range_metric = update_vectors.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(LocalRoundReport {
        update_vectors,
        cardinalities,
        range_metric,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOutcome {
    /// Estimated `Σ_k Δ_{k,c}`, flattened cluster-major.
    pub sums: Vec<f64>,
    pub cardinalities: Vec<u64>,
    /// `‖exact − estimate‖₂`; the simulator knows the ground truth.
    pub error_norm: f64,
    /// Components that exceeded the clamping range on the uplink.
    pub clamped: usize,
}

/// Sums the reports, over the air or exactly. `round` is the seed node of
/// the current round: device `k` draws its QPSK symbols from `round.child(k)`.
pub fn aggregate(
    reports: &[LocalRoundReport],
    v_max: f64,
    cfg: &FedConfig,
    round: &SeedTree,
) -> Result<AggregateOutcome> {
    if reports.is_empty() {
        return Err(Error::input("aggregation needs at least one report"));
    }
    let q = cfg.num_values();
    let mut exact = vec![0.0; q];
    let mut cardinalities = vec![0u64; cfg.num_clusters];
    for r in reports {
        check_len(q, r.update_vectors.len())?;
        check_len(cfg.num_clusters, r.cardinalities.len())?;
        for (s, v) in exact.iter_mut().zip(&r.update_vectors) {
            *s += v;
        }
        for (s, n) in cardinalities.iter_mut().zip(&r.cardinalities) {
            *s += n;
        }
    }

    let Some(phy_cfg) = cfg.phy_config(v_max, reports.len())? else {
        return Ok(AggregateOutcome {
            sums: exact,
            cardinalities,
            error_norm: 0.0,
            clamped: 0,
        });
    };

    let grids = reports
        .par_iter()
        .enumerate()
        .map(|(k, r)| phy::modulate(&r.update_vectors, &phy_cfg, &mut round.child(k as u64).rng()))
        .collect::<Result<Vec<_>>>()?;
    let channel = ChannelDraw::draw(
        phy_cfg.channel,
        reports.len(),
        phy_cfg.num_resources(),
        &mut round.child(tag::CHANNEL).rng(),
    );
    let y = phy::superpose(&grids, &channel, &phy_cfg, &mut round.child(tag::NOISE).rng())?;
    let sums = phy::estimate_sums(&y, &phy_cfg)?;

    let error_norm = exact
        .iter()
        .zip(&sums)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let clamped = reports
        .iter()
        .flat_map(|r| &r.update_vectors)
        .filter(|v| v.abs() > v_max)
        .count();
    Ok(AggregateOutcome {
        sums,
        cardinalities,
        error_norm,
        clamped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerUpdate {
    pub centroids: CentroidSet,
    pub v_max: f64,
    /// Clusters moved next to a donor this round, ascending.
    pub reinitialized: Vec<usize>,
}

/// Next clamping range `α · max_k m_k`, keeping the previous one when every
/// update was zero.
pub fn next_v_max(v_max: f64, metrics: &[f64], alpha: f64) -> f64 {
    let proposed = alpha * metrics.iter().fold(0.0f64, |m, &x| m.max(x));
    if proposed > 0.0 && proposed.is_finite() {
        proposed
    } else {
        v_max
    }
}

pub fn server_update<R: Rng + ?Sized>(
    centroids: &CentroidSet,
    sums: &[f64],
    cardinalities: &[u64],
    v_max: f64,
    metrics: &[f64],
    cfg: &FedConfig,
    rng: &mut R,
) -> Result<ServerUpdate> {
    let dim = centroids.dim();
    let num_clusters = centroids.num_clusters();
    check_len(num_clusters * dim, sums.len())?;
    check_len(num_clusters, cardinalities.len())?;

    let below: Vec<bool> = cardinalities.iter().map(|&n| n < cfg.s_min).collect();
    let donors: Vec<usize> = (0..num_clusters).filter(|&c| !below[c]).collect();

    let mut next = centroids.clone();
    next.round = centroids.round + 1;
    for c in donors.iter().copied().filter(|&c| cardinalities[c] > 0) {
        let scale = cfg.learning_rate / cardinalities[c] as f64;
        for (ci, s) in next.centroid_mut(c).iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
            *ci += scale * s;
        }
    }

    let mut reinitialized = Vec::new();
    if !donors.is_empty() {
        let noise = Normal::new(0.0, cfg.reinit_variance.sqrt())
            .map_err(|e| Error::config(format!("re-initialization noise: {e}")))?;
        for c in (0..num_clusters).filter(|&c| below[c]) {
            let donor = donors[rng.random_range(0..donors.len())];
            let fresh: Vec<f64> = centroids
                .centroid(donor)
                .iter()
                .map(|v| v + noise.sample(rng))
                .collect();
            next.centroid_mut(c).copy_from_slice(&fresh);
            reinitialized.push(c);
        }
    }

    Ok(ServerUpdate {
        centroids: next,
        v_max: next_v_max(v_max, metrics, cfg.alpha),
        reinitialized,
    })
}

/// Per-round instrumentation. Loss is measured on the pooled dataset, which
/// a real server could not see; it never feeds back into training.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundLog {
    pub round: usize,
    /// Loss of the centroids produced by this round.
    pub loss: f64,
    /// Clamping range used on this round's uplink.
    pub v_max: f64,
    /// Global cardinalities reported during this round.
    pub cardinalities: Vec<u64>,
    pub reinitialized: Vec<usize>,
    pub aggregation_error: f64,
    pub max_range_metric: f64,
    pub clamped: usize,
}

impl RoundLog {
    pub fn reinit_count(&self) -> usize {
        self.reinitialized.len()
    }
}

/// Stateful driver over the training rounds.
#[derive(Debug, Clone)]
pub struct FederatedKMeans<'a> {
    cfg: FedConfig,
    local: &'a [Points],
    pooled: &'a Points,
    centroids: CentroidSet,
    v_max: f64,
    seeds: SeedTree,
}

impl<'a> FederatedKMeans<'a> {
    pub fn new(
        cfg: FedConfig,
        local: &'a [Points],
        pooled: &'a Points,
        initial: CentroidSet,
        master_seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if local.is_empty() {
            return Err(Error::input("at least one edge device is required"));
        }
        check_len(cfg.num_clusters, initial.num_clusters())?;
        check_len(cfg.dim, initial.dim())?;
        for d in local {
            check_len(cfg.dim, d.dim())?;
        }
        check_len(cfg.dim, pooled.dim())?;
        Ok(FederatedKMeans {
            cfg,
            local,
            pooled,
            centroids: initial,
            v_max: cfg.v_max_init,
            seeds: SeedTree::new(master_seed),
        })
    }

    pub fn centroids(&self) -> &CentroidSet {
        &self.centroids
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn step(&mut self) -> Result<RoundLog> {
        let round = self.centroids.round + 1;
        let node = self.seeds.child(round as u64);

        let reports = self
            .local
            .par_iter()
            .map(|d| local_report(d, &self.centroids))
            .collect::<Result<Vec<_>>>()?;
        let metrics: Vec<f64> = reports.iter().map(|r| r.range_metric).collect();

        let agg = aggregate(&reports, self.v_max, &self.cfg, &node)?;
        let mut server_rng: SimRng = node.child(tag::SERVER).rng();
        let update = server_update(
            &self.centroids,
            &agg.sums,
            &agg.cardinalities,
            self.v_max,
            &metrics,
            &self.cfg,
            &mut server_rng,
        )?;

        let log = RoundLog {
            round,
            loss: if self.pooled.is_empty() {
                0.0
            } else {
                baseline::loss(self.pooled, &update.centroids)?
            },
            v_max: self.v_max,
            cardinalities: agg.cardinalities,
            reinitialized: update.reinitialized,
            aggregation_error: agg.error_norm,
            max_range_metric: metrics.iter().fold(0.0f64, |m, &x| m.max(x)),
            clamped: agg.clamped,
        };
        self.centroids = update.centroids;
        self.v_max = update.v_max;
        Ok(log)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub logs: Vec<RoundLog>,
    pub centroids: CentroidSet,
    pub v_max: f64,
}

pub fn run(
    cfg: &FedConfig,
    local: &[Points],
    pooled: &Points,
    initial: &CentroidSet,
    master_seed: u64,
) -> Result<RunOutput> {
    let mut sim = FederatedKMeans::new(*cfg, local, pooled, initial.clone(), master_seed)?;
    let logs = (0..cfg.rounds).map(|_| sim.step()).collect::<Result<Vec<_>>>()?;
    Ok(RunOutput {
        logs,
        centroids: sim.centroids,
        v_max: sim.v_max,
    })
}

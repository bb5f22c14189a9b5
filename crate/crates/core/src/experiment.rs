//! Parameter sweeps over codec, channel and re-initialization settings.
//!
//! An experiment generates one scenario, runs the centralized baseline once,
//! then runs federated training for every variant × repetition. Output:
//!
//! - `points.csv`: the pooled dataset (`x,y,ed_index`)
//! - `baseline.csv`, `baseline_centroids.csv`
//! - `rounds_<label>.csv` and `centroids_<label>.csv` per variant
//! - `manifest.json`: the resolved spec, every derived constant and the
//!   per-repetition seeds
//!
//! Repetition `r` of every variant uses the same seed, so variants are
//! compared under identical randomness. Files contain no timestamps and the
//! same spec always produces byte-identical output.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{self, BaselineConfig};
use crate::codec::CodecConfig;
use crate::data::CentroidSet;
use crate::error::{Error, Result};
use crate::fed::{self, Aggregation, FedConfig, OacSettings, RunOutput};
use crate::phy::{ChannelKind, PhyConfig};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::seed::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub reinit_variance: f64,
    pub v_max_init: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        AlgorithmParams {
            rounds: 1000,
            learning_rate: 0.1,
            alpha: 1.2,
            reinit_variance: 1.0,
            v_max_init: 300.0,
        }
    }
}

/// One point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub beta: u32,
    pub digits: u32,
    pub channel: ChannelKind,
    pub snr_db: Option<f64>,
    pub s_min: u64,
    #[serde(default)]
    pub perfect: bool,
}

impl Variant {
    pub fn label(&self) -> String {
        if self.perfect {
            return format!("perfect_smin{}", self.s_min);
        }
        let snr = match self.snr_db {
            Some(db) => format!("snr{db}"),
            None => "noiseless".to_string(),
        };
        format!(
            "{}_{snr}_b{}_d{}_smin{}",
            self.channel, self.beta, self.digits, self.s_min
        )
    }

    pub fn aggregation(&self) -> Aggregation {
        if self.perfect {
            Aggregation::Perfect
        } else {
            Aggregation::Oac(OacSettings {
                beta: self.beta,
                digits: self.digits,
                snr_db: self.snr_db,
                channel: self.channel,
            })
        }
    }

    pub fn fed_config(&self, algo: &AlgorithmParams, num_clusters: usize, dim: usize) -> FedConfig {
        FedConfig {
            num_clusters,
            dim,
            learning_rate: algo.learning_rate,
            s_min: self.s_min,
            alpha: algo.alpha,
            reinit_variance: algo.reinit_variance,
            v_max_init: algo.v_max_init,
            rounds: algo.rounds,
            aggregation: self.aggregation(),
        }
    }
}

/// The full sweep: three channels × two SNRs × four (β, D) pairs × S_min ∈ {0, 5}.
pub fn default_variants() -> Vec<Variant> {
    let mut out = Vec::new();
    for channel in [ChannelKind::Awgn, ChannelKind::FlatFading, ChannelKind::FreqSelective] {
        for snr in [10.0, 20.0] {
            for (beta, digits) in [(3, 1), (5, 1), (3, 2), (5, 2)] {
                for s_min in [0, 5] {
                    out.push(Variant {
                        beta,
                        digits,
                        channel,
                        snr_db: Some(snr),
                        s_min,
                        perfect: false,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub algorithm: AlgorithmParams,
    pub variants: Vec<Variant>,
    pub master_seed: u64,
    pub repetitions: usize,
    pub baseline_only: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            scenario: ScenarioConfig::default(),
            algorithm: AlgorithmParams::default(),
            variants: default_variants(),
            master_seed: 1,
            repetitions: 1,
            baseline_only: false,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentSpec {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        if self.baseline_only {
            return Ok(());
        }
        if self.variants.is_empty() {
            return Err(Error::config("no variants to run"));
        }
        let num_clusters = self.scenario.tiling()?.num_tiles();
        let mut labels = std::collections::HashSet::new();
        for v in &self.variants {
            v.fed_config(&self.algorithm, num_clusters, 2).validate()?;
            if !labels.insert(v.label()) {
                return Err(Error::config(format!("duplicate variant {}", v.label())));
            }
        }
        Ok(())
    }

    /// Seed of repetition `rep`, shared by all variants.
    pub fn repetition_seed(&self, rep: usize) -> u64 {
        SeedTree::new(self.master_seed).child(rep as u64).seed()
    }
}

/// One row of a `rounds_<label>.csv` file. Round 0 is the initial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub variant: String,
    pub repetition: usize,
    pub round: usize,
    pub loss: f64,
    pub v_max: f64,
    pub reinit_count: usize,
    pub aggregation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BaselineRecord {
    round: usize,
    loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CentroidRecord {
    variant: String,
    repetition: usize,
    cluster: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceParams {
    pub dim: usize,
    pub num_clusters: usize,
    pub num_eds: usize,
    pub beta: u32,
    pub digits: u32,
    /// Spectral efficiency of a digital link, bits per resource.
    pub r_bits: f64,
    pub r_compression: f64,
    pub n_bits: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    /// `L·C·β·D`, independent of the device count.
    pub oac: u64,
    /// `L·C·K·r_compression·N_bits / r_bits` for orthogonal digital uplinks.
    pub non_oac: f64,
}

pub fn resource_report(p: &ResourceParams) -> Result<ResourceReport> {
    for (name, v) in [("r_bits", p.r_bits), ("r_compression", p.r_compression), ("n_bits", p.n_bits)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::config(format!("{name} must be positive, got {v}")));
        }
    }
    let values = (p.dim * p.num_clusters) as u64;
    Ok(ResourceReport {
        oac: values * p.beta as u64 * p.digits as u64,
        non_oac: values as f64 * p.num_eds as f64 * p.r_compression * p.n_bits / p.r_bits,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub label: String,
    pub variant: Variant,
    pub xi: u64,
    pub symbol_energy: f64,
    pub noise_variance: f64,
    pub resources: ResourceReport,
    pub final_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub crate_version: &'static str,
    pub spec: ExperimentSpec,
    pub num_points: usize,
    pub num_eds: usize,
    pub num_clusters: usize,
    pub dim: usize,
    pub repetition_seeds: Vec<u64>,
    pub baseline: BaselineConfig,
    pub baseline_final_loss: f64,
    pub variants: Vec<VariantSummary>,
}

/// Digital-link assumptions used for the manifest's resource comparison.
pub const DIGITAL_R_BITS: f64 = 1.0;
pub const DIGITAL_R_COMPRESSION: f64 = 0.2;
pub const DIGITAL_N_BITS: f64 = 8.0;

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Manifest> {
    spec.validate()?;
    let out = &spec.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let scenario = Scenario::generate(&spec.scenario)?;
    scenario.export_csv(&out.join("points.csv"))?;
    let dim = scenario.pooled.dim();
    let num_eds = scenario.local.len();
    let num_clusters = scenario.initial_centroids.num_clusters();

    let baseline_cfg = BaselineConfig {
        learning_rate: 1.0,
        rounds: spec.algorithm.rounds,
    };
    let base = baseline::run_baseline(&baseline_cfg, &scenario.pooled, &scenario.initial_centroids)?;
    write_csv(
        &out.join("baseline.csv"),
        base.losses
            .iter()
            .enumerate()
            .map(|(round, &loss)| BaselineRecord { round, loss }),
    )?;
    write_csv(
        &out.join("baseline_centroids.csv"),
        centroid_records("baseline", 0, &base.centroids),
    )?;

    let variants: &[Variant] = if spec.baseline_only { &[] } else { &spec.variants };
    let seeds: Vec<u64> = (0..spec.repetitions).map(|r| spec.repetition_seed(r)).collect();
    let jobs: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..spec.repetitions).map(move |r| (v, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(v, r)| {
            let cfg = variants[v].fed_config(&spec.algorithm, num_clusters, dim);
            fed::run(&cfg, &scenario.local, &scenario.pooled, &scenario.initial_centroids, seeds[r])
        })
        .collect::<Result<Vec<RunOutput>>>()?;

    let mut summaries = Vec::with_capacity(variants.len());
    for (v, variant) in variants.iter().enumerate() {
        let label = variant.label();
        let reps = &runs[v * spec.repetitions..(v + 1) * spec.repetitions];

        let mut rows = Vec::new();
        let mut cents = Vec::new();
        for (rep, run) in reps.iter().enumerate() {
            rows.push(ResultRecord {
                variant: label.clone(),
                repetition: rep,
                round: 0,
                loss: base.losses[0],
                v_max: spec.algorithm.v_max_init,
                reinit_count: 0,
                aggregation_error: 0.0,
            });
            rows.extend(run.logs.iter().map(|log| ResultRecord {
                variant: label.clone(),
                repetition: rep,
                round: log.round,
                loss: log.loss,
                v_max: log.v_max,
                reinit_count: log.reinit_count(),
                aggregation_error: log.aggregation_error,
            }));
            cents.extend(centroid_records(&label, rep, &run.centroids));
        }
        write_csv(&out.join(format!("rounds_{label}.csv")), rows)?;
        write_csv(&out.join(format!("centroids_{label}.csv")), cents)?;

        let phy = PhyConfig {
            codec: CodecConfig::new(variant.beta, variant.digits, spec.algorithm.v_max_init)?,
            num_values: num_clusters * dim,
            snr_db: variant.snr_db,
            channel: variant.channel,
            num_eds,
        };
        summaries.push(VariantSummary {
            label,
            variant: *variant,
            xi: phy.codec.xi(),
            symbol_energy: phy.symbol_energy(),
            noise_variance: phy.noise_variance(),
            resources: resource_report(&ResourceParams {
                dim,
                num_clusters,
                num_eds,
                beta: variant.beta,
                digits: variant.digits,
                r_bits: DIGITAL_R_BITS,
                r_compression: DIGITAL_R_COMPRESSION,
                n_bits: DIGITAL_N_BITS,
            })?,
            final_losses: reps
                .iter()
                .map(|r| r.logs.last().map_or(base.losses[0], |l| l.loss))
                .collect(),
        });
    }

    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION"),
        spec: spec.clone(),
        num_points: scenario.pooled.len(),
        num_eds,
        num_clusters,
        dim,
        repetition_seeds: seeds,
        baseline: baseline_cfg,
        baseline_final_loss: *base.losses.last().expect("baseline trace has the initial loss"),
        variants: summaries,
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn centroid_records(label: &str, repetition: usize, centroids: &CentroidSet) -> Vec<CentroidRecord> {
    centroids
        .iter()
        .enumerate()
        .map(|(cluster, c)| CentroidRecord {
            variant: label.to_string(),
            repetition,
            cluster,
            x: c[0],
            y: c[1],
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

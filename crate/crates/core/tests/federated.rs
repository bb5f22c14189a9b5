use proptest::prelude::*;

use oac_kmeans::baseline;
use oac_kmeans::codec::{quantize, CodecConfig};
use oac_kmeans::data::{CentroidSet, Points};
use oac_kmeans::fed::{self, Aggregation, FedConfig, FederatedKMeans, OacSettings};
use oac_kmeans::phy::{self, ChannelDraw, ChannelKind, PhyConfig};
use oac_kmeans::scenario::{Scenario, ScenarioConfig};
use oac_kmeans::seed::{tag, SeedTree};

fn small_scenario() -> Scenario {
    Scenario::generate(&ScenarioConfig {
        rows: 4,
        cols: 4,
        gmm_count: 800,
        uniform_count: 40,
        seed: 5,
        ..Default::default()
    })
    .unwrap()
}

fn oac(channel: ChannelKind, snr_db: Option<f64>, s_min: u64, rounds: usize) -> FedConfig {
    FedConfig {
        num_clusters: 16,
        dim: 2,
        learning_rate: 0.1,
        s_min,
        alpha: 1.2,
        reinit_variance: 1.0,
        v_max_init: 300.0,
        rounds,
        aggregation: Aggregation::Oac(OacSettings {
            beta: 5,
            digits: 2,
            snr_db,
            channel,
        }),
    }
}

#[test]
fn cardinalities_are_conserved_every_round() {
    let s = small_scenario();
    let out = fed::run(&oac(ChannelKind::FlatFading, Some(10.0), 5, 40), &s.local, &s.pooled, &s.initial_centroids, 1)
        .unwrap();
    assert_eq!(out.logs.len(), 40);
    for log in &out.logs {
        assert_eq!(log.cardinalities.iter().sum::<u64>(), s.pooled.len() as u64);
        assert!(log.loss >= 0.0);
    }
}

#[test]
fn v_max_tracks_the_largest_report() {
    let s = small_scenario();
    let cfg = oac(ChannelKind::Awgn, Some(20.0), 0, 30);
    let out = fed::run(&cfg, &s.local, &s.pooled, &s.initial_centroids, 2).unwrap();
    assert_eq!(out.logs[0].v_max, 300.0);
    for w in out.logs.windows(2) {
        assert!(w[0].max_range_metric > 0.0);
        assert!((w[1].v_max - 1.2 * w[0].max_range_metric).abs() <= 1e-12 * w[1].v_max);
    }
}

#[test]
fn updates_within_previous_range_are_never_clamped() {
    let s = small_scenario();
    let cfg = oac(ChannelKind::FreqSelective, Some(10.0), 5, 0);
    let mut sim = FederatedKMeans::new(cfg, &s.local, &s.pooled, s.initial_centroids.clone(), 3).unwrap();
    let mut prev_max: Option<f64> = None;
    for _ in 0..30 {
        let codec = CodecConfig::new(5, 2, sim.v_max()).unwrap();
        if let Some(limit) = prev_max {
            for d in &s.local {
                let r = fed::local_report(d, sim.centroids()).unwrap();
                for &v in r.update_vectors.iter().filter(|v| v.abs() <= limit) {
                    assert!(v.abs() <= codec.v_max());
                    assert!((quantize(v, &codec).unwrap() - v).abs() <= codec.half_step() * (1.0 + 1e-12));
                }
            }
        }
        prev_max = Some(sim.step().unwrap().max_range_metric);
    }
}

#[test]
fn every_sparse_cluster_is_reinitialized() {
    let s = small_scenario();
    let out = fed::run(&oac(ChannelKind::Awgn, Some(10.0), 5, 60), &s.local, &s.pooled, &s.initial_centroids, 4).unwrap();
    let mut total = 0;
    for log in &out.logs {
        let expected: Vec<usize> = (0..16).filter(|&c| log.cardinalities[c] < 5).collect();
        if expected.len() < 16 {
            assert_eq!(log.reinitialized, expected, "round {}", log.round);
        }
        total += log.reinit_count();
    }
    assert!(total > 0, "scenario should exercise re-initialization");
}

#[test]
fn same_seed_same_trajectory() {
    let s = small_scenario();
    let cfg = oac(ChannelKind::FreqSelective, Some(10.0), 5, 25);
    let a = fed::run(&cfg, &s.local, &s.pooled, &s.initial_centroids, 9).unwrap();
    let b = fed::run(&cfg, &s.local, &s.pooled, &s.initial_centroids, 9).unwrap();
    assert_eq!(a.logs, b.logs);
    assert_eq!(a.centroids, b.centroids);
    let c = fed::run(&cfg, &s.local, &s.pooled, &s.initial_centroids, 10).unwrap();
    assert_ne!(a.centroids, c.centroids);
}

#[test]
fn imported_dataset_reproduces_run() {
    let s = small_scenario();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("points.csv");
    s.export_csv(&path).unwrap();
    let t = Scenario::import_csv(&path, s.tiling).unwrap();
    let cfg = oac(ChannelKind::Awgn, Some(20.0), 5, 10);
    let a = fed::run(&cfg, &s.local, &s.pooled, &s.initial_centroids, 1).unwrap();
    let b = fed::run(&cfg, &t.local, &t.pooled, &t.initial_centroids, 1).unwrap();
    assert_eq!(a.logs, b.logs);
}

/// Monte-Carlo mean of the over-the-air sum against `Σ_k quantize(v_k)`,
/// with a 5σ bound from the sample variance.
fn check_unbiased(channel: ChannelKind, snr_db: Option<f64>, payloads: &[Vec<f64>], trials: u64) {
    let k = payloads.len();
    let q = payloads[0].len();
    let cfg = PhyConfig {
        codec: CodecConfig::new(3, 3, 50.0).unwrap(),
        num_values: q,
        snr_db,
        channel,
        num_eds: k,
    };
    let target: Vec<f64> = (0..q)
        .map(|i| payloads.iter().map(|p| quantize(p[i], &cfg.codec).unwrap()).sum())
        .collect();
    let mut sum = vec![0.0; q];
    let mut sum_sq = vec![0.0; q];
    let root = SeedTree::new(17);
    for n in 0..trials {
        let node = root.child(n);
        let grids: Vec<_> = payloads
            .iter()
            .enumerate()
            .map(|(e, p)| phy::modulate(p, &cfg, &mut node.child(e as u64).rng()).unwrap())
            .collect();
        let g = ChannelDraw::draw(channel, k, cfg.num_resources(), &mut node.child(tag::CHANNEL).rng());
        let y = phy::superpose(&grids, &g, &cfg, &mut node.child(tag::NOISE).rng()).unwrap();
        for (i, e) in phy::estimate_sums(&y, &cfg).unwrap().into_iter().enumerate() {
            sum[i] += e;
            sum_sq[i] += e * e;
        }
    }
    let n = trials as f64;
    for i in 0..q {
        let mean = sum[i] / n;
        let var = (sum_sq[i] / n - mean * mean) * n / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(
            (mean - target[i]).abs() <= 5.0 * se + 1e-9,
            "{channel}: value {i} mean {mean} target {} se {se}",
            target[i]
        );
    }
}

fn mixed_payloads(k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|e| (0..6).map(|i| ((e * 7 + i * 13) % 23) as f64 * 4.0 - 44.0).collect())
        .collect()
}

#[test]
fn estimator_is_unbiased_without_noise() {
    check_unbiased(ChannelKind::Awgn, None, &mixed_payloads(9), 4000);
}

#[test]
fn estimator_is_unbiased_under_noise_and_fading() {
    check_unbiased(ChannelKind::Awgn, Some(10.0), &mixed_payloads(9), 4000);
    check_unbiased(ChannelKind::FlatFading, Some(20.0), &mixed_payloads(9), 4000);
    check_unbiased(ChannelKind::FreqSelective, Some(10.0), &mixed_payloads(9), 4000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn perfect_aggregation_reproduces_lloyd(
        rows in prop::collection::vec((-50i32..50, -50i32..50), 4..40),
        owners in prop::collection::vec(0usize..4, 40),
        seed in any::<u64>(),
    ) {
        let pts: Vec<[f64; 2]> = rows.iter().map(|&(x, y)| [x as f64 * 0.25, y as f64 * 0.25]).collect();
        let pooled = Points::from_rows(2, &pts).unwrap();
        let local: Vec<Points> = (0..4)
            .map(|k| {
                let mine: Vec<[f64; 2]> = pts.iter().zip(&owners).filter(|(_, &o)| o == k).map(|(p, _)| *p).collect();
                Points::from_rows(2, &mine).unwrap()
            })
            .collect();
        let initial = CentroidSet::from_rows(2, &pts[..3]).unwrap();
        let cfg = FedConfig {
            num_clusters: 3,
            dim: 2,
            learning_rate: 1.0,
            s_min: 0,
            alpha: 1.2,
            reinit_variance: 1.0,
            v_max_init: 1.0,
            rounds: 0,
            aggregation: Aggregation::Perfect,
        };
        let mut sim = FederatedKMeans::new(cfg, &local, &pooled, initial.clone(), seed).unwrap();
        let mut central = initial;
        for _ in 0..8 {
            sim.step().unwrap();
            central = baseline::lloyd_step(&pooled, &central, 1.0).unwrap();
            for (a, b) in sim.centroids().as_flat().iter().zip(central.as_flat()) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}

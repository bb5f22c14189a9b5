//! Non-coherent over-the-air aggregation on a shared resource grid.
//!
//! Every value is encoded into `D` balanced numerals; each numeral owns `β`
//! consecutive resources and activates exactly one of them, carrying a
//! random QPSK symbol of energy `E_s = √β`. All devices transmit at once on
//! the same grid. The receiver measures the energy on each resource to
//! estimate how many devices picked it and decodes the summed numerals
//! without ever estimating the channel.
//!
//! The model stays at the frequency-domain symbol level: no IFFT and no
//! cyclic prefix.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::codec::{self, AggregateDigitVector, CodecConfig};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Awgn,
    #[serde(rename = "flat")]
    FlatFading,
    #[serde(rename = "selective")]
    FreqSelective,
}

impl ChannelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::FlatFading => "flat",
            ChannelKind::FreqSelective => "selective",
        }
    }
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "awgn" => Ok(ChannelKind::Awgn),
            "flat" => Ok(ChannelKind::FlatFading),
            "selective" => Ok(ChannelKind::FreqSelective),
            other => Err(Error::config(format!(
                "unknown channel '{other}', expected awgn, flat or selective"
            ))),
        }
    }
}

impl std::fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhyConfig {
    pub codec: CodecConfig,
    /// Values per device per round (`Q = L·C`).
    pub num_values: usize,
    /// `None` disables receiver noise.
    pub snr_db: Option<f64>,
    pub channel: ChannelKind,
    pub num_eds: usize,
}

impl PhyConfig {
    pub fn num_resources(&self) -> usize {
        self.num_values * self.codec.beta() as usize * self.codec.digits() as usize
    }

    pub fn symbol_energy(&self) -> f64 {
        (self.codec.beta() as f64).sqrt()
    }

    pub fn noise_variance(&self) -> f64 {
        match self.snr_db {
            Some(db) => 10f64.powf(-db / 10.0),
            None => 0.0,
        }
    }

    pub fn resource_index(&self, q: usize, d: usize, j: usize) -> Result<usize> {
        let beta = self.codec.beta() as usize;
        let digits = self.codec.digits() as usize;
        if q >= self.num_values || d >= digits || j >= beta {
            return Err(Error::input(format!(
                "resource triple ({q}, {d}, {j}) out of range for Q={}, D={digits}, β={beta}",
                self.num_values
            )));
        }
        Ok(beta * digits * q + beta * d + j)
    }

    pub fn inverse_resource_index(&self, l: usize) -> Result<(usize, usize, usize)> {
        if l >= self.num_resources() {
            return Err(Error::input(format!(
                "resource {l} out of range for grid of {}",
                self.num_resources()
            )));
        }
        let beta = self.codec.beta() as usize;
        let digits = self.codec.digits() as usize;
        Ok((l / (digits * beta), (l / beta) % digits, l % beta))
    }
}

/// One device's transmit symbols over the whole grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitGrid(pub Vec<Complex64>);

/// Superposed symbols seen by the server.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedGrid(pub Vec<Complex64>);

/// Per-round channel coefficients `g_{k,l}`.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelDraw {
    Awgn,
    /// One coefficient per device, shared by all resources.
    Flat(Vec<Complex64>),
    /// Independent coefficients, device-major (`k * len + l`).
    Selective { len: usize, coeffs: Vec<Complex64> },
}

impl ChannelDraw {
    pub fn draw<R: Rng + ?Sized>(kind: ChannelKind, num_eds: usize, len: usize, rng: &mut R) -> Self {
        match kind {
            ChannelKind::Awgn => ChannelDraw::Awgn,
            ChannelKind::FlatFading => ChannelDraw::Flat((0..num_eds).map(|_| complex_normal(rng, 1.0)).collect()),
            ChannelKind::FreqSelective => ChannelDraw::Selective {
                len,
                coeffs: (0..num_eds * len).map(|_| complex_normal(rng, 1.0)).collect(),
            },
        }
    }

    pub fn coefficient(&self, k: usize, l: usize) -> Complex64 {
        match self {
            ChannelDraw::Awgn => Complex64::new(1.0, 0.0),
            ChannelDraw::Flat(g) => g[k],
            ChannelDraw::Selective { len, coeffs } => coeffs[k * len + l],
        }
    }
}

/// Circularly-symmetric complex Gaussian with total variance `variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Uniformly random unit-energy QPSK symbol.
pub fn qpsk<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    match rng.random_range(0..4u8) {
        0 => Complex64::new(a, a),
        1 => Complex64::new(-a, a),
        2 => Complex64::new(-a, -a),
        _ => Complex64::new(a, -a),
    }
}

pub fn modulate<R: Rng + ?Sized>(values: &[f64], cfg: &PhyConfig, rng: &mut R) -> Result<TransmitGrid> {
    check_len(cfg.num_values, values.len())?;
    let amplitude = cfg.symbol_energy().sqrt();
    let offset = cfg.codec.max_numeral();
    let mut grid = vec![Complex64::new(0.0, 0.0); cfg.num_resources()];
    for (q, &v) in values.iter().enumerate() {
        let dv = codec::encode(v, &cfg.codec)?;
        for (d, &numeral) in dv.numerals().iter().enumerate() {
            let j = (numeral + offset) as usize;
            grid[cfg.resource_index(q, d, j)?] = amplitude * qpsk(rng);
        }
    }
    Ok(TransmitGrid(grid))
}

/// `y_l = Σ_k g_{k,l} x_{k,l} + w_l`, summing devices in index order.
pub fn superpose<R: Rng + ?Sized>(
    grids: &[TransmitGrid],
    channel: &ChannelDraw,
    cfg: &PhyConfig,
    rng: &mut R,
) -> Result<ReceivedGrid> {
    let len = cfg.num_resources();
    let mut y = vec![Complex64::new(0.0, 0.0); len];
    for (k, grid) in grids.iter().enumerate() {
        check_len(len, grid.0.len())?;
        match channel {
            ChannelDraw::Awgn => {
                for (acc, x) in y.iter_mut().zip(&grid.0) {
                    *acc += x;
                }
            }
            _ => {
                for (l, (acc, x)) in y.iter_mut().zip(&grid.0).enumerate() {
                    *acc += channel.coefficient(k, l) * x;
                }
            }
        }
    }
    let noise_var = cfg.noise_variance();
    if noise_var > 0.0 {
        for acc in y.iter_mut() {
            *acc += complex_normal(rng, noise_var);
        }
    }
    Ok(ReceivedGrid(y))
}

/// Energy-detector estimate of how many devices activated each resource,
/// `(|y_l|² - σ_n²) / E_s`. Not clipped at zero.
pub fn estimate_counts(y: &ReceivedGrid, cfg: &PhyConfig) -> Vec<f64> {
    let noise_var = cfg.noise_variance();
    let es = cfg.symbol_energy();
    y.0.iter().map(|s| (s.norm_sqr() - noise_var) / es).collect()
}

/// Estimates of `Σ_k v_{k,q}` for every `q`.
pub fn estimate_sums(y: &ReceivedGrid, cfg: &PhyConfig) -> Result<Vec<f64>> {
    check_len(cfg.num_resources(), y.0.len())?;
    let counts = estimate_counts(y, cfg);
    let beta = cfg.codec.beta() as usize;
    let digits = cfg.codec.digits() as usize;
    let symbols: Vec<f64> = (0..beta as u32).map(|j| cfg.codec.symbol(j) as f64).collect();

    let mut agg = AggregateDigitVector::zeros(&cfg.codec);
    counts
        .chunks_exact(beta * digits)
        .map(|slot_group| {
            for (d, slot) in slot_group.chunks_exact(beta).enumerate() {
                agg.0[d] = slot.iter().zip(&symbols).map(|(n, s)| n * s).sum();
            }
            debug_assert_eq!(agg.0.len(), digits);
            codec::decode(agg.numerals(), &cfg.codec)
        })
        .collect()
}

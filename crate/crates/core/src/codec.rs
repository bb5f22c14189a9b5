//! Balanced base-β numeral codec.
//!
//! A real scalar is clamped to `[-v_max, v_max]`, mapped onto the integer
//! grid `0..=2ξ` with `ξ = (β^D - 1) / 2`, and expanded into `D` base-β
//! digits that are shifted into the symmetric alphabet
//! `{-(β-1)/2, …, (β-1)/2}`. Decoding is linear in the numerals, which is
//! what lets the receiver decode a *sum* of numeral vectors directly.
//!
//! Numerals are stored least-significant first: index `d` carries weight
//! `β^d`.

use crate::error::{check_len, Error, Result};

/// Largest ξ for which every grid integer is exact in an `f64`.
const MAX_XI: u64 = 1 << 52;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecConfig {
    beta: u32,
    digits: u32,
    v_max: f64,
    xi: u64,
}

impl CodecConfig {
    pub fn new(beta: u32, digits: u32, v_max: f64) -> Result<Self> {
        if beta < 3 || beta.is_multiple_of(2) {
            return Err(Error::config(format!("base must be odd and >= 3, got {beta}")));
        }
        if digits < 1 {
            return Err(Error::config("numeral count must be at least 1"));
        }
        if !(v_max.is_finite() && v_max > 0.0) {
            return Err(Error::config(format!("v_max must be positive, got {v_max}")));
        }
        let span = (beta as u64)
            .checked_pow(digits)
            .filter(|s| (s - 1) / 2 <= MAX_XI)
            .ok_or_else(|| Error::config(format!("{beta}^{digits} levels exceed f64 precision")))?;
        Ok(CodecConfig {
            beta,
            digits,
            v_max,
            xi: (span - 1) / 2,
        })
    }

    pub fn with_v_max(&self, v_max: f64) -> Result<Self> {
        CodecConfig::new(self.beta, self.digits, v_max)
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    /// `(β^D - 1) / 2`, the grid half-width.
    pub fn xi(&self) -> u64 {
        self.xi
    }

    /// `(β - 1) / 2`, the largest numeral magnitude.
    pub fn max_numeral(&self) -> i32 {
        (self.beta as i32 - 1) / 2
    }

    /// Value of the `j`th symbol of the balanced alphabet.
    pub fn symbol(&self, j: u32) -> i32 {
        j as i32 - self.max_numeral()
    }

    /// Grid spacing `v_max / ξ`.
    pub fn step(&self) -> f64 {
        self.v_max / self.xi as f64
    }

    /// Worst-case quantization error inside the clamping range.
    pub fn half_step(&self) -> f64 {
        self.v_max / (2.0 * self.xi as f64)
    }
}

/// One encoded scalar: `D` balanced numerals, least-significant first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitVector(Vec<i32>);

impl DigitVector {
    pub fn numerals(&self) -> &[i32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i32> {
        self.0
    }
}

/// Numerals summed (or estimated) across devices. Real-valued because the
/// receiver's estimates are noisy.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateDigitVector(pub Vec<f64>);

impl AggregateDigitVector {
    pub fn zeros(cfg: &CodecConfig) -> Self {
        AggregateDigitVector(vec![0.0; cfg.digits as usize])
    }

    pub fn accumulate(&mut self, dv: &DigitVector) -> Result<()> {
        check_len(self.0.len(), dv.0.len())?;
        for (acc, &n) in self.0.iter_mut().zip(&dv.0) {
            *acc += n as f64;
        }
        Ok(())
    }

    pub fn numerals(&self) -> &[f64] {
        &self.0
    }
}

pub fn encode(v: f64, cfg: &CodecConfig) -> Result<DigitVector> {
    if !v.is_finite() {
        return Err(Error::input(format!("cannot encode non-finite value {v}")));
    }
    let xi = cfg.xi as f64;
    let clamped = v.clamp(-cfg.v_max, cfg.v_max);
    let level = ((xi / cfg.v_max) * clamped + xi + 0.5).floor();
    let mut level = level.clamp(0.0, 2.0 * xi) as u64;

    let beta = cfg.beta as u64;
    let offset = cfg.max_numeral();
    let numerals = (0..cfg.digits)
        .map(|_| {
            let digit = (level % beta) as i32;
            level /= beta;
            digit - offset
        })
        .collect();
    Ok(DigitVector(numerals))
}

/// `(v_max / ξ) Σ_d n_d β^d`. Accepts integer numerals or real-valued
/// aggregates.
pub fn decode<T: Copy + Into<f64>>(numerals: &[T], cfg: &CodecConfig) -> Result<f64> {
    check_len(cfg.digits as usize, numerals.len())?;
    let beta = cfg.beta as f64;
    let mut weight = 1.0;
    let mut acc = 0.0;
    for &n in numerals {
        acc += n.into() * weight;
        weight *= beta;
    }
    Ok(cfg.step() * acc)
}

pub fn quantize(v: f64, cfg: &CodecConfig) -> Result<f64> {
    let dv = encode(v, cfg)?;
    decode(dv.numerals(), cfg)
}

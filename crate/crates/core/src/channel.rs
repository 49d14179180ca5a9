//! AWGN channel with E_b/N_0 bookkeeping.
//!
//! Constellations keep their integer levels; the noise is scaled instead.
//! Gaussian samples come from ChaCha20 (seeded with `seed_from_u64`, one
//! stream per work item) through the polar-free Box–Muller transform, so any
//! implementation of those two primitives reproduces the noise exactly.

use num_complex::Complex;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::code::Rate;

/// Recorded in output metadata.
pub const NOISE_ALGORITHM: &str = "chacha20(seed_from_u64,set_stream)+box-muller(53-bit uniforms)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("rate must be positive")]
    NonPositiveRate,
    #[error("symbol energy must be positive, got {0}")]
    NonPositiveEnergy(f64),
    #[error("noise deviation must be non-negative, got {0}")]
    NegativeSigma(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub ebn0_db: f64,
    /// Information bits per (possibly complex) channel symbol.
    pub rate_bits_per_symbol: Rate,
    pub avg_symbol_energy: f64,
    /// 1 for ASK, 2 for QAM.
    pub dims_per_symbol: u32,
    pub seed: u64,
}

impl ChannelConfig {
    /// ASK with odd integer levels.
    pub fn ask(m: u32, rate: Rate, ebn0_db: f64, seed: u64) -> Self {
        Self {
            ebn0_db,
            rate_bits_per_symbol: rate,
            avg_symbol_energy: crate::pipeline::ask_energy(m),
            dims_per_symbol: 1,
            seed,
        }
    }

    /// Square QAM from two M-ASK components: energy and rate both double.
    pub fn qam_from_ask(m: u32, ask_rate: Rate, ebn0_db: f64, seed: u64) -> Self {
        Self {
            ebn0_db,
            rate_bits_per_symbol: ask_rate * Rate::from(2),
            avg_symbol_energy: 2.0 * crate::pipeline::ask_energy(m),
            dims_per_symbol: 2,
            seed,
        }
    }
}

pub fn rate_to_f64(rate: Rate) -> f64 {
    *rate.numer() as f64 / *rate.denom() as f64
}

/// Noise deviation per real dimension: `E_b = E_s/R`,
/// `N_0 = E_b / 10^(dB/10)`, `σ = sqrt(N_0/2)`.
pub fn ebn0_to_sigma(cfg: &ChannelConfig) -> Result<f64, ChannelError> {
    if *cfg.rate_bits_per_symbol.numer() == 0 {
        return Err(ChannelError::NonPositiveRate);
    }
    if cfg.avg_symbol_energy.is_nan() || cfg.avg_symbol_energy <= 0.0 {
        return Err(ChannelError::NonPositiveEnergy(cfg.avg_symbol_energy));
    }
    let eb = cfg.avg_symbol_energy / rate_to_f64(cfg.rate_bits_per_symbol);
    let n0 = eb / 10f64.powf(cfg.ebn0_db / 10.0);
    Ok((n0 / 2.0).sqrt())
}

/// Independent generator for work item `stream` under a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal samples by Box–Muller, two per pair of uniforms.
#[derive(Debug, Clone)]
pub struct GaussianSource {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::from_rng(stream_rng(seed, stream))
    }

    pub fn from_rng(rng: ChaCha20Rng) -> Self {
        Self { rng, spare: None }
    }

    /// Uniform in (0, 1].
    fn uniform_open0(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let radius = (-2.0 * self.uniform_open0().ln()).sqrt();
        let angle = std::f64::consts::TAU * self.uniform();
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

/// Adds noise of deviation `sigma` to real symbols.
pub fn awgn(symbols: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>, ChannelError> {
    let mut source = GaussianSource::new(seed, 0);
    awgn_with(symbols, sigma, &mut source)
}

pub fn awgn_with(symbols: &[f64], sigma: f64, source: &mut GaussianSource) -> Result<Vec<f64>, ChannelError> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(ChannelError::NegativeSigma(sigma));
    }
    Ok(symbols.iter().map(|&s| s + sigma * source.next_gaussian()).collect())
}

/// Complex noise, `sigma` per real dimension, real part drawn first.
pub fn awgn_complex(
    symbols: &[Complex<f64>],
    sigma: f64,
    source: &mut GaussianSource,
) -> Result<Vec<Complex<f64>>, ChannelError> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(ChannelError::NegativeSigma(sigma));
    }
    Ok(symbols
        .iter()
        .map(|s| {
            let re = source.next_gaussian();
            let im = source.next_gaussian();
            s + Complex::new(sigma * re, sigma * im)
        })
        .collect())
}

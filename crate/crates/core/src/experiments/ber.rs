use rand_chacha::rand_core::RngCore;
use rayon::prelude::*;

use super::ExperimentError;
use crate::channel::{awgn_complex, awgn_with, ebn0_to_sigma, stream_rng, ChannelConfig, GaussianSource};
use crate::code::{CodeSpec, Rate};
use crate::pipeline::{encode_frame_with, FrameLayout};
use crate::trellis::{build_trellis, TimeVariantTrellis};
use crate::viterbi::{decode_block, decode_qam_block};
use num_complex::Complex;

#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub ebn0_db: f64,
    pub rate: Rate,
    pub info_bits_simulated: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

impl BerRecord {
    fn new(ebn0_db: f64, rate: Rate, bits: u64, errors: u64) -> Self {
        Self {
            ebn0_db,
            rate,
            info_bits_simulated: bits,
            bit_errors: errors,
            ber: if bits == 0 { 0.0 } else { errors as f64 / bits as f64 },
        }
    }

    /// Binomial standard deviation of the estimate.
    pub fn std_dev(&self) -> f64 {
        (self.ber * (1.0 - self.ber) / self.info_bits_simulated.max(1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Payload per frame, rounded up to whole periods.
    pub frame_info_bits: usize,
    /// Pair consecutive ASK symbols into QAM symbols.
    pub qam: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            frame_info_bits: 1200,
            qam: false,
        }
    }
}

/// `start:step:stop` inclusive.
pub fn ebn0_grid(text: &str) -> Result<Vec<f64>, ExperimentError> {
    let bad = || ExperimentError::BadGrid(text.to_string());
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [single] => Ok(vec![*single]),
        [start, step, stop] if *step > 0.0 && stop >= start => {
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(bad()),
    }
}

pub fn simulate_ber(
    spec: &CodeSpec,
    ebn0_db: &[f64],
    min_info_bits: u64,
    seed: u64,
) -> Result<Vec<BerRecord>, ExperimentError> {
    simulate_ber_with(spec, ebn0_db, min_info_bits, seed, SimOptions::default())
}

/// Runs encode → AWGN → decode frames until at least `min_info_bits` (coded
/// plus uncoded, tail excluded) are counted per point. Frame `j` of point
/// `p` draws everything from ChaCha stream `(p << 32) | j`, so results do not
/// depend on the worker count.
pub fn simulate_ber_with(
    spec: &CodeSpec,
    ebn0_db: &[f64],
    min_info_bits: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<Vec<BerRecord>, ExperimentError> {
    let trellis = build_trellis(spec)?;
    ebn0_db
        .iter()
        .enumerate()
        .map(|(p, &db)| simulate_point(&trellis, db, p as u64, min_info_bits, seed, opts))
        .collect()
}

fn frame_layout(spec: &CodeSpec, opts: SimOptions) -> Result<FrameLayout, ExperimentError> {
    let period = spec.effective_period().info_bits;
    let info = opts.frame_info_bits.max(1).div_ceil(period) * period;
    Ok(FrameLayout::new(spec, info, if opts.qam { 2 } else { 1 })?)
}

pub(crate) fn simulate_point(
    trellis: &TimeVariantTrellis,
    ebn0_db: f64,
    point: u64,
    min_info_bits: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<BerRecord, ExperimentError> {
    let spec = trellis.spec();
    let rate = spec.overall_rate();
    let layout = frame_layout(spec, opts)?;
    let n_u = spec.n_u() as usize;
    let bits_per_frame = (layout.info_bits + n_u * layout.payload_symbols) as u64;
    let frames = min_info_bits.max(1).div_ceil(bits_per_frame);
    let channel = if opts.qam {
        ChannelConfig::qam_from_ask(spec.m(), rate, ebn0_db, seed)
    } else {
        ChannelConfig::ask(spec.m(), rate, ebn0_db, seed)
    };
    let sigma = ebn0_to_sigma(&channel)?;

    let errors = (0..frames)
        .into_par_iter()
        .map(|j| run_frame(trellis, &layout, sigma, seed, (point << 32) | j, opts.qam))
        .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
    Ok(BerRecord::new(ebn0_db, rate, frames * bits_per_frame, errors))
}

fn random_bits(rng: &mut impl RngCore, n: usize) -> Vec<u8> {
    let mut bits = Vec::with_capacity(n);
    while bits.len() < n {
        let word = rng.next_u64();
        bits.extend((0..64.min(n - bits.len())).map(|i| ((word >> i) & 1) as u8));
    }
    bits
}

fn count_errors(a: &[u8], b: &[u8]) -> u64 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u64
}

fn run_frame(
    trellis: &TimeVariantTrellis,
    layout: &FrameLayout,
    sigma: f64,
    seed: u64,
    stream: u64,
    qam: bool,
) -> Result<u64, ExperimentError> {
    let spec = trellis.spec();
    let mut rng = stream_rng(seed, stream);
    let info = random_bits(&mut rng, layout.info_bits);
    let uncoded = random_bits(&mut rng, spec.n_u() as usize * layout.payload_symbols);
    let mut noise = GaussianSource::from_rng(rng);
    let frame = encode_frame_with(spec, &info, &uncoded, if qam { 2 } else { 1 })?;
    let decoded = if qam {
        let tx: Vec<Complex<f64>> = frame
            .qam_symbols()?
            .iter()
            .map(|c| Complex::new(c.re as f64, c.im as f64))
            .collect();
        let rx = awgn_complex(&tx, sigma, &mut noise)?;
        decode_qam_block(trellis, &rx, layout)?
    } else {
        let tx: Vec<f64> = frame.ask_levels.iter().map(|&m| m as f64).collect();
        let rx = awgn_with(&tx, sigma, &mut noise)?;
        decode_block(trellis, &rx, layout)?
    };
    Ok(count_errors(&decoded.coded_info_bits, &info) + count_errors(&decoded.uncoded_bits, &uncoded))
}

/// Uncoded Gray-labeled M-ASK (or square QAM from two M-ASK streams) with
/// symbol-by-symbol detection; the classic reference curve.
pub fn simulate_uncoded_ber(
    m: u32,
    qam: bool,
    ebn0_db: &[f64],
    min_info_bits: u64,
    seed: u64,
) -> Result<Vec<BerRecord>, ExperimentError> {
    let k = m.trailing_zeros() as usize;
    let ask_rate = Rate::from(k as u64);
    let symbols_per_frame = 1024usize;
    let bits_per_frame = (k * symbols_per_frame) as u64;
    let frames = min_info_bits.max(1).div_ceil(bits_per_frame);
    ebn0_db
        .iter()
        .enumerate()
        .map(|(p, &db)| {
            let channel = if qam {
                ChannelConfig::qam_from_ask(m, ask_rate, db, seed)
            } else {
                ChannelConfig::ask(m, ask_rate, db, seed)
            };
            let sigma = ebn0_to_sigma(&channel)?;
            let errors: u64 = (0..frames)
                .into_par_iter()
                .map(|j| {
                    let mut rng = stream_rng(seed, ((p as u64) << 32) | j);
                    let bits = random_bits(&mut rng, k * symbols_per_frame);
                    let mut noise = GaussianSource::from_rng(rng);
                    let levels: Vec<f64> = bits
                        .chunks(k)
                        .map(|c| {
                            let natural = c.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
                            let label = natural ^ (natural >> 1);
                            (2 * label as i32 - (m as i32 - 1)) as f64
                        })
                        .collect();
                    let rx = if qam {
                        let tx: Vec<Complex<f64>> =
                            levels.chunks(2).map(|p| Complex::new(p[0], p[1])).collect();
                        awgn_complex(&tx, sigma, &mut noise)
                            .expect("sigma is finite")
                            .iter()
                            .flat_map(|c| [c.re, c.im])
                            .collect()
                    } else {
                        awgn_with(&levels, sigma, &mut noise).expect("sigma is finite")
                    };
                    let mut errors = 0u64;
                    for (sample, chunk) in rx.iter().zip(bits.chunks(k)) {
                        let label = (((sample + (m as f64 - 1.0)) / 2.0).round()).clamp(0.0, (m - 1) as f64) as u32;
                        let mut natural = label;
                        let mut shift = label >> 1;
                        while shift != 0 {
                            natural ^= shift;
                            shift >>= 1;
                        }
                        for (i, &b) in chunk.iter().enumerate() {
                            errors += (((natural >> (k - 1 - i)) & 1) as u8 != b) as u64;
                        }
                    }
                    errors
                })
                .sum();
            Ok(BerRecord::new(db, ask_rate, frames * bits_per_frame, errors))
        })
        .collect()
}

/// Log-linear interpolation of the sweep at `target`. A zero-error point is
/// treated as half an error.
pub fn required_ebn0_from(records: &[BerRecord], target: f64) -> Result<f64, ExperimentError> {
    let mut sorted: Vec<&BerRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.ebn0_db.total_cmp(&b.ebn0_db));
    let floor = |r: &BerRecord| r.ber.max(0.5 / r.info_bits_simulated.max(1) as f64);
    for pair in sorted.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if lo.ber >= target && hi.ber < target {
            let (y0, y1) = (floor(lo).ln(), floor(hi).ln());
            if y0 == y1 {
                return Ok(lo.ebn0_db);
            }
            let frac = (target.ln() - y0) / (y1 - y0);
            return Ok(lo.ebn0_db + frac * (hi.ebn0_db - lo.ebn0_db));
        }
    }
    Err(ExperimentError::NotBracketed { target })
}

/// Sweeps `grid` upwards, stopping once the BER falls below `target`, and
/// interpolates the crossing.
pub fn required_ebn0(
    spec: &CodeSpec,
    target: f64,
    grid: &[f64],
    min_info_bits: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<(f64, Vec<BerRecord>), ExperimentError> {
    let trellis = build_trellis(spec)?;
    let mut records = Vec::new();
    for (p, &db) in grid.iter().enumerate() {
        let rec = simulate_point(&trellis, db, p as u64, min_info_bits, seed, opts)?;
        let done = rec.ber < target;
        records.push(rec);
        if done {
            break;
        }
    }
    let at = required_ebn0_from(&records, target)?;
    Ok((at, records))
}

//! Shannon and constellation-constrained capacity.
//!
//! Real SNR is `E_s/σ²` with σ² the noise variance per dimension; complex
//! SNR is `E_s/N_0 = E_s/(2σ²)`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use super::ExperimentError;
use crate::pipeline::ask_energy;

const QUADRATURE_NODES: usize = 64;

/// Real capacity `½·log2(1+SNR)` or complex `log2(1+SNR)`.
pub fn shannon_capacity(snr: f64, complex: bool) -> Result<f64, ExperimentError> {
    if snr.is_nan() || snr < 0.0 {
        return Err(ExperimentError::NegativeSnr(snr));
    }
    let c = (1.0 + snr).log2();
    Ok(if complex { c } else { 0.5 * c })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constellation {
    /// M-ASK with odd integer levels.
    Ask(u32),
    /// Square M-QAM built from two √M-ASK components.
    Qam(u32),
}

impl Constellation {
    pub fn is_complex(&self) -> bool {
        matches!(self, Constellation::Qam(_))
    }

    pub fn size(&self) -> u32 {
        match *self {
            Constellation::Ask(m) | Constellation::Qam(m) => m,
        }
    }

    pub fn points(&self) -> Vec<Complex<f64>> {
        let levels = |m: u32| (0..m).map(move |l| (2 * l as i32 - (m as i32 - 1)) as f64);
        match *self {
            Constellation::Ask(m) => levels(m).map(|x| Complex::new(x, 0.0)).collect(),
            Constellation::Qam(m) => {
                let side = (m as f64).sqrt().round() as u32;
                levels(side)
                    .flat_map(|re| levels(side).map(move |im| Complex::new(re, im)))
                    .collect()
            }
        }
    }

    pub fn energy(&self) -> f64 {
        match *self {
            Constellation::Ask(m) => ask_energy(m),
            Constellation::Qam(m) => 2.0 * ask_energy((m as f64).sqrt().round() as u32),
        }
    }
}

impl FromStr for Constellation {
    type Err = ExperimentError;

    /// `4ask`, `16qam`, ...
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let lower = text.trim().to_ascii_lowercase();
        let bad = || ExperimentError::UnknownConstellation(text.to_string());
        let (num, complex) = if let Some(n) = lower.strip_suffix("ask") {
            (n, false)
        } else if let Some(n) = lower.strip_suffix("qam") {
            (n, true)
        } else {
            return Err(bad());
        };
        let m: u32 = num.parse().map_err(|_| bad())?;
        if m < 2 || !m.is_power_of_two() {
            return Err(bad());
        }
        if complex {
            let side = (m as f64).sqrt().round() as u32;
            if side * side != m {
                return Err(bad());
            }
            Ok(Constellation::Qam(m))
        } else {
            Ok(Constellation::Ask(m))
        }
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constellation::Ask(m) => write!(f, "{m}ask"),
            Constellation::Qam(m) => write!(f, "{m}qam"),
        }
    }
}

/// Nodes and weights of n-point Gauss–Hermite quadrature for the weight
/// `exp(−x²)`, by Newton iteration on the normalized Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Mutual information of equiprobable points over AWGN at `snr`, by
/// Gauss–Hermite quadrature (product rule in two dimensions).
pub fn constellation_capacity(constellation: Constellation, snr: f64) -> Result<f64, ExperimentError> {
    if snr.is_nan() || snr < 0.0 {
        return Err(ExperimentError::NegativeSnr(snr));
    }
    let points = constellation.points();
    let m = points.len() as f64;
    if snr == 0.0 {
        return Ok(0.0);
    }
    let sigma2 = if constellation.is_complex() {
        constellation.energy() / (2.0 * snr)
    } else {
        constellation.energy() / snr
    };
    let (nodes, weights) = gauss_hermite(QUADRATURE_NODES);
    let scale = (2.0 * sigma2).sqrt();
    let norm = std::f64::consts::PI.sqrt();
    // E_n log2 Σ_j exp(−(|x_i − x_j + n|² − |n|²)/2σ²), averaged over i
    let penalty = |noise: Complex<f64>| -> f64 {
        points
            .iter()
            .map(|xi| {
                let sum: f64 = points
                    .iter()
                    .map(|xj| {
                        let d = xi - xj + noise;
                        (-(d.norm_sqr() - noise.norm_sqr()) / (2.0 * sigma2)).exp()
                    })
                    .sum();
                sum.log2()
            })
            .sum::<f64>()
            / m
    };
    let mut expectation = 0.0;
    if constellation.is_complex() {
        for (a, wa) in nodes.iter().zip(&weights) {
            for (b, wb) in nodes.iter().zip(&weights) {
                expectation += wa * wb / (norm * norm) * penalty(Complex::new(scale * a, scale * b));
            }
        }
    } else {
        for (a, wa) in nodes.iter().zip(&weights) {
            expectation += wa / norm * penalty(Complex::new(scale * a, 0.0));
        }
    }
    Ok((m.log2() - expectation).max(0.0))
}

/// A curve of the spectral-efficiency plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityCurve {
    ShannonReal,
    ShannonComplex,
    Constellation(Constellation),
}

impl CapacityCurve {
    pub fn id(&self) -> String {
        match self {
            CapacityCurve::ShannonReal => "shannon-real".into(),
            CapacityCurve::ShannonComplex => "shannon-complex".into(),
            CapacityCurve::Constellation(c) => c.to_string(),
        }
    }

    fn is_complex(&self) -> bool {
        match self {
            CapacityCurve::ShannonReal => false,
            CapacityCurve::ShannonComplex => true,
            CapacityCurve::Constellation(c) => c.is_complex(),
        }
    }

    fn at_snr(&self, snr: f64) -> Result<f64, ExperimentError> {
        match *self {
            CapacityCurve::ShannonReal => shannon_capacity(snr, false),
            CapacityCurve::ShannonComplex => shannon_capacity(snr, true),
            CapacityCurve::Constellation(c) => constellation_capacity(c, snr),
        }
    }
}

impl FromStr for CapacityCurve {
    type Err = ExperimentError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        match text.trim() {
            "shannon-real" | "shannon" => Ok(CapacityCurve::ShannonReal),
            "shannon-complex" => Ok(CapacityCurve::ShannonComplex),
            other => other.parse().map(CapacityCurve::Constellation),
        }
    }
}

/// Largest rate R (bits per symbol) with `R <= C(SNR)` when the symbol
/// energy is `R·E_b`: the capacity limit expressed against E_b/N_0.
pub fn capacity_vs_ebn0(curve: CapacityCurve, ebn0_db: f64) -> Result<f64, ExperimentError> {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    let snr_of = |rate: f64| if curve.is_complex() { rate * ebn0 } else { 2.0 * rate * ebn0 };
    let gap = |rate: f64| -> Result<f64, ExperimentError> { Ok(curve.at_snr(snr_of(rate))? - rate) };

    let tiny = 1e-9;
    if gap(tiny)? <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while gap(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(hi);
        }
    }
    let mut lo = tiny;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shannon_points() {
        assert_eq!(shannon_capacity(1.0, true).unwrap(), 1.0);
        assert_eq!(shannon_capacity(3.0, false).unwrap(), 1.0);
        assert!(shannon_capacity(-1.0, true).is_err());
    }

    #[test]
    fn hermite_rule_integrates_moments() {
        let (x, w) = gauss_hermite(20);
        let moment = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        let pi = std::f64::consts::PI;
        assert!((moment(0) - pi.sqrt()).abs() < 1e-12);
        assert!((moment(2) - pi.sqrt() / 2.0).abs() < 1e-12);
        assert!((moment(4) - 3.0 * pi.sqrt() / 4.0).abs() < 1e-12);
        assert!(moment(3).abs() < 1e-12);
    }

    #[test]
    fn ask_limits() {
        let c = constellation_capacity(Constellation::Ask(4), 1e5).unwrap();
        assert!((c - 2.0).abs() < 1e-6, "{c}");
        assert_eq!(constellation_capacity(Constellation::Ask(4), 0.0).unwrap(), 0.0);
        assert!(constellation_capacity(Constellation::Ask(4), -1.0).is_err());
    }

    #[test]
    fn bpsk_low_snr_follows_shannon() {
        let snr = 1e-3;
        let c = constellation_capacity(Constellation::Ask(2), snr).unwrap();
        let s = shannon_capacity(snr, false).unwrap();
        assert!((c - s).abs() < 1e-5);
    }

    #[test]
    fn qam_is_two_asks() {
        for snr_db in [0.0, 5.0, 10.0, 15.0] {
            let snr = 10f64.powf(snr_db / 10.0);
            let qam = constellation_capacity(Constellation::Qam(16), snr).unwrap();
            let ask = constellation_capacity(Constellation::Ask(4), snr).unwrap();
            assert!((qam - 2.0 * ask).abs() < 1e-9, "{qam} {ask}");
        }
    }

    #[test]
    fn below_shannon_and_monotone() {
        for c in [Constellation::Ask(2), Constellation::Ask(4), Constellation::Ask(8), Constellation::Qam(16)] {
            let mut last = 0.0;
            for db in -10..30 {
                let snr = 10f64.powf(db as f64 / 10.0);
                let v = constellation_capacity(c, snr).unwrap();
                assert!(v <= shannon_capacity(snr, c.is_complex()).unwrap() + 1e-9);
                assert!(v + 1e-12 >= last);
                last = v;
            }
        }
    }

    #[test]
    fn ebn0_limit_of_shannon_curve() {
        // R·Eb/N0 form of the real channel: Eb/N0 = (2^{2R} − 1)/(2R).
        for rate in [0.5f64, 1.0, 2.0, 3.0] {
            let db = 10.0 * ((2f64.powf(2.0 * rate) - 1.0) / (2.0 * rate)).log10();
            let r = capacity_vs_ebn0(CapacityCurve::ShannonReal, db).unwrap();
            assert!((r - rate).abs() < 1e-6, "{r} {rate}");
        }
        assert_eq!(capacity_vs_ebn0(CapacityCurve::ShannonReal, -2.0).unwrap(), 0.0);
        let r = capacity_vs_ebn0(CapacityCurve::Constellation(Constellation::Ask(4)), 25.0).unwrap();
        assert!(r > 1.99 && r <= 2.0);
    }

    #[test]
    fn parsing() {
        assert_eq!("4ask".parse::<Constellation>().unwrap(), Constellation::Ask(4));
        assert_eq!("16QAM".parse::<Constellation>().unwrap(), Constellation::Qam(16));
        assert!("32qam".parse::<Constellation>().is_err());
        assert!("3ask".parse::<Constellation>().is_err());
        assert_eq!("shannon-complex".parse::<CapacityCurve>().unwrap(), CapacityCurve::ShannonComplex);
        assert_eq!(CapacityCurve::Constellation(Constellation::Ask(8)).id(), "8ask");
    }
}

//! Transmit chain: convolutional encoding, puncturing, labeling, ASK mapping
//! and QAM pairing.

use std::fmt::Write as _;

use num_complex::Complex;
use thiserror::Error;

use crate::code::{CodeSpec, GeneratorSet, Generator, Labeling, PuncturingScheme, CODED_OUTPUTS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("coded bit count {0} is not a multiple of 2")]
    CodedLength(usize),
    #[error("expected {expected} uncoded bits, got {got}")]
    UncodedLength { expected: usize, got: usize },
    #[error("{info} info bits are not a multiple of the period's {period}")]
    Unaligned { info: usize, period: usize },
    #[error("label {label} out of range for M = {m}")]
    LabelRange { label: u32, m: u32 },
    #[error("lookup table has no entry for {0}")]
    LookupMissing(u32),
    #[error("Gray labeling has no closed form beyond two bits")]
    GrayWidth,
    #[error("QAM pairing needs an even number of levels, got {0}")]
    OddLevels(usize),
}

/// g1 and g2 outputs of one encoder step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CodedPair {
    pub msb: u8,
    pub lsb: u8,
}

/// Feedforward encoding from the all-zero state.
pub fn cc_encode(bits: &[u8], g: &GeneratorSet) -> Vec<CodedPair> {
    let nu = g.memory();
    let mask = (1u32 << (nu + 1)) - 1;
    let mut window = 0u32;
    bits.iter()
        .map(|&b| {
            window = ((window >> 1) | ((b as u32 & 1) << nu)) & mask;
            CodedPair {
                msb: g.output(Generator::G1, window),
                lsb: g.output(Generator::G2, window),
            }
        })
        .collect()
}

/// Drops the outputs whose scheme entry is zero; the column advances once per
/// encoder step. Within a step g1 precedes g2.
pub fn puncture(pairs: &[CodedPair], scheme: &PuncturingScheme) -> Vec<u8> {
    let mut out = Vec::with_capacity(pairs.len() * CODED_OUTPUTS);
    for (step, pair) in pairs.iter().enumerate() {
        for g in scheme.surviving(step) {
            out.push(match g {
                Generator::G1 => pair.msb,
                Generator::G2 => pair.lsb,
            });
        }
    }
    out
}

/// Two-bit label of a coded pair. Lookup tables are indexed by `2·msb + lsb`.
pub fn label_bits(msb: u8, lsb: u8, labeling: &Labeling) -> Result<u32, PipelineError> {
    let (msb, lsb) = ((msb & 1) as u32, (lsb & 1) as u32);
    let natural = 2 * msb + lsb;
    match labeling {
        Labeling::Natural => Ok(natural),
        Labeling::Gray => Ok((1 - msb) * (2 * msb + lsb) + msb * (2 * msb + (1 - lsb))),
        Labeling::Lookup(table) => table
            .get(natural as usize)
            .copied()
            .ok_or(PipelineError::LookupMissing(natural)),
    }
}

/// Label for `n_u` uncoded bits (most significant positions) on top of the
/// coded pair.
pub fn symbol_label(msb: u8, lsb: u8, uncoded: u32, spec: &CodeSpec) -> Result<u32, PipelineError> {
    let packed = (uncoded << CODED_OUTPUTS) | (2 * (msb & 1) as u32 + (lsb & 1) as u32);
    match spec.labeling() {
        Labeling::Natural => Ok(packed),
        Labeling::Gray if spec.n_u() == 0 => label_bits(msb, lsb, &Labeling::Gray),
        Labeling::Gray => Err(PipelineError::GrayWidth),
        Labeling::Lookup(table) => table
            .get(packed as usize)
            .copied()
            .ok_or(PipelineError::LookupMissing(packed)),
    }
}

/// Packs coded bit pairs and uncoded bits into labels, one per symbol.
/// Uncoded bits for a symbol are read most significant first.
pub fn assemble_labels(
    coded_bits: &[u8],
    uncoded_bits: &[u8],
    spec: &CodeSpec,
) -> Result<Vec<u32>, PipelineError> {
    if !coded_bits.len().is_multiple_of(CODED_OUTPUTS) {
        return Err(PipelineError::CodedLength(coded_bits.len()));
    }
    let symbols = coded_bits.len() / CODED_OUTPUTS;
    let n_u = spec.n_u() as usize;
    if uncoded_bits.len() != n_u * symbols {
        return Err(PipelineError::UncodedLength {
            expected: n_u * symbols,
            got: uncoded_bits.len(),
        });
    }
    (0..symbols)
        .map(|k| {
            let uncoded = pack_bits(&uncoded_bits[k * n_u..(k + 1) * n_u]);
            symbol_label(coded_bits[2 * k], coded_bits[2 * k + 1], uncoded, spec)
        })
        .collect()
}

pub(crate) fn pack_bits(bits: &[u8]) -> u32 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as u32)
}

/// `m = 2ℓ − (M − 1)`.
pub fn map_ask(label: u32, m: u32) -> Result<i32, PipelineError> {
    if label >= m {
        return Err(PipelineError::LabelRange { label, m });
    }
    Ok(2 * label as i32 - (m as i32 - 1))
}

/// Consecutive ASK levels become the in-phase and quadrature parts of one
/// QAM symbol.
pub fn pair_qam(levels: &[i32]) -> Result<Vec<Complex<i32>>, PipelineError> {
    if !levels.len().is_multiple_of(2) {
        return Err(PipelineError::OddLevels(levels.len()));
    }
    Ok(levels.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect())
}

/// Average energy of M-ASK with odd integer levels.
pub fn ask_energy(m: u32) -> f64 {
    let m = m as f64;
    (m * m - 1.0) / 3.0
}

/// Block sizes of one terminated frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub info_bits: usize,
    /// Zero bits appended after the payload (at least ν).
    pub tail_bits: usize,
    pub payload_symbols: usize,
    pub tail_symbols: usize,
}

impl FrameLayout {
    /// Layout for `info_bits` payload bits. The tail is the shortest run of at
    /// least ν zero inputs that ends on a step boundary and makes the symbol
    /// count a multiple of `symbol_multiple` (2 when symbols are paired to
    /// QAM).
    pub fn new(spec: &CodeSpec, info_bits: usize, symbol_multiple: usize) -> Result<Self, PipelineError> {
        let period = spec.effective_period();
        if !info_bits.is_multiple_of(period.info_bits) {
            return Err(PipelineError::Unaligned {
                info: info_bits,
                period: period.info_bits,
            });
        }
        let scheme = spec.scheme();
        let payload_symbols = info_bits / period.info_bits * period.symbols;
        let multiple = symbol_multiple.max(1);
        let mut tail_bits = 0;
        let mut emitted = 0;
        loop {
            if tail_bits >= spec.memory() as usize
                && emitted % CODED_OUTPUTS == 0
                && (payload_symbols + emitted / CODED_OUTPUTS).is_multiple_of(multiple)
            {
                break;
            }
            emitted += scheme.column_weight((info_bits + tail_bits) % scheme.period());
            tail_bits += 1;
        }
        Ok(Self {
            info_bits,
            tail_bits,
            payload_symbols,
            tail_symbols: emitted / CODED_OUTPUTS,
        })
    }

    pub fn total_symbols(&self) -> usize {
        self.payload_symbols + self.tail_symbols
    }

    pub fn total_steps(&self) -> usize {
        self.info_bits + self.tail_bits
    }

    /// Recovers the payload size from a received frame length.
    pub fn from_symbol_count(
        spec: &CodeSpec,
        total_symbols: usize,
        symbol_multiple: usize,
    ) -> Result<Self, PipelineError> {
        let period = spec.effective_period();
        let tail = Self::new(spec, 0, symbol_multiple)?;
        // Tail length only depends on the phase, which is the same at every
        // period boundary, but the QAM pairing can change with the payload.
        for periods in 0..=total_symbols / period.symbols.max(1) {
            let layout = Self::new(spec, periods * period.info_bits, symbol_multiple)?;
            if layout.total_symbols() == total_symbols {
                return Ok(layout);
            }
        }
        Err(PipelineError::Unaligned {
            info: total_symbols.saturating_sub(tail.total_symbols()),
            period: period.symbols,
        })
    }
}

/// Labels and levels of a terminated frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolFrame {
    pub labels: Vec<u32>,
    pub ask_levels: Vec<i32>,
    pub tail_len: usize,
    pub layout: FrameLayout,
}

impl SymbolFrame {
    /// `k,ℓ,m` lines.
    pub fn dump_csv(&self) -> String {
        let mut out = String::new();
        for (k, (l, m)) in self.labels.iter().zip(&self.ask_levels).enumerate() {
            let _ = writeln!(out, "{k},{l},{m}");
        }
        out
    }

    pub fn qam_symbols(&self) -> Result<Vec<Complex<i32>>, PipelineError> {
        pair_qam(&self.ask_levels)
    }
}

pub fn encode_frame(spec: &CodeSpec, info_bits: &[u8], uncoded_bits: &[u8]) -> Result<SymbolFrame, PipelineError> {
    encode_frame_with(spec, info_bits, uncoded_bits, 1)
}

/// Encodes a payload plus termination. Tail symbols carry zero uncoded bits.
pub fn encode_frame_with(
    spec: &CodeSpec,
    info_bits: &[u8],
    uncoded_bits: &[u8],
    symbol_multiple: usize,
) -> Result<SymbolFrame, PipelineError> {
    let layout = FrameLayout::new(spec, info_bits.len(), symbol_multiple)?;
    let n_u = spec.n_u() as usize;
    if uncoded_bits.len() != n_u * layout.payload_symbols {
        return Err(PipelineError::UncodedLength {
            expected: n_u * layout.payload_symbols,
            got: uncoded_bits.len(),
        });
    }
    let mut input = info_bits.to_vec();
    input.resize(layout.total_steps(), 0);
    let coded = puncture(&cc_encode(&input, spec.generators()), spec.scheme());
    let mut uncoded = uncoded_bits.to_vec();
    uncoded.resize(n_u * layout.total_symbols(), 0);
    let labels = assemble_labels(&coded, &uncoded, spec)?;
    let ask_levels = labels
        .iter()
        .map(|&l| map_ask(l, spec.m()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SymbolFrame {
        labels,
        ask_levels,
        tail_len: layout.tail_symbols,
        layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::Rate;
    use proptest::prelude::*;

    fn gens(text: &str) -> GeneratorSet {
        text.parse().unwrap()
    }

    fn scheme(text: &str) -> PuncturingScheme {
        text.parse().unwrap()
    }

    fn pairs(bits: &[(u8, u8)]) -> Vec<CodedPair> {
        bits.iter().map(|&(msb, lsb)| CodedPair { msb, lsb }).collect()
    }

    // Shift-register reference written independently of `cc_encode`.
    fn shift_register(bits: &[u8], g: &GeneratorSet) -> Vec<(u8, u8)> {
        let nu = g.memory() as usize;
        let mut reg = vec![0u8; nu + 1];
        let taps = |poly: u32| -> Vec<u8> { (0..=nu).map(|i| ((poly >> (nu - i)) & 1) as u8).collect() };
        let (t1, t2) = (taps(g.g1()), taps(g.g2()));
        bits.iter()
            .map(|&b| {
                reg.rotate_right(1);
                reg[0] = b;
                let dot = |t: &[u8]| reg.iter().zip(t).fold(0, |acc, (r, t)| acc ^ (r & t));
                (dot(&t1), dot(&t2))
            })
            .collect()
    }

    #[test]
    fn impulse_response_5_7() {
        let out = cc_encode(&[1, 0, 0], &gens("5,7"));
        assert_eq!(out, pairs(&[(1, 1), (0, 1), (1, 1)]));
    }

    #[test]
    fn impulse_response_26_37() {
        let g = gens("26,37");
        let out = cc_encode(&[1, 0, 0, 0, 0], &g);
        // g1 = 10110, g2 = 11111 read from the current tap down.
        let golden = pairs(&[(1, 1), (0, 1), (1, 1), (1, 1), (0, 1)]);
        assert_eq!(out, golden);
        assert_eq!(shift_register(&[1, 0, 0, 0, 0], &g), vec![(1, 1), (0, 1), (1, 1), (1, 1), (0, 1)]);
    }

    #[test]
    fn zero_input_zero_output() {
        let out = cc_encode(&[0; 12], &gens("26,37"));
        assert!(out.iter().all(|p| *p == CodedPair::default()));
    }

    #[test]
    fn puncture_examples() {
        let s = scheme("1 0;1 1");
        assert_eq!(puncture(&pairs(&[(1, 1), (0, 1), (1, 1)]), &s), vec![1, 1, 1, 1, 1]);
        assert_eq!(
            puncture(&pairs(&[(1, 1), (0, 1), (1, 1), (0, 0)]), &s),
            vec![1, 1, 1, 1, 1, 0]
        );
        let p = pairs(&[(1, 0), (0, 1), (1, 1)]);
        assert_eq!(puncture(&p, &PuncturingScheme::all_ones(1)), vec![1, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn labels_for_four_points() {
        assert_eq!(label_bits(1, 0, &Labeling::Natural), Ok(2));
        assert_eq!(label_bits(0, 0, &Labeling::Natural), Ok(0));
        assert_eq!(label_bits(1, 0, &Labeling::Gray), Ok(3));
        assert_eq!(label_bits(1, 1, &Labeling::Gray), Ok(2));
        assert_eq!(label_bits(0, 1, &Labeling::Gray), Ok(1));
        assert_eq!(label_bits(1, 1, &Labeling::Lookup(vec![0, 1])), Err(PipelineError::LookupMissing(3)));
    }

    #[test]
    fn assembles_uncoded_on_top() {
        let spec8 = CodeSpec::with_uncoded(gens("5,7"), PuncturingScheme::all_ones(1), 1);
        assert_eq!(assemble_labels(&[1, 0], &[1], &spec8), Ok(vec![6]));
        assert_eq!(assemble_labels(&[0, 0, 1, 1], &[0, 1], &spec8), Ok(vec![0, 7]));
        assert_eq!(
            assemble_labels(&[0, 0, 1, 1], &[0], &spec8),
            Err(PipelineError::UncodedLength { expected: 2, got: 1 })
        );
        assert_eq!(assemble_labels(&[0, 0, 1], &[0], &spec8), Err(PipelineError::CodedLength(3)));
        let spec4 = CodeSpec::ask4(gens("5,7"), PuncturingScheme::all_ones(1));
        assert_eq!(assemble_labels(&[1, 0, 0, 1, 1, 1], &[], &spec4), Ok(vec![2, 1, 3]));
    }

    #[test]
    fn ask_and_qam_mapping() {
        assert_eq!(map_ask(0, 4), Ok(-3));
        assert_eq!(map_ask(3, 4), Ok(3));
        assert_eq!(map_ask(4, 4), Err(PipelineError::LabelRange { label: 4, m: 4 }));
        for m in [4u32, 8, 16, 32] {
            for l in 0..m {
                assert_eq!(map_ask(l, m).unwrap(), -map_ask(m - 1 - l, m).unwrap());
            }
            let levels: Vec<i32> = (0..m).map(|l| map_ask(l, m).unwrap()).collect();
            let mut sorted = levels.clone();
            sorted.dedup();
            assert_eq!(sorted.len(), m as usize);
            assert!(levels.iter().all(|v| v % 2 != 0));
            let energy = levels.iter().map(|&v| (v * v) as f64).sum::<f64>() / m as f64;
            assert_eq!(energy, ask_energy(m));
        }
        assert_eq!(pair_qam(&[-3, 1]), Ok(vec![Complex::new(-3, 1)]));
        assert_eq!(pair_qam(&[-3]), Err(PipelineError::OddLevels(1)));
    }

    fn min_distance(points: &[i32]) -> i32 {
        let mut best = i32::MAX;
        for (i, a) in points.iter().enumerate() {
            for b in &points[i + 1..] {
                best = best.min((a - b).abs());
            }
        }
        best
    }

    #[test]
    fn uncoded_bits_realize_set_partitioning() {
        for n_u in [1u32, 2] {
            let spec = CodeSpec::with_uncoded(gens("5,7"), PuncturingScheme::all_ones(1), n_u);
            let full: Vec<i32> = (0..spec.m()).map(|l| map_ask(l, spec.m()).unwrap()).collect();
            for coset in 0..4u32 {
                let points: Vec<i32> = (0..1u32 << n_u)
                    .map(|u| {
                        let l = symbol_label((coset >> 1) as u8, (coset & 1) as u8, u, &spec).unwrap();
                        map_ask(l, spec.m()).unwrap()
                    })
                    .collect();
                assert!(min_distance(&points) > min_distance(&full));
            }
        }
    }

    #[test]
    fn frame_examples() {
        let spec = CodeSpec::ask4(gens("26,37"), scheme("1 0;1 1"));
        let frame = encode_frame(&spec, &[1, 0, 1, 1], &[]).unwrap();
        assert_eq!(frame.layout.payload_symbols, 3);
        assert_eq!(frame.layout.tail_bits, 4);
        assert_eq!(frame.tail_len, 3);
        assert_eq!(frame.labels.len(), 6);
        let rate = Rate::new(frame.layout.info_bits as u64, frame.layout.payload_symbols as u64);
        assert_eq!(rate, Rate::new(4, 3));

        let empty = encode_frame(&spec, &[], &[]).unwrap();
        assert_eq!(empty.layout.payload_symbols, 0);
        assert_eq!(empty.labels, vec![0; empty.tail_len]);

        assert_eq!(
            encode_frame(&spec, &[1, 0, 1], &[]),
            Err(PipelineError::Unaligned { info: 3, period: 4 })
        );
    }

    #[test]
    fn tail_pads_to_step_boundary() {
        // Period weight 5 is odd, so the ν = 4 tail needs two extra steps.
        let spec = CodeSpec::ask4(gens("34,31"), scheme("1 0 1 0;1 1 0 1"));
        let layout = FrameLayout::new(&spec, 8, 1).unwrap();
        assert_eq!(layout.tail_bits, 6);
        assert_eq!(layout.tail_symbols, 4);
        let paired = FrameLayout::new(&spec, 8, 2).unwrap();
        assert_eq!(paired.total_symbols() % 2, 0);
        assert_eq!(FrameLayout::from_symbol_count(&spec, layout.total_symbols(), 1), Ok(layout));
    }

    #[test]
    fn dump_format() {
        let spec = CodeSpec::ask4(gens("5,7"), PuncturingScheme::all_ones(1));
        let frame = encode_frame(&spec, &[1], &[]).unwrap();
        assert_eq!(frame.dump_csv(), "0,3,3\n1,1,-1\n2,3,3\n");
    }

    proptest! {
        #[test]
        fn encoder_is_linear(a in prop::collection::vec(0u8..2, 0..40), seed in any::<u64>()) {
            let b: Vec<u8> = a.iter().enumerate().map(|(i, _)| ((seed >> (i % 64)) & 1) as u8).collect();
            let g = gens("26,37");
            let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let lhs = cc_encode(&sum, &g);
            let (ea, eb) = (cc_encode(&a, &g), cc_encode(&b, &g));
            for ((l, x), y) in lhs.iter().zip(&ea).zip(&eb) {
                prop_assert_eq!(l.msb, x.msb ^ y.msb);
                prop_assert_eq!(l.lsb, x.lsb ^ y.lsb);
            }
        }

        #[test]
        fn encoder_matches_shift_register(bits in prop::collection::vec(0u8..2, 0..40), g1 in 1u32..32, g2 in 1u32..32) {
            let g = GeneratorSet::new(g1, g2).unwrap();
            let ours: Vec<(u8, u8)> = cc_encode(&bits, &g).iter().map(|p| (p.msb, p.lsb)).collect();
            prop_assert_eq!(ours, shift_register(&bits, &g));
        }

        #[test]
        fn puncturing_conserves_bits(bits in prop::collection::vec(0u8..2, 0..60), idx in 0usize..4) {
            let s = scheme(["1 0;1 1", "1 1 1;1 0 0", "1 0 1 0;1 1 0 1", "1 1 1 1 0;1 0 0 0 1"][idx]);
            let p = cc_encode(&bits, &gens("26,37"));
            let expected: usize = (0..p.len()).map(|k| s.column_weight(k % s.period())).sum();
            prop_assert_eq!(puncture(&p, &s).len(), expected);
        }

        #[test]
        fn frame_ends_in_zero_state(periods in 0usize..6, seed in any::<u64>(), idx in 0usize..3) {
            let s = scheme(["1 0;1 1", "1 1 1;1 0 0", "1 0 1 0;1 1 0 1"][idx]);
            let spec = CodeSpec::ask4(gens("26,37"), s);
            let n = periods * spec.effective_period().info_bits;
            let info: Vec<u8> = (0..n).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
            let frame = encode_frame(&spec, &info, &[]).unwrap();
            let mut input = info.clone();
            input.resize(frame.layout.total_steps(), 0);
            let nu = spec.memory() as usize;
            prop_assert!(input[input.len() - nu..].iter().all(|&b| b == 0));
            prop_assert_eq!(frame.labels.len(), frame.layout.total_symbols());
            prop_assert!(frame.ask_levels.iter().zip(&frame.labels).all(|(&m, &l)| m == 2 * l as i32 - 3));
        }
    }
}

//! Mother code, puncturing and rate arithmetic.
//!
//! Generators are written in octal with the leading (most significant) bit of
//! the mask tapping the current encoder input, so `5,7` is the classic
//! memory-2 code `(1 + D^2, 1 + D + D^2)`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

/// Exact rate in bits per channel symbol.
pub type Rate = Ratio<u64>;

/// Number of encoder outputs per input bit.
pub const CODED_OUTPUTS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("invalid octal digit in generator `{0}`")]
    BadOctal(String),
    #[error("expected exactly two generators, got {0}")]
    GeneratorCount(usize),
    #[error("generator polynomials must be nonzero")]
    ZeroGenerator,
    #[error("generator {poly:o} does not fit into memory {memory}")]
    MemoryTooSmall { poly: u32, memory: u32 },
    #[error("memory {0} is too large (at most 16 supported)")]
    MemoryTooLarge(u32),
    #[error("puncturing scheme must have exactly 2 rows, got {0}")]
    SchemeRows(usize),
    #[error("puncturing rows have different lengths")]
    RaggedScheme,
    #[error("puncturing scheme must have at least one column")]
    EmptyScheme,
    #[error("puncturing entry `{0}` is not 0 or 1")]
    SchemeEntry(String),
    #[error("puncturing column {0} is all zero")]
    ZeroColumn(usize),
    #[error("constellation size {0} is not a power of two >= 4")]
    BadConstellation(u32),
    #[error("log2(M) = {log2m} but n_c + n_u = {width}")]
    LabelWidth { log2m: u32, width: u32 },
    #[error("Gray labeling is only defined for M = 4")]
    GrayNeedsM4,
    #[error("lookup table has {got} entries, {need} needed")]
    LookupMissing { got: usize, need: usize },
    #[error("lookup table is not a permutation of 0..{0}")]
    LookupNotPermutation(u32),
    #[error("unknown labeling `{0}`")]
    UnknownLabeling(String),
}

/// Selects one of the two mother-code generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    G1,
    G2,
}

impl Generator {
    pub fn index(self) -> usize {
        match self {
            Generator::G1 => 0,
            Generator::G2 => 1,
        }
    }

    pub fn from_row(row: usize) -> Self {
        if row == 0 {
            Generator::G1
        } else {
            Generator::G2
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::G1 => f.write_str("g1"),
            Generator::G2 => f.write_str("g2"),
        }
    }
}

/// The rate-1/2 feedforward mother code.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GeneratorSet {
    polys: [u32; 2],
    memory: u32,
}

impl GeneratorSet {
    /// Builds a generator pair, inferring the memory from the highest tap.
    pub fn new(g1: u32, g2: u32) -> Result<Self, CodeError> {
        if g1 == 0 || g2 == 0 {
            return Err(CodeError::ZeroGenerator);
        }
        let memory = 31 - (g1 | g2).leading_zeros();
        Self::with_memory(g1, g2, memory)
    }

    /// Builds a generator pair with an explicit memory. Every tap must fit
    /// into `memory + 1` bits.
    pub fn with_memory(g1: u32, g2: u32, memory: u32) -> Result<Self, CodeError> {
        if g1 == 0 || g2 == 0 {
            return Err(CodeError::ZeroGenerator);
        }
        if memory > 16 {
            return Err(CodeError::MemoryTooLarge(memory));
        }
        for poly in [g1, g2] {
            if poly >> (memory + 1) != 0 {
                return Err(CodeError::MemoryTooSmall { poly, memory });
            }
        }
        Ok(Self {
            polys: [g1, g2],
            memory,
        })
    }

    pub fn g1(&self) -> u32 {
        self.polys[0]
    }

    pub fn g2(&self) -> u32 {
        self.polys[1]
    }

    pub fn poly(&self, g: Generator) -> u32 {
        self.polys[g.index()]
    }

    /// Memory ν (number of delay elements).
    pub fn memory(&self) -> u32 {
        self.memory
    }

    pub fn base_states(&self) -> usize {
        1 << self.memory
    }

    /// Output of generator `g` for an input window of `memory + 1` bits whose
    /// bit `memory` is the current input and bit 0 the oldest one.
    #[inline]
    pub fn output(&self, g: Generator, window: u32) -> u8 {
        ((self.polys[g.index()] & window).count_ones() & 1) as u8
    }

    pub fn to_octal(&self) -> String {
        format!("{:o},{:o}", self.polys[0], self.polys[1])
    }
}

impl FromStr for GeneratorSet {
    type Err = CodeError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(CodeError::GeneratorCount(parts.len()));
        }
        let mut polys = [0u32; 2];
        for (slot, part) in polys.iter_mut().zip(&parts) {
            if part.is_empty() || !part.bytes().all(|b| (b'0'..=b'7').contains(&b)) {
                return Err(CodeError::BadOctal(part.to_string()));
            }
            *slot = u32::from_str_radix(part, 8).map_err(|_| CodeError::BadOctal(part.to_string()))?;
        }
        GeneratorSet::new(polys[0], polys[1])
    }
}

impl fmt::Display for GeneratorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_octal())
    }
}

/// Parses `"g1,g2"` octal generators.
pub fn parse_octal_generators(text: &str) -> Result<GeneratorSet, CodeError> {
    text.parse()
}

/// Product of two GF(2) polynomials is not needed; only the remainder is.
fn gf2_rem(mut a: u32, b: u32) -> u32 {
    let db = 31 - b.leading_zeros();
    while a != 0 && 31 - a.leading_zeros() >= db {
        let shift = (31 - a.leading_zeros()) - db;
        a ^= b << shift;
    }
    a
}

/// Greatest common divisor over GF(2)[x].
pub fn gf2_gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let r = gf2_rem(a, b);
        a = b;
        b = r;
    }
    a
}

/// A feedforward rate-1/2 code is catastrophic iff its generators share a
/// non-monomial factor.
pub fn is_catastrophic(g: &GeneratorSet) -> bool {
    gf2_gcd(g.g1(), g.g2()).count_ones() > 1
}

/// The 2×Ω puncturing matrix. Row 0 masks g1, row 1 masks g2.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PuncturingScheme {
    rows: [Vec<u8>; 2],
}

/// Repetitions of a puncturing period needed to fill whole symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EffectivePeriod {
    pub repetitions: usize,
    pub info_bits: usize,
    pub symbols: usize,
}

impl PuncturingScheme {
    pub fn new(row1: Vec<u8>, row2: Vec<u8>) -> Result<Self, CodeError> {
        if row1.len() != row2.len() {
            return Err(CodeError::RaggedScheme);
        }
        if row1.is_empty() {
            return Err(CodeError::EmptyScheme);
        }
        for &v in row1.iter().chain(&row2) {
            if v > 1 {
                return Err(CodeError::SchemeEntry(v.to_string()));
            }
        }
        if let Some(col) = (0..row1.len()).find(|&j| row1[j] == 0 && row2[j] == 0) {
            return Err(CodeError::ZeroColumn(col));
        }
        Ok(Self { rows: [row1, row2] })
    }

    /// No puncturing, period Ω.
    pub fn all_ones(period: usize) -> Self {
        Self::new(vec![1; period.max(1)], vec![1; period.max(1)]).expect("valid all-ones scheme")
    }

    pub fn period(&self) -> usize {
        self.rows[0].len()
    }

    pub fn entry(&self, row: usize, col: usize) -> bool {
        self.rows[row][col] == 1
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.rows[row]
    }

    pub fn column_weight(&self, col: usize) -> usize {
        (self.rows[0][col] + self.rows[1][col]) as usize
    }

    /// Surviving coded bits per period.
    pub fn weight(&self) -> usize {
        (0..self.period()).map(|j| self.column_weight(j)).sum()
    }

    pub fn erased(&self) -> usize {
        CODED_OUTPUTS * self.period() - self.weight()
    }

    /// Generators that survive at input step `step` (taken cyclically), in
    /// transmission order.
    pub fn surviving(&self, step: usize) -> impl Iterator<Item = Generator> + '_ {
        let col = step % self.period();
        (0..CODED_OUTPUTS)
            .filter(move |&row| self.rows[row][col] == 1)
            .map(Generator::from_row)
    }

    /// `n_c·Ω / ΣΣ P_ij`.
    pub fn puncture_rate(&self) -> Rate {
        Rate::new((CODED_OUTPUTS * self.period()) as u64, self.weight() as u64)
    }

    /// Smallest repetition of the period whose surviving bits fill whole
    /// symbols of `coded_bits_per_symbol` bits.
    pub fn effective_period_bits(&self, coded_bits_per_symbol: usize) -> EffectivePeriod {
        let w = self.weight();
        let reps = (1..=coded_bits_per_symbol)
            .find(|r| (r * w).is_multiple_of(coded_bits_per_symbol))
            .unwrap_or(coded_bits_per_symbol);
        EffectivePeriod {
            repetitions: reps,
            info_bits: reps * self.period(),
            symbols: reps * w / coded_bits_per_symbol,
        }
    }
}

/// Effective period for a constellation of size `m` carrying only coded bits
/// (`log2 m` coded bits per symbol).
pub fn effective_period(scheme: &PuncturingScheme, m: u32) -> EffectivePeriod {
    scheme.effective_period_bits(m.trailing_zeros() as usize)
}

pub fn puncture_rate(scheme: &PuncturingScheme) -> Rate {
    scheme.puncture_rate()
}

impl FromStr for PuncturingScheme {
    type Err = CodeError;

    /// Rows separated by `;`, entries by whitespace: `"1 0;1 1"`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let rows: Vec<&str> = text.split(';').collect();
        if rows.len() != 2 {
            return Err(CodeError::SchemeRows(rows.len()));
        }
        let mut parsed = Vec::with_capacity(2);
        for row in rows {
            let entries = row
                .split_whitespace()
                .map(|e| match e {
                    "0" => Ok(0u8),
                    "1" => Ok(1u8),
                    other => Err(CodeError::SchemeEntry(other.to_string())),
                })
                .collect::<Result<Vec<_>, _>>()?;
            parsed.push(entries);
        }
        let row2 = parsed.pop().unwrap();
        let row1 = parsed.pop().unwrap();
        PuncturingScheme::new(row1, row2)
    }
}

impl fmt::Display for PuncturingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |r: &[u8]| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        write!(f, "{};{}", join(&self.rows[0]), join(&self.rows[1]))
    }
}

/// Mapping from (uncoded bits, coded MSB, coded LSB) to a label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Labeling {
    Natural,
    /// Two-bit Gray map, only for M = 4.
    Gray,
    /// `table[naturally packed bits] = label`.
    Lookup(Vec<u32>),
}

impl Labeling {
    pub fn name(&self) -> &'static str {
        match self {
            Labeling::Natural => "natural",
            Labeling::Gray => "gray",
            Labeling::Lookup(_) => "lookup",
        }
    }
}

impl FromStr for Labeling {
    type Err = CodeError;

    /// `natural`, `gray`, or `lookup:0,1,3,2,...`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        match text.trim() {
            "natural" => Ok(Labeling::Natural),
            "gray" => Ok(Labeling::Gray),
            other => {
                let Some(body) = other.strip_prefix("lookup:") else {
                    return Err(CodeError::UnknownLabeling(other.to_string()));
                };
                body.split(',')
                    .map(|e| e.trim().parse::<u32>())
                    .collect::<Result<Vec<_>, _>>()
                    .map(Labeling::Lookup)
                    .map_err(|_| CodeError::UnknownLabeling(other.to_string()))
            }
        }
    }
}

impl fmt::Display for Labeling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Labeling::Lookup(t) => {
                let body = t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
                write!(f, "lookup:{body}")
            }
            other => f.write_str(other.name()),
        }
    }
}

/// The full transmit configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeSpec {
    generators: GeneratorSet,
    scheme: PuncturingScheme,
    m: u32,
    n_u: u32,
    labeling: Labeling,
}

impl CodeSpec {
    pub fn new(
        generators: GeneratorSet,
        scheme: PuncturingScheme,
        m: u32,
        n_u: u32,
        labeling: Labeling,
    ) -> Result<Self, CodeError> {
        if m < 4 || !m.is_power_of_two() {
            return Err(CodeError::BadConstellation(m));
        }
        let log2m = m.trailing_zeros();
        if log2m != CODED_OUTPUTS as u32 + n_u {
            return Err(CodeError::LabelWidth {
                log2m,
                width: CODED_OUTPUTS as u32 + n_u,
            });
        }
        match &labeling {
            Labeling::Gray if m != 4 => return Err(CodeError::GrayNeedsM4),
            Labeling::Lookup(table) => {
                if table.len() < m as usize {
                    return Err(CodeError::LookupMissing {
                        got: table.len(),
                        need: m as usize,
                    });
                }
                let mut seen = vec![false; m as usize];
                for &v in &table[..m as usize] {
                    if v >= m || std::mem::replace(&mut seen[v as usize], true) {
                        return Err(CodeError::LookupNotPermutation(m));
                    }
                }
            }
            _ => {}
        }
        Ok(Self {
            generators,
            scheme,
            m,
            n_u,
            labeling,
        })
    }

    /// 4-ASK, no uncoded bits, natural labeling.
    pub fn ask4(generators: GeneratorSet, scheme: PuncturingScheme) -> Self {
        Self::new(generators, scheme, 4, 0, Labeling::Natural).expect("valid 4-ASK spec")
    }

    /// Natural labeling with `n_u` uncoded bits on a 2^(n_u+2)-ASK.
    pub fn with_uncoded(generators: GeneratorSet, scheme: PuncturingScheme, n_u: u32) -> Self {
        Self::new(generators, scheme, 1 << (n_u + 2), n_u, Labeling::Natural)
            .expect("valid natural spec")
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.generators
    }

    pub fn scheme(&self) -> &PuncturingScheme {
        &self.scheme
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n_u(&self) -> u32 {
        self.n_u
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    pub fn memory(&self) -> u32 {
        self.generators.memory()
    }

    /// `R = R_c·R_p·n_c + n_u`.
    pub fn overall_rate(&self) -> Rate {
        let code_rate = Rate::new(1, CODED_OUTPUTS as u64);
        code_rate * self.scheme.puncture_rate() * Rate::from(CODED_OUTPUTS as u64)
            + Rate::from(self.n_u as u64)
    }

    pub fn effective_period(&self) -> EffectivePeriod {
        self.scheme.effective_period_bits(CODED_OUTPUTS)
    }
}

pub fn overall_rate(spec: &CodeSpec) -> Rate {
    spec.overall_rate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme(text: &str) -> PuncturingScheme {
        text.parse().unwrap()
    }

    #[test]
    fn parses_table_generators() {
        let g = parse_octal_generators("26,37").unwrap();
        assert_eq!((g.g1(), g.g2(), g.memory()), (0b10110, 0b11111, 4));
        let g = parse_octal_generators("04,37").unwrap();
        assert_eq!((g.g1(), g.g2(), g.memory()), (0b00100, 0b11111, 4));
        let g = parse_octal_generators("1,1").unwrap();
        assert_eq!((g.g1(), g.g2(), g.memory()), (1, 1, 0));
    }

    #[test]
    fn rejects_bad_generators() {
        assert!(matches!(parse_octal_generators("28,37"), Err(CodeError::BadOctal(_))));
        assert!(matches!(parse_octal_generators("5"), Err(CodeError::GeneratorCount(1))));
        assert!(matches!(parse_octal_generators("5,7,3"), Err(CodeError::GeneratorCount(3))));
        assert_eq!(parse_octal_generators("0,7"), Err(CodeError::ZeroGenerator));
        assert!(matches!(
            GeneratorSet::with_memory(0o37, 0o26, 3),
            Err(CodeError::MemoryTooSmall { .. })
        ));
    }

    #[test]
    fn pinned_memory_is_kept() {
        let g = GeneratorSet::with_memory(0o4, 0o7, 4).unwrap();
        assert_eq!(g.memory(), 4);
        assert_eq!(g.to_octal(), "4,7");
    }

    #[test]
    fn puncture_rates() {
        assert_eq!(scheme("1 0;1 1").puncture_rate(), Rate::new(4, 3));
        assert_eq!(scheme("1 1 1;1 0 0").puncture_rate(), Rate::new(3, 2));
        assert_eq!(PuncturingScheme::all_ones(1).puncture_rate(), Rate::from(1));
        for period in 1..8 {
            assert_eq!(PuncturingScheme::all_ones(period).puncture_rate(), Rate::from(1));
        }
    }

    #[test]
    fn scheme_validation() {
        assert_eq!("1 0;0 1".parse::<PuncturingScheme>().map(|s| s.period()), Ok(2));
        assert_eq!("1 0;1 0".parse::<PuncturingScheme>(), Err(CodeError::ZeroColumn(1)));
        assert_eq!("1 0;1".parse::<PuncturingScheme>(), Err(CodeError::RaggedScheme));
        assert_eq!("1 1".parse::<PuncturingScheme>(), Err(CodeError::SchemeRows(1)));
        assert!(matches!("1 2;1 1".parse::<PuncturingScheme>(), Err(CodeError::SchemeEntry(_))));
        assert_eq!(";".parse::<PuncturingScheme>(), Err(CodeError::EmptyScheme));
        assert_eq!(scheme("1 0 1;1 1 0").to_string(), "1 0 1;1 1 0");
    }

    #[test]
    fn overall_rates() {
        let g: GeneratorSet = "26,37".parse().unwrap();
        let s = scheme("1 0;1 1");
        assert_eq!(CodeSpec::ask4(g.clone(), s.clone()).overall_rate(), Rate::new(4, 3));
        assert_eq!(CodeSpec::with_uncoded(g.clone(), s, 1).overall_rate(), Rate::new(7, 3));
        assert_eq!(
            CodeSpec::ask4(g, PuncturingScheme::all_ones(1)).overall_rate(),
            Rate::from(1)
        );
    }

    #[test]
    fn effective_periods() {
        let p = effective_period(&scheme("1 0;1 1"), 4);
        assert_eq!((p.repetitions, p.info_bits, p.symbols), (2, 4, 3));
        let p = effective_period(&PuncturingScheme::all_ones(2), 4);
        assert_eq!((p.repetitions, p.info_bits, p.symbols), (1, 2, 2));
        let p = effective_period(&scheme("1 1 1;1 0 0"), 4);
        assert_eq!((p.repetitions, p.info_bits, p.symbols), (1, 3, 2));
    }

    #[test]
    fn effective_period_conserves_bits() {
        for text in ["1 0;1 1", "1 1 1;1 0 0", "1 0 1 0;1 1 0 1", "1 1 1 1 0;1 0 0 0 1"] {
            let s = scheme(text);
            let p = effective_period(&s, 4);
            assert_eq!(p.symbols * 2, p.info_bits * 2 - s.erased() * p.repetitions);
        }
    }

    #[test]
    fn spec_validation() {
        let g: GeneratorSet = "5,7".parse().unwrap();
        let s = PuncturingScheme::all_ones(1);
        assert_eq!(
            CodeSpec::new(g.clone(), s.clone(), 6, 0, Labeling::Natural),
            Err(CodeError::BadConstellation(6))
        );
        assert!(matches!(
            CodeSpec::new(g.clone(), s.clone(), 8, 0, Labeling::Natural),
            Err(CodeError::LabelWidth { .. })
        ));
        assert_eq!(
            CodeSpec::new(g.clone(), s.clone(), 8, 1, Labeling::Gray),
            Err(CodeError::GrayNeedsM4)
        );
        assert!(matches!(
            CodeSpec::new(g.clone(), s.clone(), 4, 0, Labeling::Lookup(vec![0, 1, 2])),
            Err(CodeError::LookupMissing { got: 3, need: 4 })
        ));
        assert_eq!(
            CodeSpec::new(g, s, 4, 0, Labeling::Lookup(vec![0, 1, 1, 2])),
            Err(CodeError::LookupNotPermutation(4))
        );
    }

    #[test]
    fn labeling_text_round_trip() {
        for text in ["natural", "gray", "lookup:0,1,3,2"] {
            assert_eq!(text.parse::<Labeling>().unwrap().to_string(), text);
        }
        assert!("fancy".parse::<Labeling>().is_err());
    }

    // Independent check of the GCD: a polynomial shares a factor with both
    // generators iff it divides both, found by trial division over all
    // polynomials of degree >= 1.
    fn shares_factor_brute(a: u32, b: u32) -> bool {
        let bound = a.max(b);
        (2..=bound).any(|d| d.count_ones() > 1 && gf2_rem(a, d) == 0 && gf2_rem(b, d) == 0)
    }

    #[test]
    fn catastrophic_examples() {
        let check = |text: &str| is_catastrophic(&text.parse().unwrap());
        assert!(!check("5,7"));
        assert!(check("3,6"));
        assert!(!check("1,1"));
        assert_eq!(gf2_gcd(0b011, 0b110), 0b011);
        for a in 1..64u32 {
            for b in 1..64u32 {
                let g = GeneratorSet::new(a, b).unwrap();
                assert_eq!(is_catastrophic(&g), shares_factor_brute(a, b), "{a:o},{b:o}");
            }
        }
    }
}

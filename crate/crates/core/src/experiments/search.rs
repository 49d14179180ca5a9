use rayon::prelude::*;

use super::ber::{simulate_point, SimOptions};
use super::ExperimentError;
use crate::code::{is_catastrophic, CodeSpec, GeneratorSet, Labeling, PuncturingScheme};
use crate::trellis::build_trellis;

/// All schemes whose first column is `[1;1]` and every other column has
/// weight one, in binary-counting order over columns 2..Ω (column 2 most
/// significant, `[1;0]` before `[0;1]`).
pub fn enumerate_schemes(period: usize) -> Vec<PuncturingScheme> {
    let period = period.max(1);
    (0..1usize << (period - 1))
        .map(|word| {
            let mut row1 = vec![1u8];
            let mut row2 = vec![1u8];
            for col in 1..period {
                let bit = ((word >> (period - 1 - col)) & 1) as u8;
                row1.push(1 - bit);
                row2.push(bit);
            }
            PuncturingScheme::new(row1, row2).expect("weight-one columns are valid")
        })
        .collect()
}

/// Ordered generator pairs of memory ν before any pruning, times schemes.
pub fn raw_candidate_count(memory: u32, period: usize) -> usize {
    let masks = (1usize << (memory + 1)) - 1;
    masks * masks * enumerate_schemes(period).len()
}

/// Ordered pairs with the degree-ν tap in at least one generator, minus
/// catastrophic pairs.
pub fn candidate_generators(memory: u32) -> Vec<GeneratorSet> {
    let top = 1u32 << memory;
    let mut out = Vec::new();
    for g1 in 1..top << 1 {
        for g2 in 1..top << 1 {
            if (g1 | g2) & top == 0 {
                continue;
            }
            let g = GeneratorSet::with_memory(g1, g2, memory).expect("masks fit the memory");
            if !is_catastrophic(&g) {
                out.push(g);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchCandidate {
    pub generators: GeneratorSet,
    pub scheme: PuncturingScheme,
    pub ber: Vec<f64>,
    /// Sum of BER over the grid, lower is better.
    pub score: f64,
}

fn rank_key(c: &SearchCandidate) -> (u32, u32, String) {
    (c.generators.g1(), c.generators.g2(), c.scheme.to_string())
}

/// Exhaustive search over generator pairs and weight-rule schemes. Every
/// candidate sees the same master seed (common random numbers), so a
/// candidate's result does not depend on its position in the enumeration.
pub fn code_search(
    memory: u32,
    period: usize,
    m: u32,
    ebn0_db: &[f64],
    bits_per_point: u64,
    seed: u64,
) -> Result<Vec<SearchCandidate>, ExperimentError> {
    let n_u = m.trailing_zeros().saturating_sub(2);
    let mut specs = Vec::new();
    for g in candidate_generators(memory) {
        for s in enumerate_schemes(period) {
            specs.push(CodeSpec::new(g.clone(), s, m, n_u, Labeling::Natural)?);
        }
    }
    if specs.is_empty() {
        return Err(ExperimentError::EmptyCandidates);
    }
    let mut ranked = specs
        .par_iter()
        .map(|spec| {
            let trellis = build_trellis(spec)?;
            let ber = ebn0_db
                .iter()
                .enumerate()
                .map(|(p, &db)| {
                    simulate_point(&trellis, db, p as u64, bits_per_point, seed, SimOptions::default())
                        .map(|r| r.ber)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SearchCandidate {
                generators: spec.generators().clone(),
                scheme: spec.scheme().clone(),
                score: ber.iter().sum(),
                ber,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    ranked.sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| rank_key(a).cmp(&rank_key(b))));
    Ok(ranked)
}

//! Time-variant trellis of a punctured rate-1/2 code.
//!
//! Each channel symbol carries two surviving coded bits. Tracing the
//! punctured stream over one effective period tells, per symbol, which
//! generator produced each label bit and at which input step (the generator
//! offsets). A symbol whose label bits span two input steps needs the newer
//! input before the older step is complete: the trellis is split by copying
//! every state metric into a hypothesis for that pending input, and merges
//! back when a symbol completes two steps at once.
//!
//! State encoding: a base state holds the last ν completed inputs, newest in
//! bit ν−1. An extended state additionally holds the pending input in bit ν,
//! so its index is exactly the encoder window of the pending step.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::code::{CodeSpec, EffectivePeriod, Generator, PuncturingScheme, CODED_OUTPUTS};
use crate::pipeline::{map_ask, symbol_label, PipelineError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrellisError {
    #[error("labeling failed: {0}")]
    Labeling(#[from] PipelineError),
    #[error("{what} index {index} out of range (< {bound})")]
    Index {
        what: &'static str,
        index: usize,
        bound: usize,
    },
}

/// Where one label bit comes from: a generator applied to the input window
/// ending `offset` steps after the symbol's first step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelBitSource {
    pub generator: Generator,
    pub offset: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorOffset {
    pub msb: LabelBitSource,
    pub lsb: LabelBitSource,
}

impl fmt::Display for GeneratorOffset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MSB=({},+{}) LSB=({},+{})",
            self.msb.generator, self.msb.offset, self.lsb.generator, self.lsb.offset
        )
    }
}

/// One symbol of the period as found by the trace, with absolute steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TracedSymbol {
    msb: (Generator, usize),
    lsb: (Generator, usize),
}

fn trace_period(scheme: &PuncturingScheme) -> (EffectivePeriod, Vec<TracedSymbol>) {
    let period = scheme.effective_period_bits(CODED_OUTPUTS);
    let stream: Vec<(Generator, usize)> = (0..period.info_bits)
        .flat_map(|step| scheme.surviving(step).map(move |g| (g, step)))
        .collect();
    let symbols = stream
        .chunks_exact(CODED_OUTPUTS)
        .map(|pair| TracedSymbol {
            msb: pair[0],
            lsb: pair[1],
        })
        .collect();
    (period, symbols)
}

/// Generator offsets for every symbol of one effective period.
pub fn derive_offsets(scheme: &PuncturingScheme) -> Vec<GeneratorOffset> {
    let (_, symbols) = trace_period(scheme);
    symbols
        .iter()
        .map(|s| {
            let base = s.msb.1;
            GeneratorOffset {
                msb: LabelBitSource {
                    generator: s.msb.0,
                    offset: (s.msb.1 - base) as u32,
                },
                lsb: LabelBitSource {
                    generator: s.lsb.0,
                    offset: (s.lsb.1 - base) as u32,
                },
            }
        })
        .collect()
}

/// Where a bit decided at a segment lives when its survivor is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecidedSource {
    /// Bit `n` of the (post-split) predecessor state.
    SurvivorState(u32),
    /// The branch's fresh input.
    BranchInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecidedBit {
    /// Input step relative to the segment's first step.
    pub step: u32,
    pub source: DecidedSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Branch {
    /// Predecessor in the post-split state numbering.
    pub from: u32,
    pub input: u8,
    pub to: u32,
    /// `2·MSB + LSB` of the coded label bits.
    pub coset: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrellisSegment {
    pub index: usize,
    pub offset: GeneratorOffset,
    /// First and last input step touched, relative to the period start.
    pub first_step: usize,
    pub last_step: usize,
    pub in_states: usize,
    /// States after the split copy (equal to `in_states` without a split).
    pub acs_states: usize,
    pub out_states: usize,
    pub split: bool,
    pub merge: bool,
    pub decided: Vec<DecidedBit>,
    /// Sorted by `(to, from)`; out-state `o` owns `fan_in` consecutive entries.
    pub branches: Vec<Branch>,
    pub fan_in: usize,
}

impl TrellisSegment {
    pub fn incoming(&self, out_state: usize) -> &[Branch] {
        &self.branches[out_state * self.fan_in..(out_state + 1) * self.fan_in]
    }

    /// Width of the post-split state in bits.
    pub fn acs_width(&self) -> u32 {
        self.acs_states.trailing_zeros()
    }

    pub fn in_width(&self) -> u32 {
        self.in_states.trailing_zeros()
    }

    /// Number of input steps completed (and decided) here.
    pub fn completed_steps(&self) -> usize {
        self.decided.len()
    }

    /// Branch leaving post-split state `from` with fresh input `input`.
    pub fn branch(&self, from: usize, input: u8) -> Option<&Branch> {
        let to = (((input as usize) << self.acs_width()) | from) >> self.completed_steps();
        self.incoming(to).iter().find(|b| b.from as usize == from)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeVariantTrellis {
    pub segments: Vec<TrellisSegment>,
    pub base_states: usize,
    pub period: EffectivePeriod,
    spec: CodeSpec,
    /// ASK level for `coset << n_u | uncoded`.
    points: Vec<i32>,
}

/// Builds the periodic trellis of `spec`.
pub fn build_trellis(spec: &CodeSpec) -> Result<TimeVariantTrellis, TrellisError> {
    let nu = spec.memory();
    let gens = spec.generators();
    let (period, traced) = trace_period(spec.scheme());
    let offsets = derive_offsets(spec.scheme());
    let window_mask = (1u32 << (nu + 1)) - 1;
    let count = traced.len();

    let mut segments = Vec::with_capacity(count);
    for (index, sym) in traced.iter().enumerate() {
        let first = sym.msb.1;
        let last = sym.lsb.1;
        let prev_last = if index == 0 {
            None
        } else {
            Some(traced[index - 1].lsb.1)
        };
        let next_first = traced.get(index + 1).map_or(period.info_bits, |s| s.msb.1);
        // Extended in-state iff the previous symbol stopped inside this
        // symbol's first step.
        let in_width = if prev_last == Some(first) { nu + 1 } else { nu };
        let acs_width = nu + (last - first) as u32;
        let completed = next_first - first;
        let out_width = acs_width + 1 - completed as u32;

        let decided = (0..completed as u32)
            .map(|j| DecidedBit {
                step: j,
                source: if nu + j == acs_width {
                    DecidedSource::BranchInput
                } else {
                    DecidedSource::SurvivorState(nu + j)
                },
            })
            .collect();

        let label_bit = |window: u32, (g, step): (Generator, usize)| {
            gens.output(g, (window >> (step - first)) & window_mask)
        };
        let mut branches = Vec::with_capacity(1 << (acs_width + 1));
        for from in 0..1u32 << acs_width {
            for input in 0..2u8 {
                let window = ((input as u32) << acs_width) | from;
                let msb = label_bit(window, sym.msb);
                let lsb = label_bit(window, sym.lsb);
                branches.push(Branch {
                    from,
                    input,
                    to: window >> completed,
                    coset: (msb << 1) | lsb,
                });
            }
        }
        branches.sort_by_key(|b| (b.to, b.from));

        segments.push(TrellisSegment {
            index,
            offset: offsets[index],
            first_step: first,
            last_step: last,
            in_states: 1 << in_width,
            acs_states: 1 << acs_width,
            out_states: 1 << out_width,
            split: acs_width > in_width,
            merge: completed == 2,
            decided,
            branches,
            fan_in: 1 << completed,
        });
    }

    let n_u = spec.n_u();
    let mut points = Vec::with_capacity(4 << n_u);
    for coset in 0..4u32 {
        for u in 0..1u32 << n_u {
            let label = symbol_label((coset >> 1) as u8, (coset & 1) as u8, u, spec)?;
            points.push(map_ask(label, spec.m())?);
        }
    }

    Ok(TimeVariantTrellis {
        segments,
        base_states: 1 << nu,
        period,
        spec: spec.clone(),
        points,
    })
}

impl TimeVariantTrellis {
    pub fn spec(&self) -> &CodeSpec {
        &self.spec
    }

    pub fn memory(&self) -> u32 {
        self.spec.memory()
    }

    pub fn parallel_branches(&self) -> usize {
        1 << self.spec.n_u()
    }

    /// Levels of the parallel points of coset `coset`.
    #[inline]
    pub fn coset_points(&self, coset: u8) -> &[i32] {
        let width = self.parallel_branches();
        &self.points[coset as usize * width..(coset as usize + 1) * width]
    }

    /// Constellation point of a branch for a given uncoded choice.
    pub fn branch_expected_point(
        &self,
        segment: usize,
        state: usize,
        input: u8,
        uncoded_choice: u32,
    ) -> Result<i32, TrellisError> {
        let seg = self.segments.get(segment).ok_or(TrellisError::Index {
            what: "segment",
            index: segment,
            bound: self.segments.len(),
        })?;
        if state >= seg.acs_states {
            return Err(TrellisError::Index {
                what: "state",
                index: state,
                bound: seg.acs_states,
            });
        }
        if input > 1 {
            return Err(TrellisError::Index {
                what: "input",
                index: input as usize,
                bound: 2,
            });
        }
        if uncoded_choice as usize >= self.parallel_branches() {
            return Err(TrellisError::Index {
                what: "uncoded choice",
                index: uncoded_choice as usize,
                bound: self.parallel_branches(),
            });
        }
        let branch = seg.branch(state, input).expect("every state has both inputs");
        Ok(self.coset_points(branch.coset)[uncoded_choice as usize])
    }

    /// State counts at each segment boundary as seen by the next ACS (after
    /// any split copy), closing with the final out-state count.
    pub fn boundary_state_counts(&self) -> Vec<usize> {
        let mut counts: Vec<usize> = self.segments.iter().map(|s| s.acs_states).collect();
        counts.push(self.segments.last().map_or(self.base_states, |s| s.out_states));
        counts
    }

    /// Info bits decided per period, coded plus uncoded.
    pub fn decided_bits_per_period(&self) -> usize {
        self.segments.iter().map(|s| s.completed_steps()).sum::<usize>()
            + self.segments.len() * self.spec.n_u() as usize
    }

    /// Labels produced by following the trellis with the given encoder
    /// inputs (payload plus tail) and per-symbol uncoded values.
    pub fn walk(&self, steps: &[u8], uncoded: &[u32]) -> Vec<u32> {
        let mut state = 0usize;
        let mut labels = Vec::with_capacity(uncoded.len());
        for (k, &u) in uncoded.iter().enumerate() {
            let seg = &self.segments[k % self.segments.len()];
            let base = (k / self.segments.len()) * self.period.info_bits;
            let mut from = state;
            if seg.split {
                from |= (steps[base + seg.first_step] as usize) << seg.in_width();
            }
            let branch = seg.branch(from, steps[base + seg.last_step]).expect("branch exists");
            let (msb, lsb) = (branch.coset >> 1, branch.coset & 1);
            labels.push(symbol_label(msb, lsb, u, &self.spec).expect("valid label"));
            state = branch.to as usize;
        }
        labels
    }

    /// Per-segment table for documentation and diffing.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# trellis {} scheme [{}] M={} n_u={} period: {} info bits, {} symbols",
            self.spec.generators(),
            self.spec.scheme(),
            self.spec.m(),
            self.spec.n_u(),
            self.period.info_bits,
            self.period.symbols
        );
        for seg in &self.segments {
            let _ = writeln!(
                out,
                "segment {}: T {} steps {}..={} states {}{}->{} split={} merge={} fan_in={}",
                seg.index,
                seg.offset,
                seg.first_step,
                seg.last_step,
                seg.in_states,
                if seg.split {
                    format!("(copy {})", seg.acs_states)
                } else {
                    String::new()
                },
                seg.out_states,
                seg.split,
                seg.merge,
                seg.fan_in
            );
            for d in &seg.decided {
                let src = match d.source {
                    DecidedSource::SurvivorState(bit) => format!("survivor state bit {bit}"),
                    DecidedSource::BranchInput => "branch input".to_string(),
                };
                let _ = writeln!(out, "  decides step +{} from {}", d.step, src);
            }
            for b in &seg.branches {
                let _ = writeln!(
                    out,
                    "  {:>3} --{}--> {:>3}  coset {}{}",
                    b.from,
                    b.input,
                    b.to,
                    b.coset >> 1,
                    b.coset & 1
                );
            }
        }
        out
    }
}

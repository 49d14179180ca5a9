//! Maximum-likelihood sequence estimation on the time-variant trellis.
//!
//! Frames are terminated, so the search starts and ends in the all-zero
//! state and tail inputs (and tail uncoded bits) are known to be zero.
//! Parallel branches carrying uncoded bits are reduced to the closest point
//! of each coset before the compare.

use num_complex::Complex;
use thiserror::Error;

use crate::pipeline::FrameLayout;
use crate::trellis::{DecidedSource, TimeVariantTrellis, TrellisSegment};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ViterbiError {
    #[error("expected {expected} received samples, got {got}")]
    Length { expected: usize, got: usize },
    #[error("path state has {got} metrics, segment expects {expected}")]
    StateWidth { expected: usize, got: usize },
    #[error("frame layout does not match the trellis period")]
    Layout,
}

/// Squared Euclidean distance between a received sample and a point.
pub trait Sample: Copy {
    type Point;
    fn sq_distance(self, point: Self::Point) -> f64;
}

impl Sample for f64 {
    type Point = f64;
    #[inline]
    fn sq_distance(self, point: f64) -> f64 {
        let d = self - point;
        d * d
    }
}

impl Sample for Complex<f64> {
    type Point = Complex<f64>;
    #[inline]
    fn sq_distance(self, point: Complex<f64>) -> f64 {
        (self - point).norm_sqr()
    }
}

pub fn metric_increment<S: Sample>(received: S, point: S::Point) -> f64 {
    received.sq_distance(point)
}

/// Accumulated metrics of the states at one trellis boundary. Unreachable
/// states hold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub metrics: Vec<f64>,
}

impl PathState {
    /// Only the all-zero state is reachable.
    pub fn origin(states: usize) -> Self {
        let mut metrics = vec![f64::INFINITY; states];
        metrics[0] = 0.0;
        Self { metrics }
    }

    pub fn best(&self) -> f64 {
        self.metrics.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Winner of one out-state at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Survivor {
    /// Predecessor in the post-split numbering.
    pub from: u32,
    pub uncoded: u32,
}

/// Inputs the terminated frame fixes at a given step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepConstraint {
    /// The split's pending input lies in the tail.
    pub pending_zero: bool,
    /// The branch input lies in the tail.
    pub input_zero: bool,
    /// Tail symbol: uncoded bits are zero.
    pub uncoded_zero: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecoderOptions {
    /// Subtract the best metric every this many steps. Off by default.
    pub renormalize_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub coded_info_bits: Vec<u8>,
    pub uncoded_bits: Vec<u8>,
    pub best_metric: f64,
}

/// One row of the optional per-step metric trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTraceRow {
    pub step: usize,
    pub state: usize,
    pub metric: f64,
}

/// Add-compare-select over one segment. Returns the out-state metrics and
/// the survivor of every out-state. Ties go to the lowest predecessor.
pub fn acs_step(
    trellis: &TimeVariantTrellis,
    segment: &TrellisSegment,
    state: &PathState,
    received: f64,
    constraint: StepConstraint,
) -> Result<(PathState, Vec<Survivor>), ViterbiError> {
    if state.metrics.len() != segment.in_states {
        return Err(ViterbiError::StateWidth {
            expected: segment.in_states,
            got: state.metrics.len(),
        });
    }
    let mut metrics = vec![0.0; segment.out_states];
    let mut survivors = vec![Survivor::default(); segment.out_states];
    let mut scratch = Vec::new();
    acs_into(trellis, segment, &state.metrics, &mut scratch, received, constraint, &mut metrics, &mut survivors);
    Ok((PathState { metrics }, survivors))
}

/// Closest parallel point of every coset: `(increment, uncoded choice)`.
#[inline]
fn preselect(trellis: &TimeVariantTrellis, received: f64, uncoded_zero: bool) -> [(f64, u32); 4] {
    let mut best = [(f64::INFINITY, 0u32); 4];
    for (coset, slot) in best.iter_mut().enumerate() {
        let points = trellis.coset_points(coset as u8);
        let points = if uncoded_zero { &points[..1] } else { points };
        for (u, &p) in points.iter().enumerate() {
            let inc = metric_increment(received, p as f64);
            if inc < slot.0 {
                *slot = (inc, u as u32);
            }
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn acs_into(
    trellis: &TimeVariantTrellis,
    segment: &TrellisSegment,
    metrics_in: &[f64],
    scratch: &mut Vec<f64>,
    received: f64,
    constraint: StepConstraint,
    metrics_out: &mut [f64],
    survivors: &mut [Survivor],
) {
    // split: copy every metric into the hypothesis for the pending input
    let acs_metrics: &[f64] = if segment.split {
        scratch.clear();
        scratch.extend_from_slice(metrics_in);
        if constraint.pending_zero {
            scratch.resize(segment.acs_states, f64::INFINITY);
        } else {
            scratch.extend_from_slice(metrics_in);
        }
        scratch
    } else {
        metrics_in
    };
    let increments = preselect(trellis, received, constraint.uncoded_zero);
    for (to, (metric, survivor)) in metrics_out.iter_mut().zip(survivors.iter_mut()).enumerate() {
        let mut best = f64::INFINITY;
        let mut winner = Survivor::default();
        let mut first = true;
        for b in segment.incoming(to) {
            if constraint.input_zero && b.input == 1 {
                continue;
            }
            let (inc, u) = increments[b.coset as usize];
            let cand = acs_metrics[b.from as usize] + inc;
            if first || cand < best {
                best = cand;
                winner = Survivor { from: b.from, uncoded: u };
                first = false;
            }
        }
        *metric = best;
        *survivor = winner;
    }
}

/// Decodes a frame whose layout is inferred from its length (ASK framing).
pub fn decode_frame(trellis: &TimeVariantTrellis, received: &[f64]) -> Result<DecodeResult, ViterbiError> {
    let layout = FrameLayout::from_symbol_count(trellis.spec(), received.len(), 1).map_err(|_| ViterbiError::Layout)?;
    decode_block(trellis, received, &layout)
}

pub fn decode_block(
    trellis: &TimeVariantTrellis,
    received: &[f64],
    layout: &FrameLayout,
) -> Result<DecodeResult, ViterbiError> {
    Decoder::new(trellis).decode(received, layout, None)
}

/// QAM frames are decoded on the interleaved I/Q stream.
pub fn decode_qam_block(
    trellis: &TimeVariantTrellis,
    received: &[Complex<f64>],
    layout: &FrameLayout,
) -> Result<DecodeResult, ViterbiError> {
    let flat: Vec<f64> = received.iter().flat_map(|c| [c.re, c.im]).collect();
    decode_block(trellis, &flat, layout)
}

pub fn decode_block_traced(
    trellis: &TimeVariantTrellis,
    received: &[f64],
    layout: &FrameLayout,
) -> Result<(DecodeResult, Vec<MetricTraceRow>), ViterbiError> {
    let mut trace = Vec::new();
    let result = Decoder::new(trellis).decode(received, layout, Some(&mut trace))?;
    Ok((result, trace))
}

/// Reusable decoder bound to a trellis.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    trellis: &'a TimeVariantTrellis,
    options: DecoderOptions,
}

impl<'a> Decoder<'a> {
    pub fn new(trellis: &'a TimeVariantTrellis) -> Self {
        Self {
            trellis,
            options: DecoderOptions::default(),
        }
    }

    pub fn with_options(trellis: &'a TimeVariantTrellis, options: DecoderOptions) -> Self {
        Self { trellis, options }
    }

    pub fn decode(
        &self,
        received: &[f64],
        layout: &FrameLayout,
        mut trace: Option<&mut Vec<MetricTraceRow>>,
    ) -> Result<DecodeResult, ViterbiError> {
        let trellis = self.trellis;
        let period = trellis.period;
        if !layout.info_bits.is_multiple_of(period.info_bits)
            || layout.payload_symbols != layout.info_bits / period.info_bits * period.symbols
        {
            return Err(ViterbiError::Layout);
        }
        let total = layout.total_symbols();
        if received.len() != total {
            return Err(ViterbiError::Length {
                expected: total,
                got: received.len(),
            });
        }
        let segs = &trellis.segments;
        let n_segs = segs.len();
        let info = layout.info_bits;

        let max_states = segs.iter().map(|s| s.out_states).max().unwrap_or(1);
        let mut survivors = vec![Survivor::default(); total * max_states];
        let mut metrics = PathState::origin(trellis.base_states).metrics;
        let mut next = vec![0.0; max_states];
        let mut scratch = Vec::with_capacity(2 * max_states);
        let mut offset = 0.0;

        for (k, &r) in received.iter().enumerate() {
            let seg = &segs[k % n_segs];
            let base = (k / n_segs) * period.info_bits;
            let constraint = StepConstraint {
                pending_zero: base + seg.first_step >= info,
                input_zero: base + seg.last_step >= info,
                uncoded_zero: k >= layout.payload_symbols,
            };
            let out = &mut next[..seg.out_states];
            let surv = &mut survivors[k * max_states..k * max_states + seg.out_states];
            acs_into(trellis, seg, &metrics, &mut scratch, r, constraint, out, surv);
            metrics.clear();
            metrics.extend_from_slice(out);

            if let Some(every) = self.options.renormalize_every {
                if every > 0 && (k + 1) % every == 0 {
                    let best = metrics.iter().copied().fold(f64::INFINITY, f64::min);
                    metrics.iter_mut().for_each(|m| *m -= best);
                    offset += best;
                }
            }
            if let Some(rows) = trace.as_deref_mut() {
                rows.extend(metrics.iter().enumerate().map(|(state, &m)| MetricTraceRow {
                    step: k,
                    state,
                    metric: m + offset,
                }));
            }
        }

        // Traceback from the all-zero state, reading decided bits where the
        // segment says they live.
        let mut steps = vec![0u8; layout.total_steps()];
        let n_u = trellis.spec().n_u() as usize;
        let mut uncoded = vec![0u8; n_u * layout.payload_symbols];
        let mut state = 0usize;
        for k in (0..total).rev() {
            let seg = &segs[k % n_segs];
            let base = (k / n_segs) * period.info_bits;
            let s = survivors[k * max_states + state];
            let acs_width = seg.acs_width();
            let input = (state >> (acs_width as usize - seg.completed_steps())) & 1;
            for d in &seg.decided {
                let bit = match d.source {
                    DecidedSource::SurvivorState(pos) => (s.from >> pos) & 1,
                    DecidedSource::BranchInput => input as u32,
                };
                steps[base + seg.first_step + d.step as usize] = bit as u8;
            }
            if k < layout.payload_symbols {
                for j in 0..n_u {
                    uncoded[k * n_u + j] = ((s.uncoded >> (n_u - 1 - j)) & 1) as u8;
                }
            }
            state = s.from as usize & (seg.in_states - 1);
        }
        steps.truncate(info);

        Ok(DecodeResult {
            coded_info_bits: steps,
            uncoded_bits: uncoded,
            best_metric: metrics[0] + offset,
        })
    }
}

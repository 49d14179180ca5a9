//! Punctured trellis-coded modulation.
//!
//! A rate-1/2 feedforward mother code is punctured to raise its rate, the
//! surviving bits are labeled (optionally together with uncoded bits) onto
//! an ASK constellation, and the receiver runs an exact maximum-likelihood
//! Viterbi search on the resulting time-variant trellis.

pub mod channel;
pub mod code;
pub mod experiments;
pub mod pipeline;
pub mod trellis;
pub mod viterbi;

pub use code::{CodeError, CodeSpec, GeneratorSet, Labeling, PuncturingScheme, Rate};
pub use pipeline::{encode_frame, FrameLayout, SymbolFrame};
pub use trellis::{build_trellis, TimeVariantTrellis};
pub use viterbi::{decode_block, DecodeResult};

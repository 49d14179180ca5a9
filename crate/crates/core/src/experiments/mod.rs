//! Monte Carlo BER sweeps, code search and capacity baselines.

mod ber;
mod capacity;
pub mod report;
mod search;

use thiserror::Error;

pub use ber::{
    ebn0_grid, required_ebn0, required_ebn0_from, simulate_ber, simulate_ber_with, simulate_uncoded_ber,
    BerRecord, SimOptions,
};
pub use capacity::{
    capacity_vs_ebn0, constellation_capacity, gauss_hermite, shannon_capacity, CapacityCurve, Constellation,
};
pub use search::{candidate_generators, code_search, enumerate_schemes, raw_candidate_count, SearchCandidate};

use crate::channel::ChannelError;
use crate::code::CodeError;
use crate::pipeline::PipelineError;
use crate::trellis::TrellisError;
use crate::viterbi::ViterbiError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("code: {0}")]
    Code(#[from] CodeError),
    #[error("pipeline: {0}")]
    Pipeline(#[from] PipelineError),
    #[error("trellis: {0}")]
    Trellis(#[from] TrellisError),
    #[error("viterbi: {0}")]
    Viterbi(#[from] ViterbiError),
    #[error("channel: {0}")]
    Channel(#[from] ChannelError),
    #[error("target BER {target:e} is not bracketed by the sweep")]
    NotBracketed { target: f64 },
    #[error("no search candidates")]
    EmptyCandidates,
    #[error("SNR must be non-negative, got {0}")]
    NegativeSnr(f64),
    #[error("invalid grid `{0}`")]
    BadGrid(String),
    #[error("unknown constellation `{0}`")]
    UnknownConstellation(String),
}

//! Verification instruments for the sampler on toy dependency networks
//! small enough to enumerate: exact transition matrices and stationary laws,
//! a reversibility test, the hold-encoding flip count and a corpus novelty
//! report. [`run_suite`] bundles the checks behind `chorale diagnose`.

mod chain;
mod flip;
mod kolmogorov;
mod novelty;
mod suite;
mod toy;

pub use chain::{build_chain, total_variation, ChainMatrix, EXACT_LIMIT, POWER_MAX_ITERATIONS, POWER_TOLERANCE};
pub use flip::flip_distance;
pub use kolmogorov::{kolmogorov_check, verify_witness, KolmogorovReport, Witness, RELATIVE_TOLERANCE};
pub use novelty::{novelty_report, MatchSource, NoveltyReport, VoiceNovelty};
pub use suite::{
    acceptance_toy, block_law, coupled_joint, empirical_distribution, incompatible_toy, output_distribution, run_suite,
    shipped_toys, BlockLaw, CheckRecord, Comparison, Verdict, AGREEMENT_RUNS, AGREEMENT_TOLERANCE, BLOCK_DRAWS, BLOCK_MIN_P,
    STATIONARY_TOLERANCE, SUITES, WITNESS_MIN_DEVIATION,
};
pub use toy::{ToyNetwork, MAX_STATES, SMOOTHING};

use crate::score::{Encoding, ScoreError};

#[derive(Debug, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("state space of {states} exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: u64, limit: usize },
    #[error("tick {tick} is not a note onset")]
    NotAnOnset { tick: usize },
    #[error("generated chorale is {generated}-encoded, corpus is {corpus}-encoded")]
    EncodingMismatch { generated: Encoding, corpus: Encoding },
    #[error("invalid toy: {0}")]
    InvalidToy(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error(transparent)]
    Sampler(#[from] crate::sampler::SamplerError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

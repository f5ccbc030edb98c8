//! Steerable four-part chorale generation.
//!
//! Per-voice conditional note distributions are learned from a corpus of
//! four-voice scores ([`models`]) and combined by pseudo-Gibbs sampling
//! ([`sampler`]) to generate or regenerate any region of a score under
//! per-cell constraints. [`ingest`] reads and writes MusicXML and MIDI,
//! [`diagnostics`] checks the sampling theory on enumerable toy networks, and
//! [`app`] exposes everything through a CLI and an HTTP session service.

pub mod app;
pub mod diagnostics;
pub mod ingest;
pub mod models;
pub mod sampler;
pub mod score;

/// Seedable RNG used everywhere a run must be reproducible.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

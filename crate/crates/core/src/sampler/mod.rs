//! Pseudo-Gibbs sampling over a grid of vocabulary indices, with per-cell
//! allowed sets, frozen cells and parallel block updates.
//!
//! The generic layer works on any [`Conditional`] (used directly by the toy
//! networks in diagnostics); [`generate`] and [`reharmonize`] bind it to a
//! trained [`ModelSet`](crate::models::ModelSet).

mod block;
mod chorale;
mod constraints;
mod gibbs;

pub use block::{pick_block, BlockPick, REJECTION_BUDGET};
pub use chorale::{generate, reharmonize, ChoraleConditional, ConstraintSet};
pub use constraints::CellConstraints;
pub use gibbs::{init_grid, run, run_observed, step, InitMode, RunStats, SamplerConfig, ZERO_MASS};

use crate::models::ModelError;
use crate::score::{ScoreError, Voice};

/// Token indices, voice-major: cell `(v, t)` lives at `v · len + t`, `t` 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    voices: usize,
    len: usize,
    cells: Vec<usize>,
}

impl Grid {
    pub fn new(voices: usize, len: usize, fill: usize) -> Self {
        Self {
            voices,
            len,
            cells: vec![fill; voices * len],
        }
    }

    pub fn from_cells(voices: usize, len: usize, cells: Vec<usize>) -> Self {
        assert_eq!(cells.len(), voices * len, "grid shape");
        Self { voices, len, cells }
    }

    pub fn voices(&self) -> usize {
        self.voices
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, voice: usize, t: usize) -> usize {
        self.cells[voice * self.len + t]
    }

    pub fn set(&mut self, voice: usize, t: usize, value: usize) {
        self.cells[voice * self.len + t] = value;
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }
}

/// Conditional distributions of a dependency network over a [`Grid`].
pub trait Conditional: Sync {
    fn voices(&self) -> usize;
    fn vocab_size(&self, voice: usize) -> usize;
    /// Writes `p(cell (voice, t) = k | rest of grid)` for every `k` into
    /// `out`; must not read the current value of that cell.
    fn distribution(&self, grid: &Grid, voice: usize, t: usize, out: &mut [f64]);
}

#[derive(Debug, thiserror::Error)]
pub enum SamplerError {
    #[error("frozen cell ({voice}, {tick}) has no value")]
    MissingFrozenValue { voice: usize, tick: usize },
    #[error("cell ({voice}, {tick}) has an empty allowed set")]
    EmptyAllowedSet { voice: usize, tick: usize },
    #[error("frozen cell ({voice}, {tick}) holds a token outside its allowed set")]
    FrozenOutsideAllowed { voice: usize, tick: usize },
    #[error("{voice} tick {tick}: token {token} is not in the model vocabulary")]
    OutOfVocabulary { voice: Voice, tick: usize, token: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

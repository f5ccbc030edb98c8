//! Time-discretized four-voice chorale representation.
//!
//! A chorale is four token sequences on a sixteenth-note grid plus aligned
//! metadata (fermata flags, beat subdivision, key signature). Rhythm lives in
//! the token stream itself: a note lasting `d` sixteenths is its pitch token
//! followed by `d - 1` hold tokens.
//!
//! Ticks are 1-based in this module's API (`subdivision_for(1) == 1`); the
//! token vectors themselves are ordinary 0-based `Vec`s.

mod chorale;
mod pitch;
mod token;
mod transform;
mod vocab;

pub use chorale::{
    fermata_warnings, subdivision_for, validate, Chorale, MetadataSeq, Rule, Violation, VoiceSeq,
    MAX_KEY_SIGNATURE, MIN_KEY_SIGNATURE, TICKS_PER_BAR, TICKS_PER_BEAT,
};
pub use pitch::{Encoding, Interval, Letter, Pitch, SpelledPitch};
pub use token::{NoteToken, Voice};
pub use transform::{accidental_cost, from_piano_roll, to_piano_roll, transpose, transpose_by_semitones};
pub use vocab::{Vocabularies, Vocabulary, HOLD_INDEX, PAD_END_INDEX, PAD_START_INDEX, RESERVED};

#[derive(Debug, thiserror::Error)]
pub enum ScoreError {
    #[error("cannot spell {letter} with {alter} semitones of alteration")]
    UnspellableNote { letter: char, alter: i32 },
    #[error("pitch {0} is outside the MIDI range")]
    PitchOutOfRange(i32),
    #[error("invalid token `{0}`")]
    InvalidToken(String),
    #[error("expected {expected} encoding, found {found}")]
    EncodingMismatch { expected: Encoding, found: Encoding },
    #[error("{voice} tick {tick}: token {token} is not in the vocabulary")]
    OutOfVocabulary {
        voice: Voice,
        tick: usize,
        token: String,
    },
    #[error("{voice} tick {tick} has no sounding pitch")]
    NotDecodable { voice: Voice, tick: usize },
    #[error("invalid chorale: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))]
    Invalid(Vec<Violation>),
}

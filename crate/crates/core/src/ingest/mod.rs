//! Reading and writing scores, and building training corpora.

mod corpus;
mod key;
mod midi;
mod musicxml;

pub use corpus::{
    augment, read_manifest, split_sources, write_manifest, Corpus, CorpusEntry, CorpusStats, ManifestRecord, Split,
    VocalRanges, DEFAULT_TRAIN_FRACTION, MANIFEST_FILE, MANIFEST_HEADER,
};
pub use key::{estimate_key, estimate_key_signatures, KeyEstimate, MAJOR_PROFILE, MINOR_PROFILE};
pub use midi::{export_midi, MIDI_TICKS_PER_SIXTEENTH, TICKS_PER_QUARTER};
pub use musicxml::{export_musicxml, parse_melody, parse_musicxml, parse_musicxml_with, KeySource, ParseOptions};

use crate::score::ScoreError;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("part {part}, measure {measure}: note off the sixteenth grid")]
    UnsupportedSubdivision { part: String, measure: String },
    #[error("expected 4 sung parts, found {0}")]
    NotFourVoices(usize),
    #[error("part {part}, measure {measure}: simultaneous notes in one voice")]
    VoiceDivision { part: String, measure: String },
    #[error("unsupported element: {0}")]
    UnsupportedElement(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Score(#[from] ScoreError),
}

impl IngestError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

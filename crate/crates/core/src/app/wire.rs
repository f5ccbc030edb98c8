//! JSON documents exchanged with the HTTP service.
//!
//! Ticks and bars are 1-based everywhere on the wire; bar `b` covers ticks
//! `16(b − 1) + 1 ..= 16b`.

use serde::{Deserialize, Serialize};

use crate::models::{ModelKind, ModelSet};
use crate::score::{subdivision_for, Chorale, Encoding, MetadataSeq, NoteToken, Voice, TICKS_PER_BAR};

/// Version of [`ScoreDocument`]; clients should refuse other values.
pub const DOCUMENT_VERSION: u32 = 1;

/// One problem with a request, addressed by a JSON-path-like `field`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoiceDocument {
    pub voice: Voice,
    /// Pitch names (`C#4`, or MIDI numbers in midi encoding) and `__` for holds.
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataDocument {
    pub fermata: Vec<bool>,
    /// Position in the beat, 1..=4.
    pub subdivision: Vec<u8>,
    /// Sharps (negative for flats), −7..=7.
    pub key_signature: Vec<i8>,
}

/// A chorale as sent to clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreDocument {
    pub version: u32,
    pub encoding: Encoding,
    pub length: usize,
    /// Soprano, alto, tenor, bass.
    pub voices: Vec<VoiceDocument>,
    pub metadata: MetadataDocument,
}

impl ScoreDocument {
    pub fn from_chorale(chorale: &Chorale) -> Self {
        Self {
            version: DOCUMENT_VERSION,
            encoding: chorale.encoding,
            length: chorale.len(),
            voices: chorale
                .voices
                .iter()
                .map(|v| VoiceDocument {
                    voice: v.voice,
                    tokens: v.tokens.iter().map(|t| t.to_string()).collect(),
                })
                .collect(),
            metadata: MetadataDocument {
                fermata: chorale.metadata.fermata.clone(),
                subdivision: chorale.metadata.subdivision.clone(),
                key_signature: chorale.metadata.key_signature.clone(),
            },
        }
    }

    pub fn to_chorale(&self) -> Result<Chorale, Vec<Violation>> {
        let mut violations = Vec::new();
        if self.version != DOCUMENT_VERSION {
            violations.push(Violation::new("version", format!("unsupported version {}", self.version)));
        }
        if self.voices.len() != 4 {
            violations.push(Violation::new("voices", format!("expected 4 voices, got {}", self.voices.len())));
        }
        let md = &self.metadata;
        for (name, len) in [
            ("fermata", md.fermata.len()),
            ("subdivision", md.subdivision.len()),
            ("key_signature", md.key_signature.len()),
        ] {
            if len != self.length {
                violations.push(Violation::new(format!("metadata.{name}"), format!("length {len}, expected {}", self.length)));
            }
        }
        for (i, s) in md.subdivision.iter().enumerate() {
            if *s != subdivision_for(i + 1) {
                violations.push(Violation::new(format!("metadata.subdivision[{i}]"), "does not match the tick position"));
            }
        }
        let mut voices: [Vec<NoteToken>; 4] = Default::default();
        for (i, v) in self.voices.iter().enumerate().take(4) {
            if v.voice.index() != i {
                violations.push(Violation::new(format!("voices[{i}].voice"), format!("expected {}", Voice::ALL[i])));
            }
            if v.tokens.len() != self.length {
                violations.push(Violation::new(format!("voices[{i}].tokens"), format!("length {}, expected {}", v.tokens.len(), self.length)));
            }
            for (t, s) in v.tokens.iter().enumerate() {
                match s.parse::<NoteToken>() {
                    Ok(tok) => voices[i].push(tok),
                    Err(e) => violations.push(Violation::new(format!("voices[{i}].tokens[{t}]"), e.to_string())),
                }
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }
        let metadata = MetadataSeq::neutral(self.length)
            .with_fermata(md.fermata.clone())
            .with_key_signature(md.key_signature.clone());
        Chorale::new(self.encoding, voices, metadata).map_err(|e| vec![Violation::new("score", e.to_string())])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub voice: Voice,
    pub tick: usize,
}

/// Cells to resample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    /// Every listed voice over ticks `start..=end`.
    Rect { voices: Vec<Voice>, start: usize, end: usize },
    Cells { cells: Vec<Cell> },
}

impl Region {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = match self {
            Region::Rect { voices, start, end } => voices
                .iter()
                .flat_map(|&voice| (*start..=*end).map(move |tick| Cell { voice, tick }))
                .collect(),
            Region::Cells { cells } => cells.clone(),
        };
        out.sort();
        out.dedup();
        out
    }
}

/// Allowed tokens for one region cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pin {
    pub voice: Voice,
    pub tick: usize,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FermataOverride {
    pub tick: usize,
    pub value: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyOverride {
    pub bar: usize,
    pub sharps: i8,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overrides {
    #[serde(default)]
    pub fermata: Vec<FermataOverride>,
    #[serde(default)]
    pub key_signature: Vec<KeyOverride>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        self.fermata.is_empty() && self.key_signature.is_empty()
    }
}

/// Regenerate a region of a session's score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub region: Region,
    #[serde(default)]
    pub pins: Vec<Pin>,
    #[serde(default)]
    pub overrides: Overrides,
    /// Cell updates; defaults to 100 per region cell, capped by the server.
    #[serde(default)]
    pub iterations: Option<usize>,
    /// Assigned by the server when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub block_size: Option<usize>,
    #[serde(default)]
    pub min_distance: Option<usize>,
}

/// Body of session creation: an uploaded score, or a length to generate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default)]
    pub musicxml: Option<String>,
    #[serde(default)]
    pub length: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub id: String,
    pub score: ScoreDocument,
    /// Seed of the initial generation; absent for uploads.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub score: ScoreDocument,
    pub seed: u64,
    pub iterations: usize,
    /// Edit log length after the request.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndoResult {
    pub score: ScoreDocument,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceVocabulary {
    pub voice: Voice,
    /// Tokens a pin may name: every pitch plus the hold.
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub kind: ModelKind,
    pub encoding: Encoding,
    pub delta_t: usize,
    pub vocab_hash: String,
    pub vocabularies: Vec<VoiceVocabulary>,
    pub ticks_per_bar: usize,
    pub max_iterations: usize,
    pub document_version: u32,
}

impl ModelInfo {
    pub fn new(models: &ModelSet, max_iterations: usize) -> Self {
        Self {
            kind: models.kind,
            encoding: models.encoding(),
            delta_t: models.delta_t,
            vocab_hash: models.vocabs.hash(),
            vocabularies: Voice::ALL
                .iter()
                .map(|&voice| {
                    let v = models.vocabs.voice(voice);
                    VoiceVocabulary {
                        voice,
                        tokens: v.writable().into_iter().map(|k| v.token(k).to_string()).collect(),
                    }
                })
                .collect(),
            ticks_per_bar: TICKS_PER_BAR,
            max_iterations,
            document_version: DOCUMENT_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub error: ErrorBody,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_round_trip_and_rejections() {
        let tok = |s: &str| s.parse::<NoteToken>().unwrap();
        let h = NoteToken::Hold;
        let c = Chorale::new(
            Encoding::Spelled,
            [
                vec![tok("C5"), h, tok("D5"), tok("E5")],
                vec![tok("E4"), tok("F4"), h, tok("G4")],
                vec![tok("G3"), h, tok("A3"), h],
                vec![tok("C3"), tok("D3"), h, tok("B2")],
            ],
            MetadataSeq::neutral(4).with_fermata(vec![false, false, true, true]),
        )
        .unwrap();
        let d = ScoreDocument::from_chorale(&c);
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"voice\":\"soprano\""));
        let back: ScoreDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_chorale().unwrap(), c);

        let mut bad = d.clone();
        bad.voices[1].tokens[2] = "Q9".into();
        bad.metadata.subdivision[0] = 3;
        let v = bad.to_chorale().unwrap_err();
        assert_eq!(v.len(), 2);
        assert!(v.iter().any(|x| x.field == "voices[1].tokens[2]"));
    }

    #[test]
    fn region_forms() {
        let r: Region = serde_json::from_str(r#"{"kind":"rect","voices":["alto","bass"],"start":3,"end":4}"#).unwrap();
        assert_eq!(r.cells().len(), 4);
        let r: Region = serde_json::from_str(r#"{"kind":"cells","cells":[{"voice":"tenor","tick":2},{"voice":"tenor","tick":2}]}"#).unwrap();
        assert_eq!(r.cells(), vec![Cell { voice: Voice::Tenor, tick: 2 }]);
        let g: GenerationRequest = serde_json::from_str(r#"{"region":{"kind":"cells","cells":[]}}"#).unwrap();
        assert!(g.pins.is_empty() && g.seed.is_none() && g.overrides.is_empty());
    }
}

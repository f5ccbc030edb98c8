use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::chorale::{Chorale, Rule, Violation};
use super::pitch::Encoding;
use super::token::{NoteToken, Voice};
use super::ScoreError;

/// Reserved vocabulary slots shared by every voice.
pub const HOLD_INDEX: usize = 0;
pub const PAD_START_INDEX: usize = 1;
pub const PAD_END_INDEX: usize = 2;
pub const RESERVED: usize = 3;

/// Ordered token set of one voice: hold, pads, then pitches from low to high.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    voice: Voice,
    tokens: Vec<NoteToken>,
    index: HashMap<NoteToken, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    voice: Voice,
    pitches: Vec<NoteToken>,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::new(r.voice, r.pitches)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            voice: v.voice,
            pitches: v.tokens[RESERVED..].to_vec(),
        }
    }
}

impl Vocabulary {
    /// Builds a vocabulary from any tokens; only pitch tokens are kept, the
    /// reserved tokens are always present.
    pub fn new(voice: Voice, tokens: impl IntoIterator<Item = NoteToken>) -> Self {
        let pitches: BTreeSet<NoteToken> = tokens
            .into_iter()
            .filter(|t| matches!(t, NoteToken::Pitch(_)))
            .collect();
        let mut all = vec![NoteToken::Hold, NoteToken::PadStart, NoteToken::PadEnd];
        all.extend(pitches);
        let index = all.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        Self {
            voice,
            tokens: all,
            index,
        }
    }

    pub fn voice(&self) -> Voice {
        self.voice
    }

    /// Number of classes `n_i`, reserved tokens included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pitch_count(&self) -> usize {
        self.tokens.len() - RESERVED
    }

    pub fn tokens(&self) -> &[NoteToken] {
        &self.tokens
    }

    pub fn token(&self, index: usize) -> NoteToken {
        self.tokens[index]
    }

    pub fn index_of(&self, token: &NoteToken) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &NoteToken) -> bool {
        self.index.contains_key(token)
    }

    /// Lowest and highest MIDI number among the pitch tokens.
    pub fn range(&self) -> Option<(i32, i32)> {
        let midis = self.tokens[RESERVED..].iter().filter_map(|t| t.pitch()).map(|p| p.midi());
        let (lo, hi) = midis.fold((i32::MAX, i32::MIN), |(lo, hi), m| (lo.min(m), hi.max(m)));
        (lo <= hi).then_some((lo, hi))
    }

    /// Indices a sampler may write: everything except the pads.
    pub fn writable(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| i != PAD_START_INDEX && i != PAD_END_INDEX).collect()
    }
}

/// The four per-voice vocabularies of one corpus, tagged with its encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabularies {
    pub encoding: Encoding,
    pub voices: [Vocabulary; 4],
}

impl Vocabularies {
    pub fn from_chorales<'a>(
        encoding: Encoding,
        chorales: impl IntoIterator<Item = &'a Chorale>,
    ) -> Result<Self, ScoreError> {
        let mut sets: [BTreeSet<NoteToken>; 4] = Default::default();
        for c in chorales {
            if c.encoding != encoding {
                return Err(ScoreError::EncodingMismatch {
                    expected: encoding,
                    found: c.encoding,
                });
            }
            for v in &c.voices {
                sets[v.voice.index()].extend(v.tokens.iter().copied());
            }
        }
        let [s, a, t, b] = sets;
        Ok(Self {
            encoding,
            voices: [
                Vocabulary::new(Voice::Soprano, s),
                Vocabulary::new(Voice::Alto, a),
                Vocabulary::new(Voice::Tenor, t),
                Vocabulary::new(Voice::Bass, b),
            ],
        })
    }

    pub fn voice(&self, voice: Voice) -> &Vocabulary {
        &self.voices[voice.index()]
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.voices.each_ref().map(Vocabulary::len)
    }

    /// SHA-256 over the encoding tag and every voice's ordered token list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.encoding.to_string().as_bytes());
        for v in &self.voices {
            h.update(b"|");
            h.update(v.voice.name().as_bytes());
            for t in &v.tokens {
                h.update(b",");
                h.update(t.to_string().as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Cells whose token is not in that voice's vocabulary.
    pub fn violations(&self, chorale: &Chorale) -> Vec<Violation> {
        let mut out = Vec::new();
        for seq in &chorale.voices {
            let vocab = self.voice(seq.voice);
            for (i, t) in seq.tokens.iter().enumerate() {
                if !vocab.contains(t) {
                    out.push(Violation {
                        voice: Some(seq.voice),
                        tick: i + 1,
                        rule: Rule::NotInVocabulary,
                    });
                }
            }
        }
        out
    }

    /// Index grid of a chorale, voice-major.
    pub fn indices(&self, chorale: &Chorale) -> Result<[Vec<usize>; 4], ScoreError> {
        if chorale.encoding != self.encoding {
            return Err(ScoreError::EncodingMismatch {
                expected: self.encoding,
                found: chorale.encoding,
            });
        }
        let mut out: [Vec<usize>; 4] = Default::default();
        for seq in &chorale.voices {
            let vocab = self.voice(seq.voice);
            out[seq.voice.index()] = seq
                .tokens
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    vocab.index_of(t).ok_or(ScoreError::OutOfVocabulary {
                        voice: seq.voice,
                        tick: i + 1,
                        token: t.to_string(),
                    })
                })
                .collect::<Result<_, _>>()?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_slots_and_order() {
        let toks: Vec<NoteToken> = ["G4", "C4", "__", "E4", "C4", "Fb4"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let v = Vocabulary::new(Voice::Alto, toks);
        assert_eq!(v.len(), 7);
        assert_eq!(v.token(HOLD_INDEX), NoteToken::Hold);
        assert_eq!(v.token(PAD_START_INDEX), NoteToken::PadStart);
        assert_eq!(v.token(PAD_END_INDEX), NoteToken::PadEnd);
        let order: Vec<String> = v.tokens()[RESERVED..].iter().map(|t| t.to_string()).collect();
        // Fb4 and E4 are enharmonic; the lower letter sorts first
        assert_eq!(order, ["C4", "E4", "Fb4", "G4"]);
        assert_eq!(v.range(), Some((60, 67)));
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.index_of(t), Some(i));
        }
        assert_eq!(v.writable(), vec![0, 3, 4, 5, 6]);
    }

    #[test]
    fn serde_roundtrip_keeps_hash() {
        let toks: Vec<NoteToken> = ["C4", "D4"].iter().map(|s| s.parse().unwrap()).collect();
        let vs = Vocabularies {
            encoding: Encoding::Spelled,
            voices: Voice::ALL.map(|voice| Vocabulary::new(voice, toks.clone())),
        };
        let json = serde_json::to_string(&vs).unwrap();
        let back: Vocabularies = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vs);
        assert_eq!(back.hash(), vs.hash());
    }
}

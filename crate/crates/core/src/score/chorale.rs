use std::fmt;

use serde::{Deserialize, Serialize};

use super::pitch::{Encoding, Pitch};
use super::token::{NoteToken, Voice};
use super::ScoreError;

/// Ticks per 4/4 bar on the sixteenth grid.
pub const TICKS_PER_BAR: usize = 16;
/// Sixteenths per beat.
pub const TICKS_PER_BEAT: usize = 4;

pub const MIN_KEY_SIGNATURE: i8 = -7;
pub const MAX_KEY_SIGNATURE: i8 = 7;

/// Position of tick `t` (1-based) inside its beat, in `1..=4`.
pub fn subdivision_for(t: usize) -> u8 {
    debug_assert!(t >= 1, "ticks are 1-based");
    ((t as i64 - 1).rem_euclid(TICKS_PER_BEAT as i64) + 1) as u8
}

/// Token sequence of one voice on the sixteenth grid. Index 0 holds tick 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VoiceSeq {
    pub voice: Voice,
    pub tokens: Vec<NoteToken>,
}

impl VoiceSeq {
    pub fn new(voice: Voice, tokens: Vec<NoteToken>) -> Self {
        Self { voice, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at 1-based tick `t`.
    pub fn at(&self, t: usize) -> Option<&NoteToken> {
        t.checked_sub(1).and_then(|i| self.tokens.get(i))
    }

    /// Notes as `(onset tick (1-based), pitch, duration in ticks)`.
    pub fn notes(&self) -> Vec<(usize, Pitch, usize)> {
        let mut out: Vec<(usize, Pitch, usize)> = Vec::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            match tok {
                NoteToken::Pitch(p) => out.push((i + 1, *p, 1)),
                NoteToken::Hold => {
                    if let Some(last) = out.last_mut() {
                        last.2 += 1;
                    }
                }
                _ => {}
            }
        }
        out
    }
}

/// Per-tick metadata: fermata flags, beat subdivision and key signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetadataSeq {
    pub fermata: Vec<bool>,
    pub subdivision: Vec<u8>,
    pub key_signature: Vec<i8>,
}

impl MetadataSeq {
    /// No fermatas, key signature 0, subdivisions by formula.
    pub fn neutral(len: usize) -> Self {
        Self {
            fermata: vec![false; len],
            subdivision: (1..=len).map(subdivision_for).collect(),
            key_signature: vec![0; len],
        }
    }

    pub fn with_fermata(mut self, fermata: Vec<bool>) -> Self {
        self.fermata = fermata;
        self
    }

    pub fn with_key_signature(mut self, key_signature: Vec<i8>) -> Self {
        self.key_signature = key_signature;
        self
    }

    pub fn len(&self) -> usize {
        self.subdivision.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdivision.is_empty()
    }
}

/// A four-voice score with aligned metadata.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chorale {
    pub encoding: Encoding,
    pub voices: [VoiceSeq; 4],
    pub metadata: MetadataSeq,
}

impl Chorale {
    /// Builds a chorale and rejects it unless [`validate`] finds nothing.
    pub fn new(
        encoding: Encoding,
        voices: [Vec<NoteToken>; 4],
        metadata: MetadataSeq,
    ) -> Result<Self, ScoreError> {
        let chorale = Self::new_unchecked(encoding, voices, metadata);
        let violations = validate(&chorale);
        if violations.is_empty() {
            Ok(chorale)
        } else {
            Err(ScoreError::Invalid(violations))
        }
    }

    pub fn new_unchecked(
        encoding: Encoding,
        voices: [Vec<NoteToken>; 4],
        metadata: MetadataSeq,
    ) -> Self {
        let [s, a, t, b] = voices;
        Self {
            encoding,
            voices: [
                VoiceSeq::new(Voice::Soprano, s),
                VoiceSeq::new(Voice::Alto, a),
                VoiceSeq::new(Voice::Tenor, t),
                VoiceSeq::new(Voice::Bass, b),
            ],
            metadata,
        }
    }

    pub fn len(&self) -> usize {
        self.metadata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metadata.is_empty()
    }

    pub fn voice(&self, voice: Voice) -> &VoiceSeq {
        &self.voices[voice.index()]
    }

    pub fn voice_mut(&mut self, voice: Voice) -> &mut VoiceSeq {
        &mut self.voices[voice.index()]
    }

    /// Token at `(voice, t)` with `t` 1-based.
    pub fn token(&self, voice: Voice, t: usize) -> Option<&NoteToken> {
        self.voice(voice).at(t)
    }

    pub fn set_token(&mut self, voice: Voice, t: usize, token: NoteToken) {
        self.voices[voice.index()].tokens[t - 1] = token;
    }

    /// Every pitch token, in voice then tick order.
    pub fn pitches(&self) -> impl Iterator<Item = (Voice, Pitch)> + '_ {
        self.voices
            .iter()
            .flat_map(|v| v.tokens.iter().filter_map(move |t| t.pitch().map(|p| (v.voice, p))))
    }

    /// Converts spelled pitches to MIDI numbers. MIDI-encoded chorales are
    /// returned unchanged.
    pub fn to_midi_encoding(&self) -> Result<Chorale, ScoreError> {
        let mut out = self.clone();
        out.encoding = Encoding::Midi;
        for v in &mut out.voices {
            for tok in &mut v.tokens {
                if let NoteToken::Pitch(p) = tok {
                    let m = p.midi();
                    let m = u8::try_from(m)
                        .ok()
                        .filter(|m| *m <= 127)
                        .ok_or(ScoreError::PitchOutOfRange(m))?;
                    *tok = NoteToken::Pitch(Pitch::Midi(m));
                }
            }
        }
        Ok(out)
    }
}

/// Which invariant a [`Violation`] breaks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    LengthMismatch,
    LeadingHold,
    PadInsideSequence,
    EncodingMismatch,
    MidiOutOfRange,
    WrongVoiceOrder,
    SubdivisionMismatch,
    KeySignatureOutOfRange,
    NotInVocabulary,
}

impl Rule {
    pub fn describe(&self) -> &'static str {
        match self {
            Rule::LengthMismatch => "length mismatch",
            Rule::LeadingHold => "leading hold",
            Rule::PadInsideSequence => "pad token inside sequence",
            Rule::EncodingMismatch => "pitch encoding differs from corpus encoding",
            Rule::MidiOutOfRange => "pitch outside MIDI range",
            Rule::WrongVoiceOrder => "voice slot holds the wrong voice",
            Rule::SubdivisionMismatch => "subdivision mismatch",
            Rule::KeySignatureOutOfRange => "key signature outside [-7, 7]",
            Rule::NotInVocabulary => "token outside voice vocabulary",
        }
    }
}

/// A broken invariant at `(voice, tick)`; `voice` is `None` for metadata.
/// Ticks are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub voice: Option<Voice>,
    pub tick: usize,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.voice {
            Some(v) => write!(f, "({}, {}, \"{}\")", v.number(), self.tick, self.rule.describe()),
            None => write!(f, "(metadata, {}, \"{}\")", self.tick, self.rule.describe()),
        }
    }
}

/// Checks every structural invariant of a chorale. Returns an empty list iff
/// the chorale is well formed; vocabulary membership is checked separately by
/// [`super::Vocabularies::violations`].
pub fn validate(chorale: &Chorale) -> Vec<Violation> {
    let mut out = Vec::new();
    let len = chorale.metadata.len();
    let md = &chorale.metadata;
    if md.fermata.len() != len {
        out.push(Violation {
            voice: None,
            tick: md.fermata.len().min(len) + 1,
            rule: Rule::LengthMismatch,
        });
    }
    if md.key_signature.len() != len {
        out.push(Violation {
            voice: None,
            tick: md.key_signature.len().min(len) + 1,
            rule: Rule::LengthMismatch,
        });
    }
    for (i, s) in md.subdivision.iter().enumerate() {
        if *s != subdivision_for(i + 1) {
            out.push(Violation {
                voice: None,
                tick: i + 1,
                rule: Rule::SubdivisionMismatch,
            });
        }
    }
    for (i, k) in md.key_signature.iter().enumerate() {
        if !(MIN_KEY_SIGNATURE..=MAX_KEY_SIGNATURE).contains(k) {
            out.push(Violation {
                voice: None,
                tick: i + 1,
                rule: Rule::KeySignatureOutOfRange,
            });
        }
    }
    for (slot, seq) in chorale.voices.iter().enumerate() {
        let voice = Some(seq.voice);
        if seq.voice.index() != slot {
            out.push(Violation {
                voice,
                tick: 1,
                rule: Rule::WrongVoiceOrder,
            });
        }
        if seq.len() != len {
            out.push(Violation {
                voice,
                tick: seq.len().min(len) + 1,
                rule: Rule::LengthMismatch,
            });
        }
        if let Some(NoteToken::Hold) = seq.tokens.first() {
            out.push(Violation {
                voice,
                tick: 1,
                rule: Rule::LeadingHold,
            });
        }
        for (i, tok) in seq.tokens.iter().enumerate() {
            let tick = i + 1;
            match tok {
                NoteToken::PadStart | NoteToken::PadEnd => out.push(Violation {
                    voice,
                    tick,
                    rule: Rule::PadInsideSequence,
                }),
                NoteToken::Pitch(p) => {
                    if p.encoding() != chorale.encoding {
                        out.push(Violation {
                            voice,
                            tick,
                            rule: Rule::EncodingMismatch,
                        });
                    }
                    if !(0..=127).contains(&p.midi()) {
                        out.push(Violation {
                            voice,
                            tick,
                            rule: Rule::MidiOutOfRange,
                        });
                    }
                }
                NoteToken::Hold => {}
            }
        }
    }
    out
}

/// Soft findings that are flagged but accepted: fermata spans that begin on a
/// tick where every voice is holding, so no note onset carries the fermata.
/// Ticks are 1-based.
pub fn fermata_warnings(chorale: &Chorale) -> Vec<usize> {
    let f = &chorale.metadata.fermata;
    (0..f.len())
        .filter(|&i| f[i] && (i == 0 || !f[i - 1]))
        .filter(|&i| {
            chorale
                .voices
                .iter()
                .all(|v| v.tokens.get(i).is_some_and(NoteToken::is_hold))
        })
        .map(|i| i + 1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::SpelledPitch;

    fn p(s: &str) -> NoteToken {
        s.parse().unwrap()
    }

    pub(crate) fn eight_tick() -> Chorale {
        let h = NoteToken::Hold;
        let voices = [
            vec![p("C5"), h, h, h, p("D5"), h, h, h],
            vec![p("E4"), h, h, h, p("F4"), h, h, h],
            vec![p("G3"), h, h, h, p("A3"), h, h, h],
            vec![p("C3"), h, h, h, p("D3"), h, h, h],
        ];
        Chorale::new(Encoding::Spelled, voices, MetadataSeq::neutral(8)).unwrap()
    }

    #[test]
    fn subdivision_formula() {
        assert_eq!(subdivision_for(1), 1);
        assert_eq!(subdivision_for(4), 4);
        assert_eq!(subdivision_for(5), 1);
        assert_eq!(subdivision_for(17), 1);
    }

    #[test]
    fn well_formed_has_no_violations() {
        assert!(validate(&eight_tick()).is_empty());
    }

    #[test]
    fn leading_hold_in_alto() {
        let mut c = eight_tick();
        c.voices[1].tokens[0] = NoteToken::Hold;
        let v = validate(&c);
        assert_eq!(
            v,
            vec![Violation {
                voice: Some(Voice::Alto),
                tick: 1,
                rule: Rule::LeadingHold
            }]
        );
        assert_eq!(v[0].to_string(), "(2, 1, \"leading hold\")");
    }

    #[test]
    fn subdivision_violation_at_four() {
        let mut c = eight_tick();
        c.metadata.subdivision = vec![1, 2, 3, 3, 1, 2, 3, 4];
        let v = validate(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].tick, 4);
        assert_eq!(v[0].rule, Rule::SubdivisionMismatch);
    }

    #[test]
    fn other_rules() {
        let mut c = eight_tick();
        c.voices[3].tokens.pop();
        c.voices[2].tokens[3] = NoteToken::PadEnd;
        c.voices[0].tokens[4] = NoteToken::Pitch(Pitch::Midi(74));
        c.metadata.key_signature[2] = 9;
        let rules: Vec<Rule> = validate(&c).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&Rule::LengthMismatch));
        assert!(rules.contains(&Rule::PadInsideSequence));
        assert!(rules.contains(&Rule::EncodingMismatch));
        assert!(rules.contains(&Rule::KeySignatureOutOfRange));
        assert!(Chorale::new(
            Encoding::Spelled,
            c.voices.clone().map(|v| v.tokens),
            c.metadata.clone()
        )
        .is_err());
    }

    #[test]
    fn notes_and_midi_conversion() {
        let c = eight_tick();
        let notes = c.voice(Voice::Soprano).notes();
        assert_eq!(notes.len(), 2);
        assert_eq!(notes[0].0, 1);
        assert_eq!(notes[0].2, 4);
        let m = c.to_midi_encoding().unwrap();
        assert_eq!(m.encoding, Encoding::Midi);
        assert_eq!(m.token(Voice::Soprano, 1), Some(&NoteToken::Pitch(Pitch::Midi(72))));
        assert!(validate(&m).is_empty());
        let _ = SpelledPitch::from_midi_in_key(60, 0);
    }

    #[test]
    fn fermata_on_held_tick_is_flagged() {
        let mut c = eight_tick();
        c.metadata.fermata = vec![false, false, true, true, true, true, false, false];
        assert_eq!(fermata_warnings(&c), vec![3]);
        c.metadata.fermata = vec![false, false, false, false, true, true, true, true];
        assert!(fermata_warnings(&c).is_empty());
    }
}

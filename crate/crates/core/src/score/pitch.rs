use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ScoreError;

/// Diatonic letter name, ordered C..B within an octave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Letter {
    C,
    D,
    E,
    F,
    G,
    A,
    B,
}

const LETTER_SEMITONES: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];
// Position of each natural on the line of fifths, C = 0.
const LETTER_FIFTHS: [i32; 7] = [0, 2, 4, -1, 1, 3, 5];

impl Letter {
    pub const ALL: [Letter; 7] = [
        Letter::C,
        Letter::D,
        Letter::E,
        Letter::F,
        Letter::G,
        Letter::A,
        Letter::B,
    ];

    pub fn index(self) -> i32 {
        self as i32
    }

    pub fn from_index(i: i32) -> Letter {
        Letter::ALL[i.rem_euclid(7) as usize]
    }

    /// Semitones above C of the natural note.
    pub fn semitone(self) -> i32 {
        LETTER_SEMITONES[self as usize]
    }

    pub fn fifths(self) -> i32 {
        LETTER_FIFTHS[self as usize]
    }

    pub fn as_char(self) -> char {
        b"CDEFGAB"[self as usize] as char
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c.to_ascii_uppercase() {
            'C' => Some(Letter::C),
            'D' => Some(Letter::D),
            'E' => Some(Letter::E),
            'F' => Some(Letter::F),
            'G' => Some(Letter::G),
            'A' => Some(Letter::A),
            'B' => Some(Letter::B),
            _ => None,
        }
    }
}

/// A transposition interval: diatonic steps plus semitones, e.g. a major
/// second up is `(1, 2)` and a minor third down is `(-2, -3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Interval {
    pub steps: i32,
    pub semitones: i32,
}

impl Interval {
    pub const UNISON: Interval = Interval {
        steps: 0,
        semitones: 0,
    };

    pub fn new(steps: i32, semitones: i32) -> Self {
        Self { steps, semitones }
    }

    pub fn inverse(self) -> Self {
        Self {
            steps: -self.steps,
            semitones: -self.semitones,
        }
    }

    /// Change in key-signature sharps caused by this interval, i.e. the sharp
    /// count of the major key reached by moving C major by `self`.
    pub fn sharps(self) -> i32 {
        let letter = Letter::from_index(self.steps);
        let natural = letter.semitone() + 12 * self.steps.div_euclid(7);
        let alter = self.semitones - natural;
        letter.fifths() + 7 * alter
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+}:{:+}", self.steps, self.semitones)
    }
}

impl FromStr for Interval {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ScoreError::InvalidToken(s.to_string());
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        Ok(Interval {
            steps: a.trim().parse().map_err(|_| bad())?,
            semitones: b.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// A pitch written with letter, accidental and octave (scientific pitch
/// notation, so C4 is MIDI 60). Accidentals range from double flat to
/// double sharp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpelledPitch {
    letter: Letter,
    alter: i8,
    octave: i8,
}

impl SpelledPitch {
    pub const MAX_ALTER: i8 = 2;

    pub fn new(letter: Letter, alter: i8, octave: i8) -> Result<Self, ScoreError> {
        if alter.abs() > Self::MAX_ALTER {
            return Err(ScoreError::UnspellableNote {
                letter: letter.as_char(),
                alter: alter as i32,
            });
        }
        Ok(Self {
            letter,
            alter,
            octave,
        })
    }

    pub fn letter(&self) -> Letter {
        self.letter
    }

    pub fn alter(&self) -> i8 {
        self.alter
    }

    pub fn octave(&self) -> i8 {
        self.octave
    }

    /// MIDI key number; may fall outside 0..=127 for extreme spellings.
    pub fn midi(&self) -> i32 {
        12 * (self.octave as i32 + 1) + self.letter.semitone() + self.alter as i32
    }

    /// Position on the line of fifths (C = 0, G = 1, F = -1, F# = 6, ...).
    pub fn fifths(&self) -> i32 {
        self.letter.fifths() + 7 * self.alter as i32
    }

    pub fn transpose(&self, interval: Interval) -> Result<Self, ScoreError> {
        let diatonic = self.letter.index() + 7 * self.octave as i32 + interval.steps;
        let letter = Letter::from_index(diatonic);
        let octave = diatonic.div_euclid(7);
        let natural = 12 * (octave + 1) + letter.semitone();
        let alter = self.midi() + interval.semitones - natural;
        if alter.abs() > Self::MAX_ALTER as i32 {
            return Err(ScoreError::UnspellableNote {
                letter: letter.as_char(),
                alter,
            });
        }
        Ok(Self {
            letter,
            alter: alter as i8,
            octave: octave as i8,
        })
    }

    /// Spelling of a MIDI number in a key with `sharps` sharps (negative for
    /// flats): sharps keys spell black keys as sharps, flat keys as flats.
    pub fn from_midi_in_key(midi: u8, sharps: i32) -> Self {
        let pc = (midi % 12) as i32;
        let octave = midi as i32 / 12 - 1;
        let natural = Letter::ALL.iter().find(|l| l.semitone() == pc);
        let (letter, alter) = match natural {
            Some(&l) => (l, 0),
            None if sharps < 0 => (
                *Letter::ALL.iter().find(|l| l.semitone() == pc + 1).unwrap(),
                -1,
            ),
            None => (
                *Letter::ALL.iter().find(|l| l.semitone() == pc - 1).unwrap(),
                1,
            ),
        };
        Self {
            letter,
            alter,
            octave: octave as i8,
        }
    }
}

impl Ord for SpelledPitch {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.midi(), self.letter.index() + 7 * self.octave as i32)
            .cmp(&(other.midi(), other.letter.index() + 7 * other.octave as i32))
    }
}

impl PartialOrd for SpelledPitch {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SpelledPitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let acc = match self.alter {
            -2 => "bb",
            -1 => "b",
            1 => "#",
            2 => "##",
            _ => "",
        };
        write!(f, "{}{}{}", self.letter.as_char(), acc, self.octave)
    }
}

impl FromStr for SpelledPitch {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ScoreError::InvalidToken(s.to_string());
        let mut chars = s.chars();
        let letter = chars.next().and_then(Letter::from_char).ok_or_else(bad)?;
        let rest = chars.as_str();
        let digits_at = rest
            .find(|c: char| c.is_ascii_digit() || c == '-')
            .ok_or_else(bad)?;
        let (acc, oct) = rest.split_at(digits_at);
        let alter = match acc {
            "" => 0,
            "#" => 1,
            "##" | "x" => 2,
            "b" => -1,
            "bb" => -2,
            _ => return Err(bad()),
        };
        let octave: i8 = oct.parse().map_err(|_| bad())?;
        SpelledPitch::new(letter, alter, octave)
    }
}

/// Pitch payload of a note token. Which variant a corpus uses is fixed by its
/// [`Encoding`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pitch {
    Midi(u8),
    Spelled(SpelledPitch),
}

impl Pitch {
    pub fn midi(&self) -> i32 {
        match self {
            Pitch::Midi(m) => *m as i32,
            Pitch::Spelled(p) => p.midi(),
        }
    }

    pub fn encoding(&self) -> Encoding {
        match self {
            Pitch::Midi(_) => Encoding::Midi,
            Pitch::Spelled(_) => Encoding::Spelled,
        }
    }

    pub fn transpose(&self, interval: Interval) -> Result<Pitch, ScoreError> {
        match self {
            Pitch::Midi(m) => {
                let shifted = *m as i32 + interval.semitones;
                u8::try_from(shifted)
                    .ok()
                    .filter(|v| *v <= 127)
                    .map(Pitch::Midi)
                    .ok_or(ScoreError::PitchOutOfRange(shifted))
            }
            Pitch::Spelled(p) => p.transpose(interval).map(Pitch::Spelled),
        }
    }
}

impl fmt::Display for Pitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pitch::Midi(m) => write!(f, "{m}"),
            Pitch::Spelled(p) => p.fmt(f),
        }
    }
}

/// How pitches are written throughout a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// MIDI key numbers; enharmonic notes collapse.
    Midi,
    /// Full note names (letter, accidental, octave).
    Spelled,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Midi => "midi",
            Encoding::Spelled => "spelled",
        })
    }
}

impl FromStr for Encoding {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "midi" => Ok(Encoding::Midi),
            "spelled" => Ok(Encoding::Spelled),
            other => Err(ScoreError::InvalidToken(other.to_string())),
        }
    }
}

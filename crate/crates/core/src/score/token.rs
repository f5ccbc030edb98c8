use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::pitch::{Pitch, SpelledPitch};
use super::ScoreError;

/// One sixteenth-note cell of a voice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoteToken {
    /// The previous note continues through this tick.
    Hold,
    /// Context filler before the first tick.
    PadStart,
    /// Context filler after the last tick.
    PadEnd,
    Pitch(Pitch),
}

impl NoteToken {
    pub const HOLD_STR: &'static str = "__";
    pub const PAD_START_STR: &'static str = "<s>";
    pub const PAD_END_STR: &'static str = "</s>";

    pub fn is_pad(&self) -> bool {
        matches!(self, NoteToken::PadStart | NoteToken::PadEnd)
    }

    pub fn is_hold(&self) -> bool {
        matches!(self, NoteToken::Hold)
    }

    pub fn pitch(&self) -> Option<Pitch> {
        match self {
            NoteToken::Pitch(p) => Some(*p),
            _ => None,
        }
    }
}

impl From<Pitch> for NoteToken {
    fn from(p: Pitch) -> Self {
        NoteToken::Pitch(p)
    }
}

impl From<SpelledPitch> for NoteToken {
    fn from(p: SpelledPitch) -> Self {
        NoteToken::Pitch(Pitch::Spelled(p))
    }
}

impl fmt::Display for NoteToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoteToken::Hold => f.write_str(Self::HOLD_STR),
            NoteToken::PadStart => f.write_str(Self::PAD_START_STR),
            NoteToken::PadEnd => f.write_str(Self::PAD_END_STR),
            NoteToken::Pitch(p) => p.fmt(f),
        }
    }
}

/// Parses `__`, `<s>`, `</s>`, a MIDI number (`60`) or a spelled pitch (`F#4`).
impl FromStr for NoteToken {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            Self::HOLD_STR => Ok(NoteToken::Hold),
            Self::PAD_START_STR => Ok(NoteToken::PadStart),
            Self::PAD_END_STR => Ok(NoteToken::PadEnd),
            _ if s.bytes().all(|b| b.is_ascii_digit()) && !s.is_empty() => s
                .parse::<u8>()
                .ok()
                .filter(|m| *m <= 127)
                .map(|m| NoteToken::Pitch(Pitch::Midi(m)))
                .ok_or_else(|| ScoreError::InvalidToken(s.to_string())),
            _ => s.parse::<SpelledPitch>().map(NoteToken::from),
        }
    }
}

impl Serialize for NoteToken {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NoteToken {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Voice part, soprano highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voice {
    Soprano,
    Alto,
    Tenor,
    Bass,
}

impl Voice {
    pub const ALL: [Voice; 4] = [Voice::Soprano, Voice::Alto, Voice::Tenor, Voice::Bass];

    /// 0-based position (soprano = 0).
    pub fn index(self) -> usize {
        self as usize
    }

    /// 1-based voice number (soprano = 1, bass = 4).
    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn from_index(i: usize) -> Option<Voice> {
        Voice::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Voice::Soprano => "soprano",
            Voice::Alto => "alto",
            Voice::Tenor => "tenor",
            Voice::Bass => "bass",
        }
    }
}

impl fmt::Display for Voice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_strings() {
        for s in ["__", "<s>", "</s>", "60", "F#4", "Bb2"] {
            let t: NoteToken = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert!("128".parse::<NoteToken>().is_err());
        assert!("".parse::<NoteToken>().is_err());
    }
}

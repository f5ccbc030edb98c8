//! Per-bar key-signature estimation with the Krumhansl-Schmuckler algorithm:
//! correlate a bar's pitch-class duration profile against the 24 rotated
//! Krumhansl-Kessler key profiles and report the winning key's signature.

use crate::score::{Chorale, Encoding, NoteToken, Pitch, TICKS_PER_BAR};

pub const MAJOR_PROFILE: [f64; 12] = [
    6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88,
];
pub const MINOR_PROFILE: [f64; 12] = [
    6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17,
];

// Sharp count of the major key on each tonic pitch class, choosing the
// spelling with fewer accidentals (F# over Gb).
const MAJOR_SIGNATURE: [i32; 12] = [0, -5, 2, -3, 4, -1, 6, 1, -4, 3, -2, 5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyEstimate {
    pub tonic: u8,
    pub minor: bool,
    pub correlation: f64,
}

impl KeyEstimate {
    /// Pitch class of the relative major's tonic.
    pub fn major_tonic(&self) -> u8 {
        if self.minor {
            (self.tonic + 3) % 12
        } else {
            self.tonic
        }
    }
}

fn pearson(a: &[f64; 12], b: &[f64]) -> f64 {
    let ma = a.iter().sum::<f64>() / 12.0;
    let mb = b.iter().sum::<f64>() / 12.0;
    let (mut num, mut da, mut db) = (0.0, 0.0, 0.0);
    for i in 0..12 {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma).powi(2);
        db += (b[i] - mb).powi(2);
    }
    if da == 0.0 || db == 0.0 {
        0.0
    } else {
        num / (da * db).sqrt()
    }
}

/// Best of the 24 keys for a pitch-class duration profile; ties go to the
/// first candidate in the order C major..B major, C minor..B minor.
pub fn estimate_key(profile: &[f64; 12]) -> KeyEstimate {
    let mut best = KeyEstimate {
        tonic: 0,
        minor: false,
        correlation: f64::NEG_INFINITY,
    };
    for minor in [false, true] {
        let base = if minor { &MINOR_PROFILE } else { &MAJOR_PROFILE };
        for tonic in 0..12u8 {
            let rotated: Vec<f64> = (0..12).map(|pc| base[(pc + 12 - tonic as usize) % 12]).collect();
            let r = pearson(profile, &rotated);
            if r > best.correlation {
                best = KeyEstimate {
                    tonic,
                    minor,
                    correlation: r,
                };
            }
        }
    }
    best
}

/// Sounding pitches of each tick in `[start, end)` (0-based), holds resolved.
fn sounding(chorale: &Chorale, start: usize, end: usize) -> Vec<Pitch> {
    let mut out = Vec::new();
    for seq in &chorale.voices {
        let mut current = seq.tokens[..start].iter().rev().find_map(|t| t.pitch());
        for tok in &seq.tokens[start..end] {
            if let NoteToken::Pitch(p) = tok {
                current = Some(*p);
            }
            if let Some(p) = current {
                out.push(p);
            }
        }
    }
    out
}

fn profile_of(pitches: &[Pitch]) -> [f64; 12] {
    let mut d = [0.0; 12];
    for p in pitches {
        d[p.midi().rem_euclid(12) as usize] += 1.0;
    }
    d
}

/// Key signature for an estimate. With spelled pitches the enharmonic choice
/// (e.g. Db vs C#) is the signature whose diatonic window on the line of
/// fifths covers the most sounding ticks.
fn signature(est: &KeyEstimate, pitches: &[Pitch]) -> i8 {
    let base = MAJOR_SIGNATURE[est.major_tonic() as usize];
    let candidates = [base - 12, base, base + 12];
    let spelled: Vec<i32> = pitches
        .iter()
        .filter_map(|p| match p {
            Pitch::Spelled(s) => Some(s.fifths()),
            Pitch::Midi(_) => None,
        })
        .collect();
    if spelled.is_empty() {
        return base as i8;
    }
    candidates
        .into_iter()
        .filter(|s| (-7..=7).contains(s))
        .min_by_key(|&s| {
            let outside = spelled.iter().filter(|&&f| f < s - 1 || f > s + 5).count();
            (outside, s.abs(), s < 0)
        })
        .unwrap_or(base) as i8
}

/// One key-signature value per tick, constant within each 16-tick bar. Bars
/// without any note onset inherit the previous bar; a first bar without
/// onsets takes the whole-piece estimate.
pub fn estimate_key_signatures(chorale: &Chorale) -> Vec<i8> {
    let len = chorale.len();
    let mut out = Vec::with_capacity(len);
    let whole = || {
        let p = sounding(chorale, 0, len);
        signature(&estimate_key(&profile_of(&p)), &p)
    };
    let mut previous: Option<i8> = None;
    for start in (0..len).step_by(TICKS_PER_BAR) {
        let end = (start + TICKS_PER_BAR).min(len);
        let has_onset = chorale
            .voices
            .iter()
            .any(|v| v.tokens[start..end].iter().any(|t| t.pitch().is_some()));
        let value = if has_onset {
            let p = sounding(chorale, start, end);
            signature(&estimate_key(&profile_of(&p)), &p)
        } else {
            previous.unwrap_or_else(whole)
        };
        previous = Some(value);
        out.extend(std::iter::repeat_n(value, end - start));
    }
    debug_assert!(chorale.encoding == Encoding::Spelled || out.iter().all(|k| (-7..=7).contains(k)));
    out
}

use super::chorale::{Chorale, VoiceSeq, MAX_KEY_SIGNATURE, MIN_KEY_SIGNATURE};
use super::pitch::{Encoding, Interval, Pitch};
use super::token::{NoteToken, Voice};
use super::ScoreError;

/// Shifts every pitch by `interval`. Holds, fermatas and subdivisions are
/// untouched; key signatures move by the interval's sharp delta, clamped to
/// `[-7, 7]`.
pub fn transpose(chorale: &Chorale, interval: Interval) -> Result<Chorale, ScoreError> {
    let mut out = chorale.clone();
    for seq in &mut out.voices {
        for tok in &mut seq.tokens {
            if let NoteToken::Pitch(p) = tok {
                *tok = NoteToken::Pitch(p.transpose(interval)?);
            }
        }
    }
    let delta = interval.sharps();
    for k in &mut out.metadata.key_signature {
        *k = (*k as i32 + delta).clamp(MIN_KEY_SIGNATURE as i32, MAX_KEY_SIGNATURE as i32) as i8;
    }
    Ok(out)
}

/// Piano-roll view of a voice: each hold repeats the preceding MIDI number.
pub fn to_piano_roll(voice: &VoiceSeq) -> Result<Vec<u8>, ScoreError> {
    let mut out = Vec::with_capacity(voice.len());
    let mut current: Option<u8> = None;
    for (i, tok) in voice.tokens.iter().enumerate() {
        match tok {
            NoteToken::Pitch(p) => {
                let m = p.midi();
                current = Some(
                    u8::try_from(m)
                        .ok()
                        .filter(|m| *m <= 127)
                        .ok_or(ScoreError::PitchOutOfRange(m))?,
                );
            }
            NoteToken::Hold => {}
            NoteToken::PadStart | NoteToken::PadEnd => {
                return Err(ScoreError::NotDecodable {
                    voice: voice.voice,
                    tick: i + 1,
                })
            }
        }
        out.push(current.ok_or(ScoreError::NotDecodable {
            voice: voice.voice,
            tick: i + 1,
        })?);
    }
    Ok(out)
}

/// Inverse of [`to_piano_roll`] up to re-articulation: repeated values always
/// become holds, so two repeated notes of the same pitch merge into one.
pub fn from_piano_roll(voice: Voice, roll: &[u8]) -> VoiceSeq {
    let tokens = roll
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            if i > 0 && roll[i - 1] == m {
                NoteToken::Hold
            } else {
                NoteToken::Pitch(Pitch::Midi(m))
            }
        })
        .collect();
    VoiceSeq::new(voice, tokens)
}

/// Total absolute accidentals and flat count of the chorale's pitches; used to
/// rank candidate spellings of a transposition.
pub fn accidental_cost(chorale: &Chorale) -> (u32, u32) {
    chorale.pitches().fold((0, 0), |(acc, flats), (_, p)| match p {
        Pitch::Spelled(s) => (
            acc + s.alter().unsigned_abs() as u32,
            flats + u32::from(s.alter() < 0),
        ),
        Pitch::Midi(_) => (acc, flats),
    })
}

/// Transposes by `semitones`, choosing the diatonic step count that yields
/// the fewest accidentals (ties broken toward fewer flats). MIDI-encoded
/// chorales use the plain semitone shift with the conventional step count.
pub fn transpose_by_semitones(chorale: &Chorale, semitones: i32) -> Result<(Chorale, Interval), ScoreError> {
    let base = (semitones as f64 * 7.0 / 12.0).round() as i32;
    if chorale.encoding == Encoding::Midi {
        let iv = Interval::new(base, semitones);
        return Ok((transpose(chorale, iv)?, iv));
    }
    let mut best: Option<((u32, u32), Chorale, Interval)> = None;
    let mut last_err = None;
    for steps in [base - 1, base, base + 1] {
        let iv = Interval::new(steps, semitones);
        match transpose(chorale, iv) {
            Ok(c) => {
                let cost = accidental_cost(&c);
                if best.as_ref().is_none_or(|(b, _, _)| cost < *b) {
                    best = Some((cost, c, iv));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some((_, c, iv)) => Ok((c, iv)),
        None => Err(last_err.expect("at least one candidate was tried")),
    }
}

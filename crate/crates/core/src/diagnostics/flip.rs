use super::DiagnosticsError;
use crate::score::{to_piano_roll, NoteToken, Pitch, VoiceSeq};

/// Number of cells that change when the note starting at `tick` (1-based)
/// is re-pitched to `new`, keeping its rhythm: `(hold encoding, piano roll)`.
/// Both counts come from building the two encodings before and after.
pub fn flip_distance(voice: &VoiceSeq, tick: usize, new: Pitch) -> Result<(usize, usize), DiagnosticsError> {
    match voice.at(tick) {
        Some(NoteToken::Pitch(_)) => {}
        _ => return Err(DiagnosticsError::NotAnOnset { tick }),
    }
    let mut changed = voice.clone();
    changed.tokens[tick - 1] = NoteToken::Pitch(new);
    let hold = voice.tokens.iter().zip(&changed.tokens).filter(|(a, b)| a != b).count();
    let before = to_piano_roll(voice)?;
    let after = to_piano_roll(&changed)?;
    let roll = before.iter().zip(&after).filter(|(a, b)| a != b).count();
    Ok((hold, roll))
}

use midly::num::{u15, u24, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};

use crate::score::Chorale;

pub const TICKS_PER_QUARTER: u16 = 480;
pub const MIDI_TICKS_PER_SIXTEENTH: u32 = TICKS_PER_QUARTER as u32 / 4;
const TEMPO_US_PER_QUARTER: u32 = 1_000_000;
const VELOCITY: u8 = 80;
const TRACK_NAMES: [&[u8]; 4] = [b"Soprano", b"Alto", b"Tenor", b"Bass"];

/// Standard MIDI File, format 1, 480 ticks per quarter: a conductor track
/// (tempo and 4/4 meter) followed by one track per voice on channels 0..3.
pub fn export_midi(chorale: &Chorale) -> Vec<u8> {
    let mut tracks: Vec<Vec<TrackEvent<'static>>> = Vec::with_capacity(5);
    let meta = |delta: u32, m: MetaMessage<'static>| TrackEvent {
        delta: u28::new(delta),
        kind: TrackEventKind::Meta(m),
    };
    tracks.push(vec![
        meta(0, MetaMessage::Tempo(u24::new(TEMPO_US_PER_QUARTER))),
        meta(0, MetaMessage::TimeSignature(4, 2, 24, 8)),
        meta(0, MetaMessage::EndOfTrack),
    ]);
    for (channel, seq) in chorale.voices.iter().enumerate() {
        let mut events = vec![meta(0, MetaMessage::TrackName(TRACK_NAMES[channel]))];
        let mut now = 0u32;
        for (onset, pitch, dur) in seq.notes() {
            let start = (onset as u32 - 1) * MIDI_TICKS_PER_SIXTEENTH;
            let end = start + dur as u32 * MIDI_TICKS_PER_SIXTEENTH;
            let key = u7::new(pitch.midi().clamp(0, 127) as u8);
            let ch = u4::new(channel as u8);
            events.push(TrackEvent {
                delta: u28::new(start - now),
                kind: TrackEventKind::Midi {
                    channel: ch,
                    message: MidiMessage::NoteOn {
                        key,
                        vel: u7::new(VELOCITY),
                    },
                },
            });
            events.push(TrackEvent {
                delta: u28::new(end - start),
                kind: TrackEventKind::Midi {
                    channel: ch,
                    message: MidiMessage::NoteOff { key, vel: u7::new(0) },
                },
            });
            now = end;
        }
        events.push(meta(0, MetaMessage::EndOfTrack));
        tracks.push(events);
    }
    let smf = Smf {
        header: Header::new(Format::Parallel, Timing::Metrical(u15::new(TICKS_PER_QUARTER))),
        tracks,
    };
    let mut out = Vec::new();
    smf.write_std(&mut out).expect("writing to a Vec cannot fail");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{Encoding, MetadataSeq, NoteToken};

    fn tok(s: &str) -> NoteToken {
        s.parse().unwrap()
    }

    /// (track, key, start, end) for every note in a parsed file.
    fn notes(bytes: &[u8]) -> (Smf<'_>, Vec<(usize, u8, u32, u32)>) {
        let smf = Smf::parse(bytes).unwrap();
        let mut out = Vec::new();
        for (i, track) in smf.tracks.iter().enumerate() {
            let mut now = 0u32;
            let mut open: Option<(u8, u32)> = None;
            for ev in track {
                now += ev.delta.as_int();
                if let TrackEventKind::Midi { message, .. } = ev.kind {
                    match message {
                        MidiMessage::NoteOn { key, vel } if vel.as_int() > 0 => open = Some((key.as_int(), now)),
                        MidiMessage::NoteOff { key, .. } | MidiMessage::NoteOn { key, .. } => {
                            let (k, s) = open.take().unwrap();
                            assert_eq!(k, key.as_int());
                            out.push((i, k, s, now));
                        }
                        _ => {}
                    }
                }
            }
        }
        (smf, out)
    }

    #[test]
    fn quarter_note_is_one_event() {
        let h = NoteToken::Hold;
        let c = Chorale::new(
            Encoding::Spelled,
            [
                vec![tok("C4"), h, h, h],
                vec![tok("A3"), h, tok("B3"), h],
                vec![tok("F3"), h, h, h],
                vec![tok("F#2"), h, h, tok("Gb2")],
            ],
            MetadataSeq::neutral(4),
        )
        .unwrap();
        let bytes = export_midi(&c);
        let (smf, n) = notes(&bytes);
        assert_eq!(smf.header.format, Format::Parallel);
        assert_eq!(smf.header.timing, Timing::Metrical(u15::new(480)));
        assert_eq!(smf.tracks.len(), 5);
        assert!(n.contains(&(1, 60, 0, 480)));
        assert_eq!(n.iter().filter(|e| e.0 == 1).count(), 1);
        assert!(n.contains(&(2, 57, 0, 240)));
        assert!(n.contains(&(2, 59, 240, 480)));
        // F#2 and Gb2 share key number 42
        assert!(n.contains(&(4, 42, 0, 360)));
        assert!(n.contains(&(4, 42, 360, 480)));
    }
}

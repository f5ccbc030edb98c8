//! MusicXML 3.x partwise subset: pitched notes, rests, ties, fermatas,
//! `<backup>`/`<forward>` and key signatures. Chords, grace notes, cue notes,
//! unpitched notes and repeats are rejected.

use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::key::estimate_key_signatures;
use super::IngestError;
use crate::score::{
    Chorale, Encoding, Letter, MetadataSeq, NoteToken, Pitch, SpelledPitch, Voice, VoiceSeq,
    TICKS_PER_BAR,
};

/// Where the key-signature metadata list comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeySource {
    /// `<key><fifths>` elements of the first part; estimated when absent.
    #[default]
    Notated,
    /// Always estimated per bar from the notes.
    Estimated,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub key_source: KeySource,
}

const INSTRUMENT_WORDS: [&str; 14] = [
    "violin", "viola", "cello", "violoncello", "contrabass", "organ", "continuo", "oboe", "flute",
    "horn", "trumpet", "bassoon", "piano", "instrument",
];

/// One part flattened onto the sixteenth grid.
#[derive(Debug, Default)]
struct PartGrid {
    name: String,
    /// `None` where no note sounds (rests, gaps).
    cells: Vec<Option<NoteToken>>,
    fermata: Vec<bool>,
    key_changes: Vec<(usize, i8)>,
}

impl PartGrid {
    fn ensure_len(&mut self, len: usize) {
        if self.cells.len() < len {
            self.cells.resize(len, None);
            self.fermata.resize(len, false);
        }
    }
}

fn parse_xml(text: &str) -> Result<Document<'_>, roxmltree::Error> {
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    Document::parse_with_options(text, opts)
}

/// Parses a four-part score with default options.
pub fn parse_musicxml(document: &[u8]) -> Result<Chorale, IngestError> {
    parse_musicxml_with(document, ParseOptions::default())
}

pub fn parse_musicxml_with(document: &[u8], options: ParseOptions) -> Result<Chorale, IngestError> {
    let text = std::str::from_utf8(document)
        .map_err(|e| IngestError::MalformedInput(format!("not UTF-8: {e}")))?;
    let doc = parse_xml(text).map_err(|e| IngestError::MalformedInput(e.to_string()))?;
    let parts = read_parts(&doc)?;
    let sung = parts
        .iter()
        .filter(|p| {
            let name = p.name.to_lowercase();
            !INSTRUMENT_WORDS.iter().any(|w| name.contains(w))
        })
        .count();
    if parts.len() != 4 || sung != 4 {
        return Err(IngestError::NotFourVoices(sung.min(parts.len())));
    }
    let len = parts.iter().map(|p| p.cells.len()).max().unwrap_or(0);
    if len == 0 {
        return Err(IngestError::MalformedInput("score has no notes".into()));
    }
    let mut voices: [Vec<NoteToken>; 4] = Default::default();
    let mut fermata = vec![false; len];
    for (i, part) in parts.iter().enumerate() {
        let voice = Voice::from_index(i).expect("four parts");
        voices[i] = fill_rests(voice, &part.cells, len)?;
        for (t, f) in part.fermata.iter().enumerate() {
            fermata[t] |= *f;
        }
    }
    let metadata = MetadataSeq::neutral(len).with_fermata(fermata);
    let mut chorale = Chorale::new(Encoding::Spelled, voices, metadata)?;
    let notated = &parts[0].key_changes;
    chorale.metadata.key_signature = match options.key_source {
        KeySource::Notated if !notated.is_empty() => key_list(notated, len),
        _ => estimate_key_signatures(&chorale),
    };
    Ok(chorale)
}

/// Reads the first part of a score as a melody: tokens, fermata flags and the
/// notated key list (empty when no key is notated).
pub fn parse_melody(document: &[u8]) -> Result<(Vec<NoteToken>, Vec<bool>, Vec<i8>), IngestError> {
    let text = std::str::from_utf8(document)
        .map_err(|e| IngestError::MalformedInput(format!("not UTF-8: {e}")))?;
    let doc = parse_xml(text).map_err(|e| IngestError::MalformedInput(e.to_string()))?;
    let parts = read_parts(&doc)?;
    let part = parts
        .first()
        .ok_or_else(|| IngestError::MalformedInput("no parts".into()))?;
    let len = part.cells.len();
    let tokens = fill_rests(Voice::Soprano, &part.cells, len)?;
    let keys = if part.key_changes.is_empty() {
        Vec::new()
    } else {
        key_list(&part.key_changes, len)
    };
    Ok((tokens, part.fermata.clone(), keys))
}

fn key_list(changes: &[(usize, i8)], len: usize) -> Vec<i8> {
    let mut out = vec![changes[0].1; len];
    for (i, &(tick, fifths)) in changes.iter().enumerate() {
        let end = changes.get(i + 1).map_or(len, |c| c.0).min(len);
        for k in out.iter_mut().take(end).skip(tick) {
            *k = fifths;
        }
    }
    out
}

/// Rests and gaps continue the previous note; a leading rest cannot be
/// represented.
fn fill_rests(voice: Voice, cells: &[Option<NoteToken>], len: usize) -> Result<Vec<NoteToken>, IngestError> {
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        match cells.get(t).copied().flatten() {
            Some(tok) => out.push(tok),
            None if t == 0 => {
                return Err(IngestError::UnsupportedElement(format!(
                    "{voice} starts with a rest"
                )))
            }
            None => out.push(NoteToken::Hold),
        }
    }
    Ok(out)
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn child_text<'a>(node: Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text()).map(str::trim)
}

fn parse_int(node: Node, name: &str) -> Result<i64, IngestError> {
    let s = child_text(node, name)
        .ok_or_else(|| IngestError::MalformedInput(format!("<{}> missing <{name}>", node.tag_name().name())))?;
    s.parse::<i64>()
        .map_err(|_| IngestError::MalformedInput(format!("<{name}> is not an integer: {s}")))
}

fn read_parts(doc: &Document) -> Result<Vec<PartGrid>, IngestError> {
    let root = doc.root_element();
    if root.has_tag_name("score-timewise") {
        return Err(IngestError::UnsupportedElement("score-timewise".into()));
    }
    if !root.has_tag_name("score-partwise") {
        return Err(IngestError::MalformedInput(format!(
            "unexpected root <{}>",
            root.tag_name().name()
        )));
    }
    let names: Vec<(String, String)> = child(root, "part-list")
        .map(|pl| {
            pl.children()
                .filter(|c| c.has_tag_name("score-part"))
                .map(|sp| {
                    (
                        sp.attribute("id").unwrap_or_default().to_string(),
                        child_text(sp, "part-name").unwrap_or_default().to_string(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    root.children()
        .filter(|c| c.has_tag_name("part"))
        .enumerate()
        .map(|(i, part)| {
            let id = part.attribute("id").unwrap_or_default();
            let name = names
                .iter()
                .find(|(pid, _)| pid == id)
                .map(|(_, n)| n.clone())
                .unwrap_or_else(|| format!("part {}", i + 1));
            read_part(part, name)
        })
        .collect()
}

fn read_part(part: Node, name: String) -> Result<PartGrid, IngestError> {
    let mut grid = PartGrid {
        name,
        ..Default::default()
    };
    let mut divisions: i64 = 0;
    let mut cursor: i64 = 0;
    let mut furthest: i64 = 0;
    // end tick and pitch of every placed note, for resolving ties
    let mut ends: Vec<(usize, Pitch)> = Vec::new();
    for measure in part.children().filter(|c| c.has_tag_name("measure")) {
        let number = measure.attribute("number").unwrap_or("?").to_string();
        for el in measure.children().filter(Node::is_element) {
            match el.tag_name().name() {
                "attributes" => {
                    if child(el, "divisions").is_some() {
                        divisions = parse_int(el, "divisions")?;
                        if divisions <= 0 {
                            return Err(IngestError::MalformedInput("non-positive <divisions>".into()));
                        }
                    }
                    if let Some(key) = child(el, "key") {
                        if child(key, "fifths").is_some() {
                            let fifths = parse_int(key, "fifths")?;
                            if !(-7..=7).contains(&fifths) {
                                return Err(IngestError::MalformedInput(format!("key fifths {fifths}")));
                            }
                            let tick = ticks(cursor, divisions, &grid.name, &number)? as usize;
                            grid.key_changes.retain(|(t, _)| *t != tick);
                            grid.key_changes.push((tick, fifths as i8));
                        }
                    }
                }
                "backup" | "forward" => {
                    let d = parse_int(el, "duration")?;
                    cursor += if el.has_tag_name("backup") { -d } else { d };
                    if cursor < 0 {
                        return Err(IngestError::MalformedInput("<backup> before start".into()));
                    }
                }
                "barline" => {
                    if child(el, "repeat").is_some() {
                        return Err(IngestError::UnsupportedElement("repeat barline".into()));
                    }
                }
                "note" => {
                    read_note(el, &mut grid, &mut cursor, divisions, &number, &mut ends)?;
                }
                _ => {}
            }
            furthest = furthest.max(cursor);
        }
    }
    let end = ticks(furthest, divisions.max(1), &grid.name, "end")? as usize;
    grid.ensure_len(end);
    Ok(grid)
}

fn ticks(pos: i64, divisions: i64, part: &str, measure: &str) -> Result<i64, IngestError> {
    if divisions == 0 {
        return Err(IngestError::MalformedInput("note before <divisions>".into()));
    }
    if (pos * 4) % divisions != 0 {
        return Err(IngestError::UnsupportedSubdivision {
            part: part.to_string(),
            measure: measure.to_string(),
        });
    }
    Ok(pos * 4 / divisions)
}

fn read_note(
    el: Node,
    grid: &mut PartGrid,
    cursor: &mut i64,
    divisions: i64,
    measure: &str,
    ends: &mut Vec<(usize, Pitch)>,
) -> Result<(), IngestError> {
    for unsupported in ["grace", "cue", "unpitched"] {
        if child(el, unsupported).is_some() {
            return Err(IngestError::UnsupportedElement(format!("{unsupported} note")));
        }
    }
    if child(el, "chord").is_some() {
        return Err(IngestError::VoiceDivision {
            part: grid.name.clone(),
            measure: measure.to_string(),
        });
    }
    let duration = parse_int(el, "duration")?;
    if duration <= 0 {
        return Err(IngestError::MalformedInput("non-positive note duration".into()));
    }
    let onset = ticks(*cursor, divisions, &grid.name, measure)? as usize;
    let end = ticks(*cursor + duration, divisions, &grid.name, measure)? as usize;
    *cursor += duration;
    let Some(pitch_el) = child(el, "pitch") else {
        return Ok(()); // rest
    };
    let pitch = read_pitch(pitch_el)?;
    grid.ensure_len(end);
    if grid.cells[onset..end].iter().any(Option::is_some) {
        return Err(IngestError::VoiceDivision {
            part: grid.name.clone(),
            measure: measure.to_string(),
        });
    }
    let tie_stop = el
        .children()
        .filter(|c| c.has_tag_name("tie"))
        .chain(
            child(el, "notations")
                .into_iter()
                .flat_map(|n| n.children().filter(|c| c.has_tag_name("tied"))),
        )
        .any(|t| t.attribute("type") == Some("stop"));
    let continues = tie_stop && ends.iter().any(|&(e, p)| e == onset && p.midi() == pitch.midi());
    grid.cells[onset] = Some(if continues {
        NoteToken::Hold
    } else {
        NoteToken::Pitch(pitch)
    });
    for cell in &mut grid.cells[onset + 1..end] {
        *cell = Some(NoteToken::Hold);
    }
    let has_fermata = child(el, "notations").is_some_and(|n| child(n, "fermata").is_some());
    if has_fermata {
        for f in &mut grid.fermata[onset..end] {
            *f = true;
        }
    }
    ends.push((end, pitch));
    Ok(())
}

fn read_pitch(el: Node) -> Result<Pitch, IngestError> {
    let step = child_text(el, "step").ok_or_else(|| IngestError::MalformedInput("<pitch> without <step>".into()))?;
    let letter = step
        .chars()
        .next()
        .filter(|_| step.len() == 1)
        .and_then(Letter::from_char)
        .ok_or_else(|| IngestError::MalformedInput(format!("bad <step> {step}")))?;
    let alter = match child_text(el, "alter") {
        None => 0,
        Some(a) => {
            let v: f64 = a
                .parse()
                .map_err(|_| IngestError::MalformedInput(format!("bad <alter> {a}")))?;
            if v.fract() != 0.0 {
                return Err(IngestError::UnsupportedElement(format!("microtonal alter {a}")));
            }
            v as i8
        }
    };
    let octave = parse_int(el, "octave")?;
    let p = SpelledPitch::new(letter, alter, octave as i8)?;
    Ok(Pitch::Spelled(p))
}

const PART_NAMES: [&str; 4] = ["Soprano", "Alto", "Tenor", "Bass"];

/// Writes a partwise MusicXML document that [`parse_musicxml`] reads back to
/// the same chorale. Notes are split with ties at bar lines and wherever the
/// fermata or key-signature lists change, so both lists survive the trip.
/// MIDI-encoded chorales are spelled from the key signature.
pub fn export_musicxml(chorale: &Chorale) -> Vec<u8> {
    let len = chorale.len();
    let md = &chorale.metadata;
    let mut x = String::new();
    x.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    x.push_str("<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" \"http://www.musicxml.org/dtds/partwise.dtd\">\n");
    x.push_str("<score-partwise version=\"3.1\">\n  <part-list>\n");
    for (i, name) in PART_NAMES.iter().enumerate() {
        let _ = writeln!(
            x,
            "    <score-part id=\"P{}\">\n      <part-name>{name}</part-name>\n    </score-part>",
            i + 1
        );
    }
    x.push_str("  </part-list>\n");

    let mut cuts = vec![false; len + 1];
    for t in (0..=len).step_by(TICKS_PER_BAR) {
        cuts[t] = true;
    }
    for t in 1..len {
        if md.fermata[t] != md.fermata[t - 1] || md.key_signature[t] != md.key_signature[t - 1] {
            cuts[t] = true;
        }
    }
    cuts[len] = true;

    for (i, seq) in chorale.voices.iter().enumerate() {
        let _ = writeln!(x, "  <part id=\"P{}\">", i + 1);
        let segments = segments(seq, &cuts);
        let mut seg_iter = segments.iter().peekable();
        for (bar, bar_start) in (0..len).step_by(TICKS_PER_BAR).enumerate() {
            let _ = writeln!(x, "    <measure number=\"{}\">", bar + 1);
            if bar == 0 {
                let _ = writeln!(
                    x,
                    "      <attributes>\n        <divisions>4</divisions>\n        <key>\n          <fifths>{}</fifths>\n        </key>\n        <time>\n          <beats>4</beats>\n          <beat-type>4</beat-type>\n        </time>\n{}      </attributes>",
                    md.key_signature[0],
                    clef(seq.voice)
                );
            }
            let bar_end = (bar_start + TICKS_PER_BAR).min(len);
            while let Some(seg) = seg_iter.next_if(|s| s.start < bar_end) {
                if seg.start > 0 && md.key_signature[seg.start] != md.key_signature[seg.start - 1] {
                    let _ = writeln!(
                        x,
                        "      <attributes>\n        <key>\n          <fifths>{}</fifths>\n        </key>\n      </attributes>",
                        md.key_signature[seg.start]
                    );
                }
                let sig = md.key_signature[seg.onset] as i32;
                let spelled = match seg.pitch {
                    Pitch::Spelled(p) => p,
                    Pitch::Midi(m) => SpelledPitch::from_midi_in_key(m, sig),
                };
                let fermata = md.fermata[seg.start];
                write_segment(&mut x, spelled, seg, fermata);
            }
            x.push_str("    </measure>\n");
        }
        x.push_str("  </part>\n");
    }
    x.push_str("</score-partwise>\n");
    x.into_bytes()
}

fn clef(voice: Voice) -> &'static str {
    match voice {
        Voice::Soprano | Voice::Alto => {
            "        <clef>\n          <sign>G</sign>\n          <line>2</line>\n        </clef>\n"
        }
        Voice::Tenor => "        <clef>\n          <sign>G</sign>\n          <line>2</line>\n          <clef-octave-change>-1</clef-octave-change>\n        </clef>\n",
        Voice::Bass => "        <clef>\n          <sign>F</sign>\n          <line>4</line>\n        </clef>\n",
    }
}

/// A tied piece of one note between two cut points.
#[derive(Debug, Clone, Copy)]
struct Segment {
    start: usize,
    len: usize,
    pitch: Pitch,
    onset: usize,
    tie_start: bool,
    tie_stop: bool,
}

fn segments(seq: &VoiceSeq, cuts: &[bool]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for (onset, pitch, dur) in seq.notes() {
        let onset = onset - 1;
        let mut start = onset;
        let end = onset + dur;
        while start < end {
            let mut stop = start + 1;
            while stop < end && !cuts[stop] {
                stop += 1;
            }
            // split each piece into notatable durations as well
            for piece in notatable(stop - start) {
                out.push(Segment {
                    start,
                    len: piece,
                    pitch,
                    onset,
                    tie_start: start + piece < end,
                    tie_stop: start > onset,
                });
                start += piece;
            }
        }
    }
    out
}

const NOTATABLE: [(usize, &str, usize); 8] = [
    (16, "whole", 0),
    (12, "half", 1),
    (8, "half", 0),
    (6, "quarter", 1),
    (4, "quarter", 0),
    (3, "eighth", 1),
    (2, "eighth", 0),
    (1, "16th", 0),
];

fn notatable(mut len: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while len > 0 {
        let (d, _, _) = NOTATABLE.iter().find(|(d, _, _)| *d <= len).expect("1 always fits");
        out.push(*d);
        len -= d;
    }
    out
}

fn write_segment(x: &mut String, p: SpelledPitch, seg: &Segment, fermata: bool) {
    let (_, kind, dots) = NOTATABLE
        .iter()
        .find(|(d, _, _)| *d == seg.len)
        .expect("segments are notatable");
    x.push_str("      <note>\n        <pitch>\n");
    let _ = writeln!(x, "          <step>{}</step>", p.letter().as_char());
    if p.alter() != 0 {
        let _ = writeln!(x, "          <alter>{}</alter>", p.alter());
    }
    let _ = writeln!(x, "          <octave>{}</octave>\n        </pitch>", p.octave());
    let _ = writeln!(x, "        <duration>{}</duration>", seg.len);
    if seg.tie_stop {
        x.push_str("        <tie type=\"stop\"/>\n");
    }
    if seg.tie_start {
        x.push_str("        <tie type=\"start\"/>\n");
    }
    x.push_str("        <voice>1</voice>\n");
    let _ = writeln!(x, "        <type>{kind}</type>");
    for _ in 0..*dots {
        x.push_str("        <dot/>\n");
    }
    if seg.tie_start || seg.tie_stop || fermata {
        x.push_str("        <notations>\n");
        if seg.tie_stop {
            x.push_str("          <tied type=\"stop\"/>\n");
        }
        if seg.tie_start {
            x.push_str("          <tied type=\"start\"/>\n");
        }
        if fermata {
            x.push_str("          <fermata type=\"upright\"/>\n");
        }
        x.push_str("        </notations>\n");
    }
    x.push_str("      </note>\n");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::validate;

    pub(crate) fn satb_bar(notes: [&str; 4], extra_bass: &str) -> String {
        let mut parts = String::new();
        for (i, n) in notes.iter().enumerate() {
            let p: SpelledPitch = n.parse().unwrap();
            let mut body = String::new();
            for _ in 0..4 {
                let _ = write!(
                    body,
                    "<note><pitch><step>{}</step>{}<octave>{}</octave></pitch><duration>1</duration><type>quarter</type></note>",
                    p.letter().as_char(),
                    if p.alter() != 0 { format!("<alter>{}</alter>", p.alter()) } else { String::new() },
                    p.octave()
                );
                if i == 3 {
                    body.push_str(extra_bass);
                }
            }
            let _ = write!(
                parts,
                "<part id=\"P{0}\"><measure number=\"1\"><attributes><divisions>1</divisions><key><fifths>0</fifths></key></attributes>{body}</measure></part>",
                i + 1
            );
        }
        format!(
            "<?xml version=\"1.0\"?><score-partwise version=\"3.1\"><part-list>{}</part-list>{parts}</score-partwise>",
            PART_NAMES
                .iter()
                .enumerate()
                .map(|(i, n)| format!("<score-part id=\"P{}\"><part-name>{n}</part-name></score-part>", i + 1))
                .collect::<String>()
        )
    }

    #[test]
    fn one_bar_quarters() {
        let doc = satb_bar(["C5", "E4", "G3", "C3"], "");
        let c = parse_musicxml(doc.as_bytes()).unwrap();
        assert_eq!(c.len(), 16);
        assert!(validate(&c).is_empty());
        let c5: NoteToken = "C5".parse().unwrap();
        let h = NoteToken::Hold;
        assert_eq!(c.voices[0].tokens, [c5, h, h, h].repeat(4));
        assert_eq!(c.voices[3].tokens[0].to_string(), "C3");
    }

    #[test]
    fn bass_chord_is_voice_division() {
        let chord = "<note><chord/><pitch><step>G</step><octave>2</octave></pitch><duration>1</duration></note>";
        let doc = satb_bar(["C5", "E4", "G3", "C3"], chord);
        assert!(matches!(
            parse_musicxml(doc.as_bytes()),
            Err(IngestError::VoiceDivision { .. })
        ));
    }

    #[test]
    fn overlapping_voices_are_voice_division() {
        let second = "<backup><duration>1</duration></backup><note><pitch><step>G</step><octave>2</octave></pitch><duration>1</duration><voice>2</voice></note>";
        let doc = satb_bar(["C5", "E4", "G3", "C3"], second);
        assert!(matches!(
            parse_musicxml(doc.as_bytes()),
            Err(IngestError::VoiceDivision { .. })
        ));
    }

    #[test]
    fn thirty_second_is_unsupported() {
        // divisions = 8 per quarter makes duration 1 a thirty-second note
        let doc = satb_bar(["C5", "E4", "G3", "C3"], "")
            .replace("<divisions>1</divisions>", "<divisions>8</divisions>")
            .replace("<duration>1</duration>", "<duration>8</duration>")
            .replacen("<duration>8</duration>", "<duration>1</duration>", 1);
        assert!(matches!(
            parse_musicxml(doc.as_bytes()),
            Err(IngestError::UnsupportedSubdivision { .. })
        ));
    }

    #[test]
    fn not_four_voices() {
        let doc = satb_bar(["C5", "E4", "G3", "C3"], "");
        let three = doc.replacen("<part id=\"P4\">", "<ignored id=\"P4\">", 1).replacen("</part></score-partwise>", "</ignored></score-partwise>", 1);
        assert!(matches!(parse_musicxml(three.as_bytes()), Err(IngestError::NotFourVoices(3))));
        let organ = doc.replacen("<part-name>Bass</part-name>", "<part-name>Organ</part-name>", 1);
        assert!(matches!(parse_musicxml(organ.as_bytes()), Err(IngestError::NotFourVoices(3))));
        assert!(matches!(parse_musicxml(b"<score"), Err(IngestError::MalformedInput(_))));
    }

    #[test]
    fn grace_notes_rejected() {
        let grace = "<note><grace/><pitch><step>D</step><octave>3</octave></pitch><duration>1</duration></note>";
        let doc = satb_bar(["C5", "E4", "G3", "C3"], grace);
        assert!(matches!(parse_musicxml(doc.as_bytes()), Err(IngestError::UnsupportedElement(_))));
    }

    #[test]
    fn ties_rests_and_fermatas() {
        let tied = r#"<?xml version="1.0"?><score-partwise><part-list>
            <score-part id="P1"><part-name>S</part-name></score-part><score-part id="P2"><part-name>A</part-name></score-part>
            <score-part id="P3"><part-name>T</part-name></score-part><score-part id="P4"><part-name>B</part-name></score-part></part-list>
            <part id="P1"><measure number="1"><attributes><divisions>2</divisions></attributes>
                <note><pitch><step>F</step><alter>1</alter><octave>4</octave></pitch><duration>2</duration><tie type="start"/></note>
                <note><pitch><step>F</step><alter>1</alter><octave>4</octave></pitch><duration>1</duration><tie type="stop"/><notations><fermata/></notations></note>
                <note><rest/><duration>1</duration></note></measure></part>
            <part id="P2"><measure number="1"><attributes><divisions>2</divisions></attributes>
                <note><pitch><step>G</step><alter>-1</alter><octave>4</octave></pitch><duration>4</duration></note></measure></part>
            <part id="P3"><measure number="1"><attributes><divisions>2</divisions></attributes>
                <note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration></note></measure></part>
            <part id="P4"><measure number="1"><attributes><divisions>2</divisions></attributes>
                <note><pitch><step>C</step><octave>3</octave></pitch><duration>4</duration></note></measure></part>
            </score-partwise>"#;
        let c = parse_musicxml(tied.as_bytes()).unwrap();
        assert_eq!(c.len(), 8);
        let s: Vec<String> = c.voices[0].tokens.iter().map(|t| t.to_string()).collect();
        assert_eq!(s, ["F#4", "__", "__", "__", "__", "__", "__", "__"]);
        assert_eq!(c.metadata.fermata, [false, false, false, false, true, true, false, false]);
        assert_eq!(c.voices[1].tokens[0].to_string(), "Gb4");
        assert_eq!(c.voices[0].tokens[0].pitch().unwrap().midi(), c.voices[1].tokens[0].pitch().unwrap().midi());
    }

    #[test]
    fn export_roundtrip_with_awkward_metadata() {
        let tok = |s: &str| s.parse::<NoteToken>().unwrap();
        let h = NoteToken::Hold;
        let mut soprano = vec![tok("C5")];
        soprano.extend([h; 20]); // crosses a bar line, 21 ticks is not notatable in one piece
        soprano.extend([tok("D#5"), h, tok("Ebb5")]);
        let len = soprano.len();
        let alto: Vec<NoteToken> = (0..len).map(|i| if i % 5 == 0 { tok("E4") } else { h }).collect();
        let tenor: Vec<NoteToken> = (0..len).map(|i| if i % 3 == 0 { tok("G3") } else { h }).collect();
        let bass: Vec<NoteToken> = (0..len).map(|i| if i % 7 == 0 { tok("C3") } else { h }).collect();
        let mut fermata = vec![false; len];
        fermata[5..9].iter_mut().for_each(|f| *f = true);
        fermata[len - 1] = true;
        let mut keys = vec![0i8; len];
        keys[10..].iter_mut().for_each(|k| *k = -2);
        keys[17..].iter_mut().for_each(|k| *k = 3);
        let md = MetadataSeq::neutral(len).with_fermata(fermata).with_key_signature(keys);
        let c = Chorale::new(Encoding::Spelled, [soprano, alto, tenor, bass], md).unwrap();
        let xml = export_musicxml(&c);
        let back = parse_musicxml(&xml).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn midi_encoding_exports_with_key_spelling() {
        let tok = |s: &str| s.parse::<NoteToken>().unwrap();
        let c = Chorale::new(
            Encoding::Midi,
            [vec![tok("66")], vec![tok("62")], vec![tok("57")], vec![tok("50")]],
            MetadataSeq::neutral(1).with_key_signature(vec![-3]),
        )
        .unwrap();
        let back = parse_musicxml(&export_musicxml(&c)).unwrap();
        assert_eq!(back.voices[0].tokens[0].to_string(), "Gb4");
        assert_eq!(back.to_midi_encoding().unwrap().voices, c.voices);
    }

    #[test]
    fn melody_only() {
        let doc = satb_bar(["C5", "E4", "G3", "C3"], "");
        let (tokens, fermata, keys) = parse_melody(doc.as_bytes()).unwrap();
        assert_eq!(tokens.len(), 16);
        assert_eq!(fermata.len(), 16);
        assert_eq!(keys, vec![0; 16]);
    }
}

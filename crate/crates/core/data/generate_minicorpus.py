#!/usr/bin/env python3
"""Regenerates the bundled mini-corpus of four-part chorale-style exercises.

Each piece is four 4/4 bars: two phrases of eight beats, a half cadence (V)
then an authentic cadence (I), each closing on a fermata half note. Soprano
lines walk over chord tones, inner voices take the nearest chord tone, the bass
plays roots with occasional first inversions, and some steps of a third are
filled with eighth-note passing tones. Output is deterministic.

Usage: python3 generate_minicorpus.py OUTDIR
"""

import random
import sys
from pathlib import Path

LETTERS = "CDEFGAB"
LETTER_SEMITONES = [0, 2, 4, 5, 7, 9, 11]
SHARP_ORDER = "FCGDAEB"

# (tonic letter index, tonic alter, fifths)
KEYS = [
    (0, 0, 0),   # C
    (4, 0, 1),   # G
    (1, 0, 2),   # D
    (5, 0, 3),   # A
    (3, 0, -1),  # F
    (6, -1, -2), # Bb
    (2, -1, -3), # Eb
    (2, 0, 4),   # E
]

RANGES = {
    "S": (60, 79),
    "A": (55, 74),
    "T": (48, 67),
    "B": (40, 60),
}

CHORDS = {
    "I": (0, 2, 4),
    "ii": (1, 3, 5),
    "IV": (3, 5, 0),
    "V": (4, 6, 1),
    "vi": (5, 0, 2),
}

PHRASE_A = [
    ["I", "IV", "V", "I", "vi", "ii", "V"],
    ["I", "vi", "IV", "I", "ii", "I", "V"],
    ["I", "V", "vi", "IV", "I", "IV", "V"],
]
PHRASE_B = [
    ["I", "IV", "I", "vi", "ii", "V", "I"],
    ["vi", "IV", "V", "I", "IV", "V", "I"],
    ["I", "ii", "V", "vi", "IV", "V", "I"],
]


def alter_for(letter_idx, fifths):
    letter = LETTERS[letter_idx]
    if fifths > 0 and letter in SHARP_ORDER[:fifths]:
        return 1
    if fifths < 0 and letter in SHARP_ORDER[::-1][: -fifths]:
        return -1
    return 0


def degree_to_note(key, deg):
    """Absolute scale degree (0 = tonic in octave 4 region) -> (letter, alter, octave, midi)."""
    tonic_letter, _, fifths = key
    absolute = tonic_letter + deg + 4 * 7
    letter_idx = absolute % 7
    octave = absolute // 7
    alter = alter_for(letter_idx, fifths)
    midi = 12 * (octave + 1) + LETTER_SEMITONES[letter_idx] + alter
    return letter_idx, alter, octave, midi


def chord_degrees_in_range(key, chord, lo, hi):
    out = []
    for deg in range(-21, 22):
        if deg % 7 in CHORDS[chord]:
            midi = degree_to_note(key, deg)[3]
            if lo <= midi <= hi:
                out.append(deg)
    return out


def voice_chorale(key, progression, rng):
    """Returns per-voice lists of beats, each beat a list of (degree, ticks)."""
    voices = {v: [] for v in "SATB"}
    prev = {"S": None, "A": None, "T": None, "B": None}
    for beat, chord in enumerate(progression):
        # soprano
        cands = chord_degrees_in_range(key, chord, *RANGES["S"])
        cands = [d for d in cands if degree_to_note(key, d)[3] <= 76]
        if prev["S"] is None:
            s = min(cands, key=lambda d: abs(degree_to_note(key, d)[3] - 69))
        else:
            near = sorted(cands, key=lambda d: abs(d - prev["S"]))[:3]
            s = rng.choice(near)
        # bass
        root = CHORDS[chord][0]
        bass_tones = [root]
        if chord in ("I", "V", "IV") and rng.random() < 0.25 and beat % 7 != 6:
            bass_tones = [CHORDS[chord][1]]
        cands = [d for d in chord_degrees_in_range(key, chord, *RANGES["B"]) if d % 7 in bass_tones]
        anchor = prev["B"] if prev["B"] is not None else -7
        b = min(cands, key=lambda d: (abs(d - anchor), d))
        # alto and tenor below the soprano, above the bass
        s_midi = degree_to_note(key, s)[3]
        b_midi = degree_to_note(key, b)[3]
        a_cands = [d for d in chord_degrees_in_range(key, chord, *RANGES["A"])
                   if b_midi < degree_to_note(key, d)[3] < s_midi]
        if not a_cands:
            a_cands = [d for d in chord_degrees_in_range(key, chord, *RANGES["A"])
                       if degree_to_note(key, d)[3] <= s_midi]
        anchor = prev["A"] if prev["A"] is not None else s - 3
        a = min(a_cands, key=lambda d: (abs(d - anchor), -d))
        a_midi = degree_to_note(key, a)[3]
        t_cands = [d for d in chord_degrees_in_range(key, chord, *RANGES["T"])
                   if b_midi <= degree_to_note(key, d)[3] <= a_midi]
        if not t_cands:
            t_cands = chord_degrees_in_range(key, chord, *RANGES["T"])
        anchor = prev["T"] if prev["T"] is not None else a - 3
        t = min(t_cands, key=lambda d: (abs(d - anchor), -d))
        for v, d in zip("SATB", (s, a, t, b)):
            voices[v].append(d)
            prev[v] = d
    return voices


def rhythmize(degrees, rng, allow_passing, cadence_beats):
    """Turns one degree per beat into notes [(degree, ticks, fermata)]."""
    notes = []
    i = 0
    n = len(degrees)
    while i < n:
        d = degrees[i]
        if i in cadence_beats:
            notes.append((d, 8, True))
            i += 1
            continue
        nxt = degrees[i + 1] if i + 1 < n else None
        if (allow_passing and nxt is not None and i + 1 not in cadence_beats
                and abs(nxt - d) == 2 and rng.random() < 0.5):
            notes.append((d, 2, False))
            notes.append(((d + nxt) // 2, 2, False))
        elif rng.random() < 0.08:
            notes.append((d, 3, False))
            notes.append((d, 1, False))
        else:
            notes.append((d, 4, False))
        i += 1
    return notes


NOTE_TYPES = {1: ("16th", 0), 2: ("eighth", 0), 3: ("eighth", 1), 4: ("quarter", 0),
              6: ("quarter", 1), 8: ("half", 0), 12: ("half", 1), 16: ("whole", 0)}


def note_xml(key, deg, ticks, fermata):
    letter_idx, alter, octave, _ = degree_to_note(key, deg)
    kind, dots = NOTE_TYPES[ticks]
    lines = ["      <note>", "        <pitch>", f"          <step>{LETTERS[letter_idx]}</step>"]
    if alter:
        lines.append(f"          <alter>{alter}</alter>")
    lines += [f"          <octave>{octave}</octave>", "        </pitch>",
              f"        <duration>{ticks}</duration>", "        <voice>1</voice>",
              f"        <type>{kind}</type>"]
    lines += ["        <dot/>"] * dots
    if fermata:
        lines += ["        <notations>", "          <fermata type=\"upright\"/>", "        </notations>"]
    lines.append("      </note>")
    return "\n".join(lines)


def part_xml(pid, key, notes):
    out = [f"  <part id=\"{pid}\">"]
    bar = 1
    pos = 0
    out.append(f"    <measure number=\"{bar}\">")
    out.append("      <attributes>\n        <divisions>4</divisions>\n"
               f"        <key>\n          <fifths>{key[2]}</fifths>\n        </key>\n"
               "        <time>\n          <beats>4</beats>\n          <beat-type>4</beat-type>\n        </time>\n"
               "      </attributes>")
    for deg, ticks, fermata in notes:
        if pos == 16:
            out.append("    </measure>")
            bar += 1
            pos = 0
            out.append(f"    <measure number=\"{bar}\">")
        out.append(note_xml(key, deg, ticks, fermata))
        pos += ticks
    out.append("    </measure>")
    out.append("  </part>")
    return "\n".join(out)


def chorale_xml(title, key, voices, rng):
    cadences = {6, 13}
    parts = []
    names = {"S": "Soprano", "A": "Alto", "T": "Tenor", "B": "Bass"}
    header = ["<?xml version=\"1.0\" encoding=\"UTF-8\"?>",
              "<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" "
              "\"http://www.musicxml.org/dtds/partwise.dtd\">",
              "<score-partwise version=\"3.1\">",
              f"  <work>\n    <work-title>{title}</work-title>\n  </work>",
              "  <part-list>"]
    for i, v in enumerate("SATB"):
        header.append(f"    <score-part id=\"P{i + 1}\">\n      <part-name>{names[v]}</part-name>\n    </score-part>")
    header.append("  </part-list>")
    for i, v in enumerate("SATB"):
        notes = rhythmize(voices[v], rng, allow_passing=v in "AB", cadence_beats=cadences)
        assert sum(t for _, t, _ in notes) == 64, (title, v)
        parts.append(part_xml(f"P{i + 1}", key, notes))
    return "\n".join(header + parts + ["</score-partwise>", ""])


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "minicorpus")
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20170101)
    count = 0
    for k, key in enumerate(KEYS):
        for variant in range(3):
            a = PHRASE_A[(k + variant) % 3]
            b = PHRASE_B[(2 * k + variant) % 3]
            # each phrase is 7 chords; the cadence chord lasts two beats
            progression = a + b
            voices = voice_chorale(key, progression, rng)
            count += 1
            name = f"exercise_{count:02d}"
            (out / f"{name}.musicxml").write_text(chorale_xml(name, key, voices, rng))
    print(f"wrote {count} pieces to {out}")


if __name__ == "__main__":
    main()

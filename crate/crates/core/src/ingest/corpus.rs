use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::musicxml::{parse_musicxml_with, KeySource, ParseOptions};
use super::IngestError;
use crate::score::{transpose_by_semitones, Chorale, Encoding, Interval, Vocabularies, Voice};

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const MANIFEST_HEADER: &str = "# chorale-corpus-manifest v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub source_id: String,
    pub transposition: Interval,
    pub split: Split,
    pub chorale: Chorale,
}

impl CorpusEntry {
    pub fn is_original(&self) -> bool {
        self.transposition.semitones == 0
    }
}

/// Chorales with provenance, kept sorted by (source id, semitone shift).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub encoding: Encoding,
    pub entries: Vec<CorpusEntry>,
}

/// Inclusive MIDI range per voice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocalRanges(pub [(i32, i32); 4]);

impl VocalRanges {
    /// Ranges of the untransposed entries.
    pub fn from_corpus(corpus: &Corpus) -> Option<Self> {
        let mut r = [(i32::MAX, i32::MIN); 4];
        for e in corpus.entries.iter().filter(|e| e.is_original()) {
            for (v, p) in e.chorale.pitches() {
                let m = p.midi();
                let (lo, hi) = &mut r[v.index()];
                *lo = (*lo).min(m);
                *hi = (*hi).max(m);
            }
        }
        r.iter().all(|(lo, hi)| lo <= hi).then_some(VocalRanges(r))
    }

    pub fn voice(&self, voice: Voice) -> (i32, i32) {
        self.0[voice.index()]
    }

    pub fn fits(&self, chorale: &Chorale) -> bool {
        chorale.pitches().all(|(v, p)| {
            let (lo, hi) = self.voice(v);
            (lo..=hi).contains(&p.midi())
        })
    }
}

/// Source and augmented counts plus per-voice distinct pitch counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub sources: usize,
    pub chorales: usize,
    pub train: usize,
    pub validation: usize,
    pub pitch_counts: [usize; 4],
}

impl Corpus {
    /// Untransposed corpus, all in the training split; sorted by source id.
    pub fn from_sources(encoding: Encoding, sources: impl IntoIterator<Item = (String, Chorale)>) -> Self {
        let mut entries: Vec<CorpusEntry> = sources
            .into_iter()
            .map(|(source_id, chorale)| CorpusEntry {
                source_id,
                transposition: Interval::UNISON,
                split: Split::Train,
                chorale,
            })
            .collect();
        entries.sort_by(|a, b| a.source_id.cmp(&b.source_id));
        Corpus { encoding, entries }
    }

    /// Parses every `.musicxml`/`.xml` file in `dir` (estimated key
    /// signatures), in file-name order. Files that parse but are rejected by
    /// the filters are returned separately, not treated as errors.
    pub fn load_dir(dir: &Path) -> Result<(Corpus, Vec<(String, IngestError)>), IngestError> {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| IngestError::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("musicxml" | "xml")))
            .collect();
        files.sort();
        let options = ParseOptions {
            key_source: KeySource::Estimated,
        };
        let parsed: Vec<(String, Result<Chorale, IngestError>)> = files
            .par_iter()
            .map(|p| {
                let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let result = std::fs::read(p)
                    .map_err(|e| IngestError::io(p, e))
                    .and_then(|bytes| parse_musicxml_with(&bytes, options));
                (id, result)
            })
            .collect();
        let mut kept = Vec::new();
        let mut rejected = Vec::new();
        for (id, r) in parsed {
            match r {
                Ok(c) => kept.push((id, c)),
                Err(e @ IngestError::Io { .. }) => return Err(e),
                Err(e) => rejected.push((id, e)),
            }
        }
        Ok((Corpus::from_sources(Encoding::Spelled, kept), rejected))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source_ids(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.source_id.as_str()).collect()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &CorpusEntry> + '_ {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Reassigns splits by source (see [`split_sources`]).
    pub fn with_split(mut self, seed: u64, train_fraction: f64) -> Self {
        let ids: Vec<String> = self.source_ids().into_iter().map(str::to_owned).collect();
        let assignment = split_sources(&ids, seed, train_fraction);
        for e in &mut self.entries {
            e.split = assignment[&e.source_id];
        }
        self
    }

    /// Vocabularies over every entry, both splits.
    pub fn vocabularies(&self) -> Result<Vocabularies, IngestError> {
        Ok(Vocabularies::from_chorales(self.encoding, self.entries.iter().map(|e| &e.chorale))?)
    }

    pub fn to_midi_encoding(&self) -> Result<Corpus, IngestError> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                Ok(CorpusEntry {
                    chorale: e.chorale.to_midi_encoding()?,
                    ..e.clone()
                })
            })
            .collect::<Result<_, IngestError>>()?;
        Ok(Corpus {
            encoding: Encoding::Midi,
            entries,
        })
    }

    pub fn stats(&self) -> CorpusStats {
        let pitch_counts = self
            .vocabularies()
            .map(|v| v.voices.each_ref().map(|v| v.pitch_count()))
            .unwrap_or_default();
        CorpusStats {
            sources: self.source_ids().len(),
            chorales: self.len(),
            train: self.split(Split::Train).count(),
            validation: self.split(Split::Validation).count(),
            pitch_counts,
        }
    }

    /// Writes one JSON file per entry plus the manifest.
    pub fn write_dir(&self, dir: &Path) -> Result<(), IngestError> {
        std::fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
        let mut records = Vec::with_capacity(self.len());
        for (i, e) in self.entries.iter().enumerate() {
            let file = format!("{i:05}.json");
            let path = dir.join(&file);
            let json = serde_json::to_vec(&e.chorale).expect("chorales always serialize");
            std::fs::write(&path, json).map_err(|err| IngestError::io(&path, err))?;
            records.push(ManifestRecord {
                source_id: e.source_id.clone(),
                transposition: e.transposition,
                split: e.split,
                file,
            });
        }
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, write_manifest(&records)?).map_err(|e| IngestError::io(&path, e))
    }

    pub fn read_dir(dir: &Path) -> Result<Corpus, IngestError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| IngestError::io(&path, e))?;
        let records = read_manifest(&text)?;
        let mut entries = Vec::with_capacity(records.len());
        for (n, r) in records.into_iter().enumerate() {
            let path = dir.join(&r.file);
            let bytes = std::fs::read(&path).map_err(|e| IngestError::io(&path, e))?;
            let chorale: Chorale = serde_json::from_slice(&bytes).map_err(|e| IngestError::Manifest {
                line: n + 2,
                message: format!("{}: {e}", r.file),
            })?;
            let violations = crate::score::validate(&chorale);
            if !violations.is_empty() {
                return Err(crate::score::ScoreError::Invalid(violations).into());
            }
            entries.push(CorpusEntry {
                source_id: r.source_id,
                transposition: r.transposition,
                split: r.split,
                chorale,
            });
        }
        let encoding = entries.first().map_or(Encoding::Spelled, |e| e.chorale.encoding);
        if let Some(e) = entries.iter().find(|e| e.chorale.encoding != encoding) {
            return Err(crate::score::ScoreError::EncodingMismatch {
                expected: encoding,
                found: e.chorale.encoding,
            }
            .into());
        }
        Ok(Corpus { encoding, entries })
    }
}

/// Every semitone transposition of each untransposed entry that keeps all
/// voices inside `ranges`. The sweep walks away from 0 in each direction and
/// stops at the first shift that leaves the ranges or cannot be spelled.
/// Transposed entries inherit their source's split.
pub fn augment(corpus: &Corpus, ranges: &VocalRanges) -> Corpus {
    let mut entries: Vec<CorpusEntry> = corpus
        .entries
        .par_iter()
        .filter(|e| e.is_original())
        .flat_map_iter(|e| {
            let mut out = Vec::new();
            let mut push = |c: Chorale, iv: Interval| {
                out.push(CorpusEntry {
                    source_id: e.source_id.clone(),
                    transposition: iv,
                    split: e.split,
                    chorale: c,
                })
            };
            if ranges.fits(&e.chorale) {
                push(e.chorale.clone(), Interval::UNISON);
            }
            for dir in [-1, 1] {
                for k in 1.. {
                    match transpose_by_semitones(&e.chorale, dir * k) {
                        Ok((c, iv)) if ranges.fits(&c) => push(c, iv),
                        _ => break,
                    }
                }
            }
            out
        })
        .collect();
    entries.sort_by(|a, b| {
        (a.source_id.as_str(), a.transposition.semitones).cmp(&(b.source_id.as_str(), b.transposition.semitones))
    });
    Corpus {
        encoding: corpus.encoding,
        entries,
    }
}

/// Deterministic split of source ids: sort, shuffle with the seeded RNG and
/// put the first `round(fraction · n)` into training.
pub fn split_sources(ids: &[String], seed: u64, train_fraction: f64) -> BTreeMap<String, Split> {
    let mut sorted: Vec<&String> = ids.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let mut rng = crate::rng_from_seed(seed);
    sorted.shuffle(&mut rng);
    let n_train = (train_fraction * sorted.len() as f64).round() as usize;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), if i < n_train { Split::Train } else { Split::Validation }))
        .collect()
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub source_id: String,
    pub transposition: Interval,
    pub split: Split,
    pub file: String,
}

/// Tab-separated text: the header line, then
/// `source_id<TAB>transposition<TAB>split<TAB>file` per record, with the
/// transposition written as `+steps:+semitones`. Lines starting with `#`
/// after the header are comments.
pub fn write_manifest(records: &[ManifestRecord]) -> Result<String, IngestError> {
    let mut out = format!("{MANIFEST_HEADER}\n# source_id\ttransposition\tsplit\tfile\n");
    for (i, r) in records.iter().enumerate() {
        for field in [&r.source_id, &r.file] {
            if field.is_empty() || field.contains(['\t', '\n', '\r']) || field.starts_with('#') {
                return Err(IngestError::Manifest {
                    line: i + 3,
                    message: format!("field {field:?} cannot be written"),
                });
            }
        }
        out.push_str(&format!("{}\t{}\t{}\t{}\n", r.source_id, r.transposition, r.split, r.file));
    }
    Ok(out)
}

pub fn read_manifest(text: &str) -> Result<Vec<ManifestRecord>, IngestError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == MANIFEST_HEADER => {}
        _ => {
            return Err(IngestError::Manifest {
                line: 1,
                message: format!("expected header {MANIFEST_HEADER:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let err = |message: String| IngestError::Manifest { line: i + 1, message };
        let fields: Vec<&str> = line.split('\t').collect();
        let [source_id, transposition, split, file] = fields[..] else {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        };
        out.push(ManifestRecord {
            source_id: source_id.to_owned(),
            transposition: transposition.parse().map_err(|e| err(format!("{e}")))?,
            split: split.parse().map_err(err)?,
            file: file.to_owned(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{validate, MetadataSeq, NoteToken};
    use proptest::prelude::*;

    fn tok(s: &str) -> NoteToken {
        s.parse().unwrap()
    }

    fn chorale(voices: [&[&str]; 4]) -> Chorale {
        let len = voices[0].len();
        let v = voices.map(|v| v.iter().map(|s| tok(s)).collect::<Vec<_>>());
        Chorale::new(Encoding::Spelled, v, MetadataSeq::neutral(len)).unwrap()
    }

    fn fixture() -> Chorale {
        chorale([
            &["E4", "__", "G4", "C5"],
            &["C4", "__", "D4", "E4"],
            &["G3", "__", "B3", "G3"],
            &["C3", "__", "G2", "C3"],
        ])
    }

    /// Brute force: every k in a wide window whose plain MIDI shift keeps
    /// each voice inside its range, restricted to the run containing 0.
    fn oracle_shifts(c: &Chorale, ranges: &VocalRanges) -> Vec<i32> {
        let ok = |k: i32| {
            c.pitches().all(|(v, p)| {
                let (lo, hi) = ranges.voice(v);
                (lo..=hi).contains(&(p.midi() + k))
            })
        };
        let mut lo = 0;
        while ok(lo - 1) {
            lo -= 1;
        }
        let mut hi = 0;
        while ok(hi + 1) {
            hi += 1;
        }
        (lo..=hi).collect()
    }

    #[test]
    fn third_inside_every_boundary_gives_nine() {
        let c = fixture();
        // pitch extremes per voice, widened by a major third on both sides
        let mut r = [(0, 0); 4];
        for v in Voice::ALL {
            let m: Vec<i32> = c.voice(v).notes().iter().map(|n| n.1.midi()).collect();
            r[v.index()] = (m.iter().min().unwrap() - 4, m.iter().max().unwrap() + 4);
        }
        let ranges = VocalRanges(r);
        let corpus = Corpus::from_sources(Encoding::Spelled, [("a".to_string(), c.clone())]);
        let out = augment(&corpus, &ranges);
        let ks: Vec<i32> = out.entries.iter().map(|e| e.transposition.semitones).collect();
        assert_eq!(ks, oracle_shifts(&c, &ranges));
        assert_eq!(ks, (-4..=4).collect::<Vec<_>>());
        for e in &out.entries {
            assert!(validate(&e.chorale).is_empty());
            assert!(ranges.fits(&e.chorale));
            assert_eq!(e.source_id, "a");
        }
    }

    #[test]
    fn full_range_chorale_only_keeps_original() {
        let c = fixture();
        let corpus = Corpus::from_sources(Encoding::Spelled, [("a".to_string(), c)]);
        let ranges = VocalRanges::from_corpus(&corpus).unwrap();
        let out = augment(&corpus, &ranges);
        assert_eq!(out.len(), 1);
        assert_eq!(out.entries[0].transposition, Interval::UNISON);
    }

    #[test]
    fn augmentation_is_idempotent_in_count() {
        let a = fixture();
        let b = chorale([
            &["D4", "E4", "F4", "__"],
            &["B3", "C4", "C4", "__"],
            &["G3", "G3", "A3", "__"],
            &["G2", "C3", "F2", "__"],
        ]);
        let corpus = Corpus::from_sources(Encoding::Spelled, [("a".into(), a), ("b".into(), b)]);
        let ranges = VocalRanges(VocalRanges::from_corpus(&corpus).unwrap().0.map(|(lo, hi)| (lo - 2, hi + 3)));
        let once = augment(&corpus, &ranges);
        assert!(once.len() > 2);
        let again = augment(&once, &ranges);
        assert_eq!(again.len(), once.len());
        assert_eq!(again, once);
    }

    #[test]
    fn split_is_stable_and_fraction_holds() {
        let ids: Vec<String> = (0..23).map(|i| format!("s{i:02}")).collect();
        let a = split_sources(&ids, 7, 0.8);
        let b = split_sources(&ids, 7, 0.8);
        assert_eq!(a, b);
        let train = a.values().filter(|s| **s == Split::Train).count();
        assert_eq!(train, 18);
        let c = split_sources(&ids, 8, 0.8);
        assert_ne!(a, c);
    }

    #[test]
    fn transpositions_share_source_split() {
        let c = fixture();
        let mut r = [(0, 127); 4];
        r[3] = (36, 60);
        let sources = (0..10).map(|i| (format!("s{i}"), c.clone()));
        let corpus = Corpus::from_sources(Encoding::Spelled, sources).with_split(3, 0.8);
        let out = augment(&corpus, &VocalRanges(r));
        for e in &out.entries {
            let orig = corpus.entries.iter().find(|o| o.source_id == e.source_id).unwrap();
            assert_eq!(e.split, orig.split);
        }
        assert_eq!(out.stats().train + out.stats().validation, out.len());
    }

    #[test]
    fn manifest_round_trip_and_errors() {
        let records = vec![
            ManifestRecord {
                source_id: "bwv253".into(),
                transposition: Interval::new(-1, -2),
                split: Split::Validation,
                file: "00000.json".into(),
            },
            ManifestRecord {
                source_id: "bwv254".into(),
                transposition: Interval::UNISON,
                split: Split::Train,
                file: "00001.json".into(),
            },
        ];
        let text = write_manifest(&records).unwrap();
        assert!(text.starts_with(MANIFEST_HEADER));
        assert!(text.contains("bwv253\t-1:-2\tvalidation\t00000.json\n"));
        assert_eq!(read_manifest(&text).unwrap(), records);
        assert!(matches!(read_manifest("bwv\t+0:+0\ttrain\tx"), Err(IngestError::Manifest { line: 1, .. })));
        let bad = format!("{MANIFEST_HEADER}\nbwv\t+0:+0\ttest\tx\n");
        assert!(matches!(read_manifest(&bad), Err(IngestError::Manifest { line: 2, .. })));
        let mut tabbed = records.clone();
        tabbed[0].source_id = "a\tb".into();
        assert!(write_manifest(&tabbed).is_err());
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::from_sources(Encoding::Spelled, [("x".into(), fixture())]);
        let mut r = VocalRanges::from_corpus(&corpus).unwrap().0;
        r[3].0 -= 2;
        let out = augment(&corpus, &VocalRanges(r)).with_split(1, 0.8);
        out.write_dir(dir.path()).unwrap();
        assert_eq!(Corpus::read_dir(dir.path()).unwrap(), out);
    }

    proptest! {
        #[test]
        fn augmented_count_matches_oracle(lo in proptest::array::uniform4(0i32..6), hi in proptest::array::uniform4(0i32..6)) {
            let c = fixture();
            let mut r = [(0, 0); 4];
            for v in Voice::ALL {
                let m: Vec<i32> = c.voice(v).notes().iter().map(|n| n.1.midi()).collect();
                let i = v.index();
                r[i] = (m.iter().min().unwrap() - lo[i], m.iter().max().unwrap() + hi[i]);
            }
            let ranges = VocalRanges(r);
            let corpus = Corpus::from_sources(Encoding::Spelled, [("a".to_string(), c.clone())]);
            let out = augment(&corpus, &ranges);
            let ks: Vec<i32> = out.entries.iter().map(|e| e.transposition.semitones).collect();
            prop_assert_eq!(ks, oracle_shifts(&c, &ranges));
            for e in &out.entries {
                prop_assert!(validate(&e.chorale).is_empty());
            }
        }
    }
}

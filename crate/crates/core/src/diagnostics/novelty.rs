use std::collections::HashMap;

use serde::Serialize;

use super::DiagnosticsError;
use crate::ingest::Corpus;
use crate::score::{Chorale, Interval, NoteToken, Voice};

/// Where a longest match was found; ticks are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MatchSource {
    pub source_id: String,
    pub transposition: Interval,
    pub entry: usize,
    pub generated_start: usize,
    pub corpus_start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VoiceNovelty {
    pub voice: Voice,
    pub longest: usize,
    pub source: Option<MatchSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NoveltyReport {
    pub length: usize,
    pub voices: Vec<VoiceNovelty>,
}

/// Suffix automaton of one sequence.
struct Automaton {
    next: Vec<HashMap<NoteToken, usize>>,
    link: Vec<Option<usize>>,
    len: Vec<usize>,
    /// End position (0-based, inclusive) of the first occurrence.
    first_end: Vec<usize>,
}

impl Automaton {
    fn new(seq: &[NoteToken]) -> Self {
        let mut a = Automaton {
            next: vec![HashMap::new()],
            link: vec![None],
            len: vec![0],
            first_end: vec![0],
        };
        let mut last = 0;
        for (i, &tok) in seq.iter().enumerate() {
            let cur = a.push(a.len[last] + 1, i);
            let mut p = Some(last);
            while let Some(q) = p {
                if a.next[q].contains_key(&tok) {
                    break;
                }
                a.next[q].insert(tok, cur);
                p = a.link[q];
            }
            match p {
                None => a.link[cur] = Some(0),
                Some(p) => {
                    let q = a.next[p][&tok];
                    if a.len[p] + 1 == a.len[q] {
                        a.link[cur] = Some(q);
                    } else {
                        let clone = a.push(a.len[p] + 1, a.first_end[q]);
                        a.next[clone] = a.next[q].clone();
                        a.link[clone] = a.link[q];
                        let mut r = Some(p);
                        while let Some(x) = r {
                            if a.next[x].get(&tok) != Some(&q) {
                                break;
                            }
                            a.next[x].insert(tok, clone);
                            r = a.link[x];
                        }
                        a.link[q] = Some(clone);
                        a.link[cur] = Some(clone);
                    }
                }
            }
            last = cur;
        }
        a
    }

    fn push(&mut self, len: usize, end: usize) -> usize {
        self.next.push(HashMap::new());
        self.link.push(None);
        self.len.push(len);
        self.first_end.push(end);
        self.len.len() - 1
    }

    /// Longest common substring with `text`: `(length, end in self, end in text)`,
    /// first occurrence in `text` on ties.
    fn longest_common(&self, text: &[NoteToken]) -> (usize, usize, usize) {
        let (mut state, mut l) = (0, 0);
        let mut best = (0, 0, 0);
        for (j, tok) in text.iter().enumerate() {
            while state != 0 && !self.next[state].contains_key(tok) {
                state = self.link[state].unwrap_or(0);
                l = self.len[state];
            }
            if let Some(&s) = self.next[state].get(tok) {
                state = s;
                l += 1;
            }
            if l > best.0 {
                best = (l, self.first_end[state], j);
            }
        }
        best
    }
}

/// Per voice, the longest run of consecutive ticks of `generated` that
/// occurs verbatim in the same voice of some corpus entry. Ties go to the
/// earliest entry, then the earliest corpus position.
pub fn novelty_report(generated: &Chorale, corpus: &Corpus) -> Result<NoveltyReport, DiagnosticsError> {
    if generated.encoding != corpus.encoding {
        return Err(DiagnosticsError::EncodingMismatch {
            generated: generated.encoding,
            corpus: corpus.encoding,
        });
    }
    let voices = Voice::ALL
        .iter()
        .map(|&voice| {
            let g = &generated.voice(voice).tokens;
            let sam = Automaton::new(g);
            let mut out = VoiceNovelty {
                voice,
                longest: 0,
                source: None,
            };
            for (i, e) in corpus.entries.iter().enumerate() {
                let (l, g_end, c_end) = sam.longest_common(&e.chorale.voice(voice).tokens);
                if l > out.longest {
                    out.longest = l;
                    out.source = Some(MatchSource {
                        source_id: e.source_id.clone(),
                        transposition: e.transposition,
                        entry: i,
                        generated_start: g_end + 2 - l,
                        corpus_start: c_end + 2 - l,
                    });
                }
            }
            out
        })
        .collect();
    Ok(NoveltyReport {
        length: generated.len(),
        voices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{CorpusEntry, Split};
    use crate::score::{Encoding, MetadataSeq};
    use proptest::prelude::*;

    /// All-pairs substring oracle; returns the length only.
    fn brute(a: &[NoteToken], b: &[NoteToken]) -> usize {
        let mut best = 0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                let l = a[i..].iter().zip(&b[j..]).take_while(|(x, y)| x == y).count();
                best = best.max(l);
            }
        }
        best
    }

    fn alphabet() -> Vec<NoteToken> {
        ["C4", "D4", "E4", "__"].iter().map(|s| s.parse().unwrap()).collect()
    }

    fn chorale(seed: &[usize]) -> Chorale {
        let a = alphabet();
        let mut tokens: Vec<NoteToken> = seed.iter().map(|&i| a[i % a.len()]).collect();
        tokens[0] = a[0];
        Chorale::new_unchecked(Encoding::Spelled, [0, 1, 2, 3].map(|_| tokens.clone()), MetadataSeq::neutral(tokens.len()))
    }

    fn corpus(chorales: Vec<Chorale>) -> Corpus {
        Corpus {
            encoding: Encoding::Spelled,
            entries: chorales
                .into_iter()
                .enumerate()
                .map(|(i, chorale)| CorpusEntry {
                    source_id: format!("src{i}"),
                    transposition: Interval::UNISON,
                    split: Split::Train,
                    chorale,
                })
                .collect(),
        }
    }

    #[test]
    fn verbatim_copy_and_disjoint_tokens() {
        let c = chorale(&[0, 1, 3, 2, 0, 1, 3, 3]);
        let r = novelty_report(&c, &corpus(vec![chorale(&[2, 2]), c.clone()])).unwrap();
        assert!(r.voices.iter().all(|v| v.longest == 8 && v.source.as_ref().unwrap().source_id == "src1"));
        let f: NoteToken = "F5".parse().unwrap();
        let odd = Chorale::new_unchecked(Encoding::Spelled, [0, 1, 2, 3].map(|_| vec![f; 8]), MetadataSeq::neutral(8));
        let r = novelty_report(&odd, &corpus(vec![c])).unwrap();
        assert!(r.voices.iter().all(|v| v.longest == 0 && v.source.is_none()));
    }

    #[test]
    fn shared_phrase_reports_its_source_and_position() {
        // generated: 0 3 | 1 2 1 1 2 2 1 2 | 3 0 ; the phrase sits at ticks 3..=10
        let phrase = [1, 2, 1, 1, 2, 2, 1, 2];
        let mut g = vec![0, 3];
        g.extend(phrase);
        g.extend([3, 0]);
        let mut hit = vec![0, 0, 0, 0, 0];
        hit.extend(phrase);
        let r = novelty_report(&chorale(&g), &corpus(vec![chorale(&[0, 0, 0, 0]), chorale(&hit)])).unwrap();
        let v = &r.voices[0];
        assert_eq!(v.longest, 8);
        let s = v.source.as_ref().unwrap();
        assert_eq!((s.source_id.as_str(), s.generated_start, s.corpus_start), ("src1", 3, 6));
    }

    #[test]
    fn encodings_must_match() {
        let c = chorale(&[0, 1]);
        let mut k = corpus(vec![c.clone()]);
        k.encoding = Encoding::Midi;
        assert!(matches!(novelty_report(&c, &k), Err(DiagnosticsError::EncodingMismatch { .. })));
    }

    proptest! {
        #[test]
        fn automaton_matches_brute_force(
            g in proptest::collection::vec(0usize..4, 1..40),
            docs in proptest::collection::vec(proptest::collection::vec(0usize..4, 1..40), 1..4),
        ) {
            let gen = chorale(&g);
            let corp = corpus(docs.iter().map(|d| chorale(d)).collect());
            let r = novelty_report(&gen, &corp).unwrap();
            let a = &gen.voices[0].tokens;
            let expected = corp.entries.iter().map(|e| brute(a, &e.chorale.voices[0].tokens)).max().unwrap();
            prop_assert_eq!(r.voices[0].longest, expected);
            if let Some(s) = &r.voices[0].source {
                let b = &corp.entries[s.entry].chorale.voices[0].tokens;
                let l = r.voices[0].longest;
                prop_assert_eq!(&a[s.generated_start - 1..s.generated_start - 1 + l], &b[s.corpus_start - 1..s.corpus_start - 1 + l]);
            }
        }
    }
}

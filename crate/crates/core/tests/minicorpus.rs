mod common;

use std::collections::BTreeSet;

use chorale::ingest::{export_musicxml, parse_musicxml, Corpus, Split};
use chorale::score::validate;
use common::{augmented_corpus, fixture_paths};

#[test]
fn every_fixture_round_trips_token_identically() {
    let paths = fixture_paths();
    assert_eq!(paths.len(), 24);
    for p in paths {
        let original = parse_musicxml(&std::fs::read(&p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(validate(&original).is_empty(), "{}", p.display());
        let xml = export_musicxml(&original);
        let back = parse_musicxml(&xml).unwrap();
        assert_eq!(back, original, "{}", p.display());
        assert_eq!(export_musicxml(&back), xml, "{}", p.display());
    }
}

#[test]
fn augmentation_keeps_sources_on_one_side_of_the_split() {
    let corpus = augmented_corpus();
    let stats = corpus.stats();
    assert_eq!(stats.sources, 24);
    assert!(stats.chorales > 2 * stats.sources, "{stats:?}");
    assert_eq!(stats.train + stats.validation, stats.chorales);
    let train: BTreeSet<&str> = corpus.split(Split::Train).map(|e| e.source_id.as_str()).collect();
    let validation: BTreeSet<&str> = corpus.split(Split::Validation).map(|e| e.source_id.as_str()).collect();
    assert!(train.is_disjoint(&validation));
    assert!(!validation.is_empty());
    for e in &corpus.entries {
        assert!(validate(&e.chorale).is_empty(), "{} {:?}", e.source_id, e.transposition);
    }
}

#[test]
fn written_corpus_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = augmented_corpus();
    corpus.write_dir(dir.path()).unwrap();
    let back = Corpus::read_dir(dir.path()).unwrap();
    assert_eq!(&back, corpus);
}

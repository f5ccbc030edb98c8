#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chorale::ingest::{augment, Corpus, VocalRanges};
use chorale::models::{train, Hyperparameters, ModelKind, ModelSet};

pub fn minicorpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/minicorpus")
}

pub fn fixture_paths() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(minicorpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "musicxml"))
        .collect();
    v.sort();
    v
}

pub fn augmented_corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let (corpus, rejected) = Corpus::load_dir(&minicorpus_dir()).unwrap();
        assert!(rejected.is_empty());
        let corpus = corpus.with_split(0, 0.8);
        let ranges = VocalRanges::from_corpus(&corpus).unwrap();
        augment(&corpus, &ranges)
    })
}

/// A quickly trained MaxEnt model with a short context.
pub fn small_model() -> &'static ModelSet {
    static MODEL: OnceLock<ModelSet> = OnceLock::new();
    MODEL.get_or_init(|| {
        let mut hp = Hyperparameters::defaults_for(ModelKind::MaxEnt);
        hp.epochs = 2;
        train(ModelKind::MaxEnt, augmented_corpus(), 4, &hp).unwrap().0
    })
}

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use super::gibbs::{init_grid, run, RunStats, SamplerConfig};
use super::{CellConstraints, Conditional, Grid, SamplerError};
use crate::models::{ModelSet, Scratch, SparseFeatures};
use crate::score::{Chorale, MetadataSeq, NoteToken, Vocabularies, Voice, HOLD_INDEX};

/// [`ModelSet`] predictions over a grid with fixed metadata.
pub struct ChoraleConditional<'a> {
    pub models: &'a ModelSet,
    pub metadata: &'a MetadataSeq,
}

thread_local! {
    static BUFFERS: RefCell<(SparseFeatures, Scratch)> =
        RefCell::new((SparseFeatures { dim: 0, active: Vec::new() }, Scratch::default()));
}

impl Conditional for ChoraleConditional<'_> {
    fn voices(&self) -> usize {
        4
    }

    fn vocab_size(&self, voice: usize) -> usize {
        self.models.vocabs.voices[voice].len()
    }

    fn distribution(&self, grid: &Grid, voice: usize, t: usize, out: &mut [f64]) {
        BUFFERS.with(|b| {
            let (features, scratch) = &mut *b.borrow_mut();
            self.models
                .predict_cell(voice, t, grid.len(), self.metadata, |v, tau| grid.get(v, tau), features, scratch, out);
        });
    }
}

/// User constraints on a chorale, ticks 1-based: allowed token sets for some
/// cells and cells that keep their current value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    pub allowed: BTreeMap<(Voice, usize), BTreeSet<NoteToken>>,
    pub frozen: BTreeSet<(Voice, usize)>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Intersects the cell's allowed set with `tokens`.
    pub fn allow(&mut self, voice: Voice, t: usize, tokens: impl IntoIterator<Item = NoteToken>) -> &mut Self {
        let new: BTreeSet<NoteToken> = tokens.into_iter().collect();
        self.allowed
            .entry((voice, t))
            .and_modify(|s| s.retain(|x| new.contains(x)))
            .or_insert(new);
        self
    }

    pub fn freeze(&mut self, voice: Voice, t: usize) -> &mut Self {
        self.frozen.insert((voice, t));
        self
    }

    pub fn freeze_voice(&mut self, voice: Voice, len: usize) -> &mut Self {
        self.frozen.extend((1..=len).map(|t| (voice, t)));
        self
    }

    /// Freezes every cell outside `region`.
    pub fn freeze_outside(&mut self, region: &BTreeSet<(Voice, usize)>, len: usize) -> &mut Self {
        for v in Voice::ALL {
            for t in 1..=len {
                if !region.contains(&(v, t)) {
                    self.frozen.insert((v, t));
                }
            }
        }
        self
    }

    /// Index-level constraints. Every cell excludes the pad tokens and the
    /// first tick excludes the hold token, so any sample decodes.
    pub fn compile(&self, vocabs: &Vocabularies, len: usize) -> Result<CellConstraints, SamplerError> {
        for &(v, t) in self.allowed.keys().chain(&self.frozen) {
            if !(1..=len).contains(&t) {
                return Err(SamplerError::InvalidConfig(format!("{v} tick {t} is outside 1..={len}")));
            }
        }
        let mut c = CellConstraints::new(4, len, |v, t| {
            let mut w = vocabs.voices[v].writable();
            if t == 0 {
                w.retain(|&k| k != HOLD_INDEX);
            }
            w
        })?;
        for (&(voice, t), tokens) in &self.allowed {
            let vocab = vocabs.voice(voice);
            let mut idx = Vec::with_capacity(tokens.len());
            for tok in tokens {
                let i = vocab.index_of(tok).ok_or_else(|| SamplerError::OutOfVocabulary {
                    voice,
                    tick: t,
                    token: tok.to_string(),
                })?;
                idx.push(i);
            }
            c.restrict(voice.index(), t - 1, &idx)?;
        }
        for &(voice, t) in &self.frozen {
            c.freeze(voice.index(), t - 1);
        }
        Ok(c)
    }
}

fn seed_grid(models: &ModelSet, seed: &Chorale, constraints: &ConstraintSet) -> Result<Grid, SamplerError> {
    if seed.encoding != models.encoding() {
        return Err(crate::models::ModelError::EncodingMismatch {
            model: models.encoding(),
            input: seed.encoding,
        }
        .into());
    }
    let mut grid = Grid::new(4, seed.len(), 0);
    for seq in &seed.voices {
        let vocab = models.vocabs.voice(seq.voice);
        for (i, tok) in seq.tokens.iter().enumerate() {
            match vocab.index_of(tok) {
                Some(k) => grid.set(seq.voice.index(), i, k),
                None if constraints.frozen.contains(&(seq.voice, i + 1)) => {
                    return Err(SamplerError::OutOfVocabulary {
                        voice: seq.voice,
                        tick: i + 1,
                        token: tok.to_string(),
                    })
                }
                // resampled anyway
                None => {}
            }
        }
    }
    Ok(grid)
}

fn to_chorale(models: &ModelSet, grid: &Grid, metadata: &MetadataSeq) -> Result<Chorale, SamplerError> {
    let voices = [0, 1, 2, 3].map(|v| (0..grid.len()).map(|t| models.vocabs.voices[v].token(grid.get(v, t))).collect());
    Ok(Chorale::new(models.encoding(), voices, metadata.clone())?)
}

/// Samples a chorale of `metadata.len()` ticks. Frozen cells take their
/// value from `seed`, which must then be given and have the same length.
pub fn generate(
    models: &ModelSet,
    metadata: &MetadataSeq,
    constraints: &ConstraintSet,
    config: &SamplerConfig,
    seed: Option<&Chorale>,
) -> Result<(Chorale, RunStats), SamplerError> {
    let len = metadata.len();
    if len == 0 {
        return Err(SamplerError::InvalidConfig("length must be positive".into()));
    }
    if let Some(s) = seed {
        if s.len() != len {
            return Err(SamplerError::InvalidConfig(format!("seed has {} ticks, metadata {len}", s.len())));
        }
    }
    let cells = constraints.compile(&models.vocabs, len)?;
    let seed_grid = seed.map(|s| seed_grid(models, s, constraints)).transpose()?;
    let mut rng = crate::rng_from_seed(config.seed);
    let sizes = models.vocabs.sizes();
    let init = init_grid(&sizes, &cells, config.init, Some(&models.marginals), seed_grid.as_ref(), &mut rng)?;
    let cond = ChoraleConditional { models, metadata };
    let (grid, stats) = run(&cond, &cells, config, init, &mut rng)?;
    Ok((to_chorale(models, &grid, metadata)?, stats))
}

/// Keeps `melody` as the soprano and samples alto, tenor and bass.
pub fn reharmonize(
    models: &ModelSet,
    melody: &[NoteToken],
    metadata: &MetadataSeq,
    config: &SamplerConfig,
) -> Result<(Chorale, RunStats), SamplerError> {
    if melody.len() != metadata.len() {
        return Err(SamplerError::InvalidConfig(format!("melody has {} ticks, metadata {}", melody.len(), metadata.len())));
    }
    let mut constraints = ConstraintSet::new();
    constraints.freeze_voice(Voice::Soprano, melody.len());
    let filler = melody.first().copied().unwrap_or(NoteToken::Hold);
    let mut voices: [Vec<NoteToken>; 4] = Default::default();
    voices[0] = melody.to_vec();
    for v in &mut voices[1..] {
        *v = vec![filler; melody.len()];
    }
    let seed = Chorale::new_unchecked(models.encoding(), voices, metadata.clone());
    generate(models, metadata, &constraints, config, Some(&seed))
}

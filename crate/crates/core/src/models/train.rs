use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::classifier::{MaxEnt, Mlp, ModelKind, Scratch, VoiceModel, DEFAULT_HIDDEN};
use super::features::{FeatureLayout, SparseFeatures};
use super::set::ModelSet;
use super::ModelError;
use crate::ingest::{Corpus, Split};
use crate::score::{PAD_END_INDEX, PAD_START_INDEX};

pub const DEFAULT_DELTA_T: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub momentum: f64,
    pub seed: u64,
    /// Hidden width; ignored by MaxEnt.
    pub hidden: usize,
}

impl Hyperparameters {
    pub fn defaults_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::MaxEnt => Self {
                learning_rate: 0.05,
                batch_size: 32,
                epochs: 20,
                momentum: 0.9,
                seed: 0,
                hidden: 0,
            },
            ModelKind::Mlp => Self {
                learning_rate: 0.02,
                batch_size: 32,
                epochs: 20,
                momentum: 0.9,
                seed: 0,
                hidden: DEFAULT_HIDDEN,
            },
        }
    }
}

/// Mean cross-entropy (nats) and argmax accuracy per voice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub cross_entropy: [f64; 4],
    pub accuracy: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    /// 0 is the untrained initialization.
    pub epoch: usize,
    pub train: SplitMetrics,
    pub validation: Option<SplitMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub kind: ModelKind,
    pub delta_t: usize,
    pub hyperparameters: Hyperparameters,
    pub vocab_sizes: [usize; 4],
    /// `ln n_i`, the cross-entropy of a uniform guess.
    pub uniform_cross_entropy: [f64; 4],
    pub train_examples: usize,
    pub validation_examples: usize,
    pub epochs: Vec<EpochMetrics>,
    /// Final training log-likelihood summed over voices and ticks.
    pub objective: f64,
}

impl TrainReport {
    pub fn last(&self) -> &EpochMetrics {
        self.epochs.last().expect("epoch 0 is always recorded")
    }
}

struct Data {
    grids: Vec<[Vec<usize>; 4]>,
    metadata: Vec<crate::score::MetadataSeq>,
    train: Vec<(u32, u32)>,
    validation: Vec<(u32, u32)>,
}

impl Data {
    fn features(&self, layout: &FeatureLayout, voice: usize, (c, t): (u32, u32), buf: &mut SparseFeatures) {
        let g = &self.grids[c as usize];
        layout.encode_into(voice, t as usize, g[0].len(), &self.metadata[c as usize], |v, tau| g[v][tau], &mut buf.active);
        buf.dim = layout.dim(voice);
    }

    fn target(&self, voice: usize, (c, t): (u32, u32)) -> usize {
        self.grids[c as usize][voice][t as usize]
    }
}

/// Per-voice evaluation: (summed log-likelihood, correct count).
fn evaluate(model: &VoiceModel, layout: &FeatureLayout, data: &Data, voice: usize, examples: &[(u32, u32)]) -> (f64, usize) {
    let mut buf = SparseFeatures { dim: 0, active: Vec::new() };
    let mut s = Scratch::default();
    let mut p = vec![0.0; model.n()];
    let mut ll = 0.0;
    let mut correct = 0;
    for &ex in examples {
        data.features(layout, voice, ex, &mut buf);
        let target = data.target(voice, ex);
        ll -= model.loss(&buf, target, &mut s);
        model.predict_into(&buf, &mut s, &mut p);
        let best = p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k)
            .unwrap_or(0);
        correct += usize::from(best == target);
    }
    (ll, correct)
}

struct VoiceRun {
    model: VoiceModel,
    /// Per recorded epoch: (train ll, train correct, validation ll, validation correct).
    history: Vec<(f64, usize, f64, usize)>,
}

fn train_voice(kind: ModelKind, layout: &FeatureLayout, data: &Data, voice: usize, hp: &Hyperparameters) -> VoiceRun {
    let n = layout.sizes[voice];
    let m = layout.dim(voice);
    let mut rng = crate::rng_from_seed(hp.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(voice as u64 + 1)));
    let mut model = match kind {
        ModelKind::MaxEnt => VoiceModel::MaxEnt(MaxEnt::zeros(n, m)),
        ModelKind::Mlp => VoiceModel::Mlp(Mlp::init(n, m, hp.hidden, &mut rng)),
    };
    let record = |model: &VoiceModel| {
        let (tl, tc) = evaluate(model, layout, data, voice, &data.train);
        let (vl, vc) = evaluate(model, layout, data, voice, &data.validation);
        (tl, tc, vl, vc)
    };
    let mut history = vec![record(&model)];
    let np = model.params().len();
    let mut grad = vec![0.0; np];
    let mut velocity = vec![0.0; np];
    let mut order = data.train.clone();
    let mut buf = SparseFeatures { dim: 0, active: Vec::new() };
    let mut s = Scratch::default();
    let batch = hp.batch_size.max(1);
    for _ in 0..hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &ex in chunk {
                data.features(layout, voice, ex, &mut buf);
                model.accumulate_gradient(&buf, data.target(voice, ex), &mut grad, &mut s);
            }
            let scale = hp.learning_rate / chunk.len() as f64;
            for ((p, v), g) in model.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = hp.momentum * *v - scale * g;
                *p += *v;
            }
        }
        history.push(record(&model));
    }
    VoiceRun { model, history }
}

/// Trains one classifier per voice on the training split by mini-batch SGD
/// with momentum on the mean negative log-likelihood. Vocabularies span both
/// splits. Voices train in parallel, each from its own seeded stream, so the
/// result depends only on the inputs and `hp.seed`.
pub fn train(kind: ModelKind, corpus: &Corpus, delta_t: usize, hp: &Hyperparameters) -> Result<(ModelSet, TrainReport), ModelError> {
    if corpus.split(Split::Train).next().is_none() {
        return Err(ModelError::EmptyCorpus);
    }
    if kind == ModelKind::Mlp && hp.hidden == 0 {
        return Err(ModelError::InvalidHyperparameters("hidden width must be positive".into()));
    }
    if !(hp.learning_rate.is_finite() && hp.momentum.is_finite() && (0.0..1.0).contains(&hp.momentum)) {
        return Err(ModelError::InvalidHyperparameters("learning rate must be finite and momentum in [0, 1)".into()));
    }
    let vocabs = corpus.vocabularies().map_err(|e| ModelError::Corpus(e.to_string()))?;
    let layout = FeatureLayout::new(delta_t, vocabs.sizes());
    let mut data = Data {
        grids: Vec::with_capacity(corpus.len()),
        metadata: Vec::with_capacity(corpus.len()),
        train: Vec::new(),
        validation: Vec::new(),
    };
    for (ci, e) in corpus.entries.iter().enumerate() {
        data.grids.push(vocabs.indices(&e.chorale)?);
        data.metadata.push(e.chorale.metadata.clone());
        let list = match e.split {
            Split::Train => &mut data.train,
            Split::Validation => &mut data.validation,
        };
        list.extend((0..e.chorale.len() as u32).map(|t| (ci as u32, t)));
    }
    let runs: Vec<VoiceRun> = (0..4).into_par_iter().map(|v| train_voice(kind, &layout, &data, v, hp)).collect();

    let (nt, nv) = (data.train.len(), data.validation.len());
    let metrics = |ll: [f64; 4], correct: [usize; 4], count: usize| SplitMetrics {
        cross_entropy: ll.map(|l| -l / count as f64),
        accuracy: correct.map(|c| c as f64 / count as f64),
    };
    let epochs = (0..=hp.epochs)
        .map(|e| {
            let col = |f: fn(&(f64, usize, f64, usize)) -> f64| [0, 1, 2, 3].map(|v| f(&runs[v].history[e]));
            let tl = col(|h| h.0);
            let tc = col(|h| h.1 as f64).map(|c| c as usize);
            let vl = col(|h| h.2);
            let vc = col(|h| h.3 as f64).map(|c| c as usize);
            EpochMetrics {
                epoch: e,
                train: metrics(tl, tc, nt),
                validation: (nv > 0).then(|| metrics(vl, vc, nv)),
            }
        })
        .collect();
    let objective = runs.iter().map(|r| r.history.last().expect("recorded").0).sum();

    let mut marginals: [Vec<f64>; 4] = Default::default();
    for (v, m) in marginals.iter_mut().enumerate() {
        let mut counts = vec![0.0; layout.sizes[v]];
        for &ex in &data.train {
            counts[data.target(v, ex)] += 1.0;
        }
        counts[PAD_START_INDEX] = 0.0;
        counts[PAD_END_INDEX] = 0.0;
        let total: f64 = counts.iter().sum();
        *m = counts.into_iter().map(|c| c / total).collect();
    }

    let report = TrainReport {
        kind,
        delta_t,
        hyperparameters: *hp,
        vocab_sizes: vocabs.sizes(),
        uniform_cross_entropy: vocabs.sizes().map(|n| (n as f64).ln()),
        train_examples: nt,
        validation_examples: nv,
        epochs,
        objective,
    };
    let voices: [VoiceModel; 4] = runs.into_iter().map(|r| r.model).collect::<Vec<_>>().try_into().expect("four voices");
    Ok((
        ModelSet {
            kind,
            delta_t,
            vocabs,
            voices,
            marginals,
        },
        report,
    ))
}

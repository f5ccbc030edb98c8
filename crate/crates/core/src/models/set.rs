use super::classifier::{MaxEnt, ModelKind, Scratch, VoiceModel};
use super::features::FeatureLayout;
use super::ModelError;
use crate::score::{Chorale, Encoding, MetadataSeq, Vocabularies, Voice, PAD_END_INDEX, PAD_START_INDEX};

/// Four per-voice classifiers sharing one vocabulary set and scope.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    pub kind: ModelKind,
    pub delta_t: usize,
    pub vocabs: Vocabularies,
    pub voices: [VoiceModel; 4],
    /// Token frequencies per voice in the training split (pads zero),
    /// used for marginal initialization.
    pub marginals: [Vec<f64>; 4],
}

impl ModelSet {
    /// Zero MaxEnt models: uniform predictions, uniform writable marginals.
    pub fn uniform(vocabs: Vocabularies, delta_t: usize) -> Self {
        let layout = FeatureLayout::new(delta_t, vocabs.sizes());
        let voices = [0, 1, 2, 3].map(|v| VoiceModel::MaxEnt(MaxEnt::zeros(layout.sizes[v], layout.dim(v))));
        let marginals = [0, 1, 2, 3].map(|v| {
            let n = layout.sizes[v];
            let mut m = vec![1.0 / (n - 2) as f64; n];
            m[PAD_START_INDEX] = 0.0;
            m[PAD_END_INDEX] = 0.0;
            m
        });
        Self {
            kind: ModelKind::MaxEnt,
            delta_t,
            vocabs,
            voices,
            marginals,
        }
    }

    pub fn encoding(&self) -> Encoding {
        self.vocabs.encoding
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::new(self.delta_t, self.vocabs.sizes())
    }

    pub fn voice(&self, voice: Voice) -> &VoiceModel {
        &self.voices[voice.index()]
    }

    /// Checks that a chorale can be conditioned on and returns its index grid.
    pub fn indices(&self, chorale: &Chorale) -> Result<[Vec<usize>; 4], ModelError> {
        if chorale.encoding != self.encoding() {
            return Err(ModelError::EncodingMismatch {
                model: self.encoding(),
                input: chorale.encoding,
            });
        }
        Ok(self.vocabs.indices(chorale)?)
    }

    /// Hot-path prediction for `(voice, t0)`, `t0` 0-based, through an index
    /// accessor; `features` is a reusable buffer.
    #[allow(clippy::too_many_arguments)]
    pub fn predict_cell(
        &self,
        voice: usize,
        t0: usize,
        len: usize,
        metadata: &MetadataSeq,
        token: impl Fn(usize, usize) -> usize,
        features: &mut super::features::SparseFeatures,
        scratch: &mut Scratch,
        out: &mut [f64],
    ) {
        let layout = self.layout();
        layout.encode_into(voice, t0, len, metadata, token, &mut features.active);
        features.dim = layout.dim(voice);
        self.voices[voice].predict_into(features, scratch, out);
    }

    /// Distribution over `voice`'s vocabulary at 1-based tick `t`.
    pub fn predict(&self, chorale: &Chorale, voice: Voice, t: usize) -> Result<Vec<f64>, ModelError> {
        let grid = self.indices(chorale)?;
        let v = voice.index();
        let mut out = vec![0.0; self.vocabs.sizes()[v]];
        let mut features = super::features::SparseFeatures {
            dim: 0,
            active: Vec::new(),
        };
        self.predict_cell(
            v,
            t - 1,
            chorale.len(),
            &chorale.metadata,
            |vv, tau| grid[vv][tau],
            &mut features,
            &mut Scratch::default(),
            &mut out,
        );
        Ok(out)
    }
}

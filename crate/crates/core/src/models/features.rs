//! Context-window feature encoding.
//!
//! For target voice `i` at tick `t` with scope `Δt` the binary vector is the
//! concatenation, in this order, of
//!
//! * left block: ticks `t−Δt ..= t−1`, each tick the one-hots of voices 1..4;
//! * center block: one-hots of the three other voices at `t`;
//! * right block: ticks `t+1 ..= t+Δt`, laid out like the left block;
//! * metadata: for each tick `t−Δt ..= t+Δt`, one fermata bit, a one-hot of
//!   the 4 subdivisions and a one-hot of the 15 key signatures.
//!
//! Ticks before the start read as `<s>` and after the end as `</s>`; their
//! metadata is neutral (no fermata, subdivision by formula, key 0).

use serde::{Deserialize, Serialize};

use crate::score::{Chorale, MetadataSeq, ScoreError, Vocabularies, MIN_KEY_SIGNATURE, PAD_END_INDEX, PAD_START_INDEX};

/// Features per metadata tick: fermata, 4 subdivisions, 15 key signatures.
pub const METADATA_WIDTH: usize = 1 + 4 + 15;

/// Anything that can be fed to a classifier as `(index, value)` terms.
pub trait Features {
    fn dim(&self) -> usize;
    fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_;
}

/// Binary vector given by its active indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseFeatures {
    pub dim: usize,
    pub active: Vec<u32>,
}

impl Features for SparseFeatures {
    fn dim(&self) -> usize {
        self.dim
    }

    fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.active.iter().map(|&i| (i as usize, 1.0))
    }
}

impl SparseFeatures {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &i in &self.active {
            d[i as usize] = 1.0;
        }
        d
    }
}

/// Real-valued input, used by gradient checks.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFeatures(pub Vec<f64>);

impl Features for DenseFeatures {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().copied().enumerate().filter(|(_, v)| *v != 0.0)
    }
}

/// Offsets of every block, fixed by the vocabulary sizes and `Δt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub delta_t: usize,
    pub sizes: [usize; 4],
}

impl FeatureLayout {
    pub fn new(delta_t: usize, sizes: [usize; 4]) -> Self {
        Self { delta_t, sizes }
    }

    fn tick_width(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn voice_offset(&self, voice: usize) -> usize {
        self.sizes[..voice].iter().sum()
    }

    fn center_width(&self, voice: usize) -> usize {
        self.tick_width() - self.sizes[voice]
    }

    /// `m_i = 2Δt·Σn_j + Σ_{j≠i} n_j + (2Δt+1)·20`.
    pub fn dim(&self, voice: usize) -> usize {
        2 * self.delta_t * self.tick_width() + self.center_width(voice) + (2 * self.delta_t + 1) * METADATA_WIDTH
    }

    pub fn dims(&self) -> [usize; 4] {
        [0, 1, 2, 3].map(|v| self.dim(v))
    }

    /// Active indices for target `(voice, t0)` with `t0` 0-based;
    /// `token(v, τ)` returns the vocabulary index at voice `v`, tick `τ`.
    /// The output is sorted ascending.
    pub fn encode_into(
        &self,
        voice: usize,
        t0: usize,
        len: usize,
        metadata: &MetadataSeq,
        token: impl Fn(usize, usize) -> usize,
        out: &mut Vec<u32>,
    ) {
        out.clear();
        let d = self.delta_t as isize;
        let w = self.tick_width();
        let t = t0 as isize;
        let push_tick = |base: usize, tau: isize, out: &mut Vec<u32>| {
            for v in 0..4 {
                let idx = if tau < 0 {
                    PAD_START_INDEX
                } else if tau as usize >= len {
                    PAD_END_INDEX
                } else {
                    token(v, tau as usize)
                };
                debug_assert!(idx < self.sizes[v]);
                out.push((base + self.voice_offset(v) + idx) as u32);
            }
        };
        for k in 0..d {
            push_tick(k as usize * w, t - d + k, out);
        }
        let center = self.delta_t * w;
        let mut off = center;
        for v in 0..4 {
            if v == voice {
                continue;
            }
            out.push((off + token(v, t0)) as u32);
            off += self.sizes[v];
        }
        let right = center + self.center_width(voice);
        for k in 0..d {
            push_tick(right + k as usize * w, t + 1 + k, out);
        }
        let meta = right + self.delta_t * w;
        for k in 0..=2 * d {
            let tau = t - d + k;
            let base = meta + k as usize * METADATA_WIDTH;
            let (fermata, key) = if tau >= 0 && (tau as usize) < len {
                let i = tau as usize;
                (metadata.fermata[i], metadata.key_signature[i])
            } else {
                (false, 0)
            };
            if fermata {
                out.push(base as u32);
            }
            out.push((base + 1 + tau.rem_euclid(4) as usize) as u32);
            out.push((base + 5 + (key - MIN_KEY_SIGNATURE) as usize) as u32);
        }
    }

    pub fn encode_with(
        &self,
        voice: usize,
        t0: usize,
        len: usize,
        metadata: &MetadataSeq,
        token: impl Fn(usize, usize) -> usize,
    ) -> SparseFeatures {
        let mut active = Vec::new();
        self.encode_into(voice, t0, len, metadata, token, &mut active);
        SparseFeatures {
            dim: self.dim(voice),
            active,
        }
    }
}

/// Feature vector for `voice` (0-based) at 1-based tick `t` of a chorale.
pub fn encode(
    chorale: &Chorale,
    voice: usize,
    t: usize,
    delta_t: usize,
    vocabs: &Vocabularies,
) -> Result<SparseFeatures, ScoreError> {
    assert!((1..=chorale.len()).contains(&t), "tick {t} outside 1..={}", chorale.len());
    let grid = vocabs.indices(chorale)?;
    let layout = FeatureLayout::new(delta_t, vocabs.sizes());
    Ok(layout.encode_with(voice, t - 1, chorale.len(), &chorale.metadata, |v, tau| grid[v][tau]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{Encoding, NoteToken, Voice};
    use proptest::prelude::*;

    fn tok(s: &str) -> NoteToken {
        s.parse().unwrap()
    }

    fn fixture() -> Chorale {
        let h = NoteToken::Hold;
        let s = [tok("C5"), h, tok("D5"), h, tok("E5"), h, h, h];
        let a = [tok("E4"), h, h, h, tok("G4"), h, tok("F4"), h];
        let t = [tok("G3"), h, tok("B3"), h, tok("C4"), h, h, h];
        let b = [tok("C3"), h, tok("G2"), h, tok("C3"), h, h, tok("E3")];
        let mut md = MetadataSeq::neutral(8);
        md.fermata[5] = true;
        md.key_signature.iter_mut().for_each(|k| *k = -1);
        Chorale::new(Encoding::Spelled, [s, a, t, b].map(|v| v.to_vec()), md).unwrap()
    }

    // Independent dimension count: walk every window position and add up
    // group widths one at a time.
    fn count_dim(sizes: [usize; 4], delta_t: usize, voice: usize) -> usize {
        let mut m = 0;
        for _ in 0..delta_t {
            for s in sizes {
                m += s;
            }
        }
        for (v, s) in sizes.iter().enumerate() {
            if v != voice {
                m += s;
            }
        }
        for _ in 0..delta_t {
            for s in sizes {
                m += s;
            }
        }
        for _ in 0..(2 * delta_t + 1) {
            m += 1 + 4 + 15;
        }
        m
    }

    #[test]
    fn dimension_matches_independent_count() {
        for sizes in [[5, 6, 7, 8], [24, 23, 22, 31], [3, 3, 3, 3]] {
            for dt in [0, 1, 2, 16] {
                for v in 0..4 {
                    assert_eq!(FeatureLayout::new(dt, sizes).dim(v), count_dim(sizes, dt, v));
                }
            }
        }
    }

    #[test]
    fn group_counts_at_tick_five() {
        let c = fixture();
        let vocabs = Vocabularies::from_chorales(Encoding::Spelled, [&c]).unwrap();
        let x = encode(&c, 0, 5, 2, &vocabs).unwrap();
        let layout = FeatureLayout::new(2, vocabs.sizes());
        let meta_start = layout.dim(0) - 5 * METADATA_WIDTH;
        let token_hots = x.active.iter().filter(|&&i| (i as usize) < meta_start).count();
        assert_eq!(token_hots, 4 * (2 + 2) + 3);
        // 5 metadata ticks, each with one subdivision and one key; tick 6 has a fermata
        let meta: Vec<usize> = x.active.iter().map(|&i| i as usize).filter(|&i| i >= meta_start).collect();
        assert_eq!(meta.len(), 5 * 2 + 1);
        for k in 0..5 {
            let base = meta_start + k * METADATA_WIDTH;
            let sub: Vec<usize> = meta.iter().filter(|&&i| (base + 1..base + 5).contains(&i)).map(|i| i - base - 1).collect();
            assert_eq!(sub, vec![(2 + k) % 4]);
            let key: Vec<usize> = meta.iter().filter(|&&i| (base + 5..base + 20).contains(&i)).map(|i| i - base - 5).collect();
            assert_eq!(key, vec![6]);
            assert_eq!(meta.contains(&base), k == 3);
        }
        assert_eq!(x.dim, layout.dim(0));
        assert!(x.active.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn first_tick_left_block_is_padding() {
        let c = fixture();
        let vocabs = Vocabularies::from_chorales(Encoding::Spelled, [&c]).unwrap();
        let sizes = vocabs.sizes();
        let w: usize = sizes.iter().sum();
        let x = encode(&c, 2, 1, 2, &vocabs).unwrap();
        let left: Vec<u32> = x.active.iter().copied().filter(|&i| (i as usize) < 2 * w).collect();
        let mut want = Vec::new();
        for k in 0..2 {
            let mut off = k * w;
            for s in sizes {
                want.push((off + PAD_START_INDEX) as u32);
                off += s;
            }
        }
        assert_eq!(left, want);
        // last tick: right block all end pads, metadata past the end neutral
        let x = encode(&c, 2, 8, 2, &vocabs).unwrap();
        let layout = FeatureLayout::new(2, sizes);
        let right = 2 * w + layout.center_width(2);
        let r: Vec<u32> = x.active.iter().copied().filter(|&i| (right..right + 2 * w).contains(&(i as usize))).collect();
        assert!(r.iter().all(|&i| {
            let within = (i as usize - right) % w;
            let mut off = 0;
            sizes.iter().any(|s| {
                let hit = within == off + PAD_END_INDEX;
                off += s;
                hit
            })
        }));
        let meta = layout.dim(2) - 5 * METADATA_WIDTH;
        let last_key: Vec<u32> = x.active.iter().copied().filter(|&i| i as usize >= meta + 4 * METADATA_WIDTH).collect();
        let base = (meta + 4 * METADATA_WIDTH) as u32;
        assert_eq!(last_key, vec![base + 1 + 1, base + 5 + 7]);
    }

    #[test]
    fn target_cell_is_masked() {
        let c = fixture();
        let vocabs = Vocabularies::from_chorales(Encoding::Spelled, [&c]).unwrap();
        for v in Voice::ALL {
            for t in 1..=c.len() {
                let base = encode(&c, v.index(), t, 3, &vocabs).unwrap();
                for other in vocabs.voice(v).tokens() {
                    if other.is_pad() || (t == 1 && other.is_hold()) {
                        continue;
                    }
                    let mut d = c.clone();
                    d.set_token(v, t, *other);
                    let x = encode(&d, v.index(), t, 3, &vocabs).unwrap();
                    assert_eq!(x, base);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn one_hot_groups_sum_to_one(dt in 0usize..5, t0 in 0usize..8, voice in 0usize..4) {
            let c = fixture();
            let vocabs = Vocabularies::from_chorales(Encoding::Spelled, [&c]).unwrap();
            let layout = FeatureLayout::new(dt, vocabs.sizes());
            let x = encode(&c, voice, t0 + 1, dt, &vocabs).unwrap();
            let dense = x.to_dense();
            let mut groups = Vec::new();
            let mut off = 0;
            for _ in 0..dt { for s in layout.sizes { groups.push((off, s)); off += s; } }
            for (v, s) in layout.sizes.iter().enumerate() { if v != voice { groups.push((off, *s)); off += s; } }
            for _ in 0..dt { for s in layout.sizes { groups.push((off, s)); off += s; } }
            for _ in 0..=2 * dt { off += 1; groups.push((off, 4)); off += 4; groups.push((off, 15)); off += 15; }
            prop_assert_eq!(off, layout.dim(voice));
            for (start, width) in groups {
                let s: f64 = dense[start..start + width].iter().sum();
                prop_assert_eq!(s, 1.0);
            }
        }
    }
}

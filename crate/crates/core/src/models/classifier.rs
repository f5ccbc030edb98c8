use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::Features;
use super::softmax::softmax_in_place;
use super::ModelError;
use crate::Rng;

pub const DEFAULT_HIDDEN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    MaxEnt,
    Mlp,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::MaxEnt => "maxent",
            ModelKind::Mlp => "mlp",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maxent" => Ok(ModelKind::MaxEnt),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(format!("unknown model kind {s:?} (expected maxent or mlp)")),
        }
    }
}

/// Softmax regression `softmax(A x + b)` with `A` of shape `n × m`.
///
/// Parameters are one flat vector: `A` stored feature-major
/// (`A[k][f]` at `f·n + k`) followed by `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEnt {
    n: usize,
    m: usize,
    params: Vec<f64>,
}

impl MaxEnt {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            params: vec![0.0; n * m + n],
        }
    }

    pub fn from_params(n: usize, m: usize, params: Vec<f64>) -> Result<Self, ModelError> {
        check_len(n * m + n, params.len())?;
        Ok(Self { n, m, params })
    }

    /// Entry `A[k][f]`.
    pub fn a(&self, k: usize, f: usize) -> f64 {
        self.params[f * self.n + k]
    }

    pub fn set_a(&mut self, k: usize, f: usize, value: f64) {
        self.params[f * self.n + k] = value;
    }

    pub fn bias(&self) -> &[f64] {
        &self.params[self.n * self.m..]
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        let start = self.n * self.m;
        &mut self.params[start..]
    }
}

/// One hidden ReLU layer: `softmax(W2 relu(W1 x + b1) + b2)`.
///
/// Flat layout: `W1` feature-major (`W1[h][f]` at `f·H + h`), `b1`, `W2`
/// (`W2[k][h]` at `k·H + h`), `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    n: usize,
    m: usize,
    h: usize,
    params: Vec<f64>,
}

impl Mlp {
    pub fn param_count(n: usize, m: usize, h: usize) -> usize {
        m * h + h + n * h + n
    }

    /// He-normal weights, zero biases.
    pub fn init(n: usize, m: usize, h: usize, rng: &mut Rng) -> Self {
        let mut params = vec![0.0; Self::param_count(n, m, h)];
        let w1 = Normal::new(0.0, (2.0 / m.max(1) as f64).sqrt()).expect("positive std");
        let w2 = Normal::new(0.0, (2.0 / h.max(1) as f64).sqrt()).expect("positive std");
        for p in &mut params[..m * h] {
            *p = w1.sample(rng);
        }
        let w2_start = m * h + h;
        for p in &mut params[w2_start..w2_start + n * h] {
            *p = w2.sample(rng);
        }
        Self { n, m, h, params }
    }

    pub fn from_params(n: usize, m: usize, h: usize, params: Vec<f64>) -> Result<Self, ModelError> {
        check_len(Self::param_count(n, m, h), params.len())?;
        Ok(Self { n, m, h, params })
    }

    pub fn hidden(&self) -> usize {
        self.h
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let (w1, rest) = self.params.split_at(self.m * self.h);
        let (b1, rest) = rest.split_at(self.h);
        let (w2, b2) = rest.split_at(self.n * self.h);
        (w1, b1, w2, b2)
    }

    fn pre_activations<F: Features>(&self, x: &F, pre: &mut [f64]) {
        let (w1, b1, _, _) = self.split();
        pre.copy_from_slice(b1);
        let h = self.h;
        for (f, v) in x.terms() {
            let row = &w1[f * h..(f + 1) * h];
            if v == 1.0 {
                for (p, w) in pre.iter_mut().zip(row) {
                    *p += w;
                }
            } else {
                for (p, w) in pre.iter_mut().zip(row) {
                    *p += w * v;
                }
            }
        }
    }
}

fn check_len(expected: usize, found: usize) -> Result<(), ModelError> {
    if expected == found {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { expected, found })
    }
}

/// Reusable buffers for forward and backward passes.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    z: Vec<f64>,
    pre: Vec<f64>,
    act: Vec<f64>,
    ga: Vec<f64>,
}

/// One voice's classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum VoiceModel {
    MaxEnt(MaxEnt),
    Mlp(Mlp),
}

impl VoiceModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            VoiceModel::MaxEnt(_) => ModelKind::MaxEnt,
            VoiceModel::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// Number of classes.
    pub fn n(&self) -> usize {
        match self {
            VoiceModel::MaxEnt(m) => m.n,
            VoiceModel::Mlp(m) => m.n,
        }
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        match self {
            VoiceModel::MaxEnt(m) => m.m,
            VoiceModel::Mlp(m) => m.m,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            VoiceModel::MaxEnt(_) => 0,
            VoiceModel::Mlp(m) => m.h,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            VoiceModel::MaxEnt(m) => &m.params,
            VoiceModel::Mlp(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            VoiceModel::MaxEnt(m) => &mut m.params,
            VoiceModel::Mlp(m) => &mut m.params,
        }
    }

    /// Logits into `scratch.z`; for the MLP also fills `pre` and `act`.
    fn forward<F: Features>(&self, x: &F, s: &mut Scratch) {
        let n = self.n();
        s.z.resize(n, 0.0);
        match self {
            VoiceModel::MaxEnt(m) => {
                s.z.copy_from_slice(m.bias());
                for (f, v) in x.terms() {
                    let col = &m.params[f * n..(f + 1) * n];
                    for (z, a) in s.z.iter_mut().zip(col) {
                        *z += a * v;
                    }
                }
            }
            VoiceModel::Mlp(m) => {
                s.pre.resize(m.h, 0.0);
                s.act.resize(m.h, 0.0);
                m.pre_activations(x, &mut s.pre);
                for (a, p) in s.act.iter_mut().zip(&s.pre) {
                    *a = p.max(0.0);
                }
                let (_, _, w2, b2) = m.split();
                for k in 0..n {
                    let row = &w2[k * m.h..(k + 1) * m.h];
                    s.z[k] = b2[k] + row.iter().zip(&s.act).map(|(w, a)| w * a).sum::<f64>();
                }
            }
        }
    }

    /// Distribution into `out` (length `n`), reusing `scratch`.
    /// The input dimension is not checked.
    pub fn predict_into<F: Features>(&self, x: &F, scratch: &mut Scratch, out: &mut [f64]) {
        debug_assert_eq!(x.dim(), self.m());
        self.forward(x, scratch);
        out.copy_from_slice(&scratch.z);
        softmax_in_place(out);
    }

    pub fn predict<F: Features>(&self, x: &F) -> Result<Vec<f64>, ModelError> {
        check_len(self.m(), x.dim())?;
        let mut out = vec![0.0; self.n()];
        self.predict_into(x, &mut Scratch::default(), &mut out);
        Ok(out)
    }

    /// `−log p(target | x)`.
    pub fn loss<F: Features>(&self, x: &F, target: usize, scratch: &mut Scratch) -> f64 {
        self.forward(x, scratch);
        -super::softmax::log_softmax_at(&scratch.z, target)
    }

    /// Adds `∂(−log p(target | x))/∂θ` into `grad` and returns the loss.
    pub fn accumulate_gradient<F: Features>(&self, x: &F, target: usize, grad: &mut [f64], s: &mut Scratch) -> f64 {
        debug_assert_eq!(grad.len(), self.params().len());
        self.forward(x, s);
        let loss = -super::softmax::log_softmax_at(&s.z, target);
        // z becomes dL/dz = p − onehot(target)
        softmax_in_place(&mut s.z);
        s.z[target] -= 1.0;
        let n = self.n();
        match self {
            VoiceModel::MaxEnt(m) => {
                for (f, v) in x.terms() {
                    let col = &mut grad[f * n..(f + 1) * n];
                    for (g, dz) in col.iter_mut().zip(&s.z) {
                        *g += dz * v;
                    }
                }
                for (g, dz) in grad[n * m.m..].iter_mut().zip(&s.z) {
                    *g += dz;
                }
            }
            VoiceModel::Mlp(m) => {
                let h = m.h;
                let (_, _, w2, _) = m.split();
                let w1_len = m.m * h;
                let w2_start = w1_len + h;
                let b2_start = w2_start + n * h;
                s.ga.clear();
                s.ga.resize(h, 0.0);
                for k in 0..n {
                    let dz = s.z[k];
                    let row = &w2[k * h..(k + 1) * h];
                    let grow = &mut grad[w2_start + k * h..w2_start + (k + 1) * h];
                    for j in 0..h {
                        grow[j] += dz * s.act[j];
                        s.ga[j] += dz * row[j];
                    }
                    grad[b2_start + k] += dz;
                }
                // through the ReLU
                for (g, p) in s.ga.iter_mut().zip(&s.pre) {
                    if *p <= 0.0 {
                        *g = 0.0;
                    }
                }
                for (g, ga) in grad[w1_len..w1_len + h].iter_mut().zip(&s.ga) {
                    *g += ga;
                }
                for (f, v) in x.terms() {
                    let grow = &mut grad[f * h..(f + 1) * h];
                    for (g, ga) in grow.iter_mut().zip(&s.ga) {
                        *g += ga * v;
                    }
                }
            }
        }
        loss
    }

    /// Sign pattern of the hidden pre-activations (empty for MaxEnt).
    fn relu_pattern<F: Features>(&self, x: &F) -> Vec<bool> {
        match self {
            VoiceModel::MaxEnt(_) => Vec::new(),
            VoiceModel::Mlp(m) => {
                let mut pre = vec![0.0; m.h];
                m.pre_activations(x, &mut pre);
                pre.iter().map(|p| *p > 0.0).collect()
            }
        }
    }
}

pub const GRADIENT_CHECK_STEP: f64 = 1e-5;
/// Denominator floor of the relative error. Central differences at the step
/// above carry roundoff near `1e-10`, so an entry below the floor is held to
/// the absolute bound `tolerance · floor` instead.
pub const RELATIVE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters skipped because a ±step perturbation moved a ReLU across
    /// its kink, where the central difference is not a derivative estimate.
    pub skipped_at_kinks: usize,
    /// Checked parameters with `|a| + |d|` under [`RELATIVE_FLOOR`].
    pub below_floor: usize,
}

/// Analytic gradient against central differences with step `1e-5` on
/// `subset` parameters drawn without replacement. Relative error is
/// `|a − d| / max(|a| + |d|, RELATIVE_FLOOR)`.
pub fn gradient_check<F: Features>(
    model: &VoiceModel,
    x: &F,
    target: usize,
    subset: usize,
    rng: &mut Rng,
) -> GradientCheck {
    let mut s = Scratch::default();
    let mut analytic = vec![0.0; model.params().len()];
    model.accumulate_gradient(x, target, &mut analytic, &mut s);
    let base_pattern = model.relu_pattern(x);
    let mut probe = model.clone();
    let count = subset.min(analytic.len());
    let mut out = GradientCheck {
        max_relative_error: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
        below_floor: 0,
    };
    for p in sample(rng, analytic.len(), count) {
        let orig = probe.params()[p];
        probe.params_mut()[p] = orig + GRADIENT_CHECK_STEP;
        let up = probe.loss(x, target, &mut s);
        let kink_up = probe.relu_pattern(x) != base_pattern;
        probe.params_mut()[p] = orig - GRADIENT_CHECK_STEP;
        let down = probe.loss(x, target, &mut s);
        let kink_down = probe.relu_pattern(x) != base_pattern;
        probe.params_mut()[p] = orig;
        if kink_up || kink_down {
            out.skipped_at_kinks += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * GRADIENT_CHECK_STEP);
        let a = analytic[p];
        let scale = a.abs() + numeric.abs();
        out.below_floor += (scale < RELATIVE_FLOOR) as usize;
        let rel = (a - numeric).abs() / scale.max(RELATIVE_FLOOR);
        out.max_relative_error = out.max_relative_error.max(rel);
        out.checked += 1;
    }
    out
}

/// All analytic gradient entries, for tests that need exact values.
pub fn gradient<F: Features>(model: &VoiceModel, x: &F, target: usize) -> Vec<f64> {
    let mut g = vec![0.0; model.params().len()];
    model.accumulate_gradient(x, target, &mut g, &mut Scratch::default());
    g
}

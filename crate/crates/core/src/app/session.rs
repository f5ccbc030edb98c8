use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::wire::{GenerationRequest, ScoreDocument, Violation};
use super::AppError;
use crate::models::ModelSet;
use crate::sampler::{generate, ConstraintSet, RunStats, SamplerConfig, SamplerError};
use crate::score::{validate, Chorale, Encoding, MetadataSeq, NoteToken, Voice, MAX_KEY_SIGNATURE, MIN_KEY_SIGNATURE, TICKS_PER_BAR};

/// Server-side bounds on generation requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_iterations: usize,
    pub max_length: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            max_length: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// The request as executed: seed and iterations always filled in.
    pub request: GenerationRequest,
    pub stats: RunStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub id: String,
    pub creation_seed: Option<u64>,
    pub initial: ScoreDocument,
    pub entries: Vec<LogEntry>,
}

/// A score being edited by repeated region regeneration.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    models: Arc<ModelSet>,
    creation_seed: Option<u64>,
    initial: Chorale,
    history: Vec<Chorale>,
    current: Chorale,
    log: Vec<LogEntry>,
}

fn convert_violations(v: &[crate::score::Violation]) -> Vec<Violation> {
    v.iter()
        .map(|x| {
            let field = match x.voice {
                Some(voice) => format!("score.{voice}[{}]", x.tick),
                None => format!("score.metadata[{}]", x.tick),
            };
            Violation::new(field, x.rule.describe())
        })
        .collect()
}

/// Brings an uploaded chorale into the model's encoding and checks it fits
/// the model's vocabularies.
pub fn admit(models: &ModelSet, chorale: Chorale) -> Result<Chorale, AppError> {
    let chorale = match (chorale.encoding, models.encoding()) {
        (a, b) if a == b => chorale,
        (Encoding::Spelled, Encoding::Midi) => chorale.to_midi_encoding()?,
        (a, b) => {
            return Err(AppError::Invalid(vec![Violation::new(
                "score.encoding",
                format!("score is {a}-encoded, model is {b}-encoded"),
            )]))
        }
    };
    let mut violations = convert_violations(&validate(&chorale));
    violations.extend(convert_violations(&models.vocabs.violations(&chorale)));
    if violations.is_empty() {
        Ok(chorale)
    } else {
        Err(AppError::Invalid(violations))
    }
}

/// Fills in the seed and iteration count, checking the iteration cap.
pub fn resolve(request: &GenerationRequest, default_seed: u64, limits: &Limits) -> Result<GenerationRequest, AppError> {
    let mut r = request.clone();
    r.seed = Some(request.seed.unwrap_or(default_seed));
    let cells = request.region.cells().len();
    match request.iterations {
        Some(m) if m > limits.max_iterations => {
            return Err(AppError::Invalid(vec![Violation::new(
                "iterations",
                format!("{m} exceeds the server cap of {}", limits.max_iterations),
            )]))
        }
        Some(_) => {}
        None => r.iterations = Some((100 * cells).min(limits.max_iterations)),
    }
    Ok(r)
}

fn check_request(models: &ModelSet, chorale: &Chorale, r: &GenerationRequest) -> Result<(MetadataSeq, ConstraintSet), Vec<Violation>> {
    let len = chorale.len();
    let mut violations = Vec::new();
    let region = r.region.cells();
    if region.is_empty() {
        violations.push(Violation::new("region", "region is empty"));
    }
    for c in &region {
        if !(1..=len).contains(&c.tick) {
            violations.push(Violation::new("region", format!("{} tick {} is outside 1..={len}", c.voice, c.tick)));
        }
    }
    let cells: BTreeSet<(Voice, usize)> = region.iter().map(|c| (c.voice, c.tick)).collect();
    let mut constraints = ConstraintSet::new();
    for (i, pin) in r.pins.iter().enumerate() {
        let field = format!("pins[{i}]");
        if !cells.contains(&(pin.voice, pin.tick)) {
            violations.push(Violation::new(&field, format!("{} tick {} is not in the region", pin.voice, pin.tick)));
        }
        if pin.tokens.is_empty() {
            violations.push(Violation::new(&field, "no tokens"));
        }
        let vocab = models.vocabs.voice(pin.voice);
        let mut tokens = Vec::new();
        for (j, s) in pin.tokens.iter().enumerate() {
            match s.parse::<NoteToken>() {
                Ok(t) if t.is_pad() => violations.push(Violation::new(format!("{field}.tokens[{j}]"), "pad tokens cannot be pinned")),
                Ok(t) if !vocab.contains(&t) => {
                    violations.push(Violation::new(format!("{field}.tokens[{j}]"), format!("{t} is not in the {} vocabulary", pin.voice)))
                }
                Ok(t) => tokens.push(t),
                Err(e) => violations.push(Violation::new(format!("{field}.tokens[{j}]"), e.to_string())),
            }
        }
        constraints.allow(pin.voice, pin.tick, tokens);
    }
    let mut metadata = chorale.metadata.clone();
    for (i, f) in r.overrides.fermata.iter().enumerate() {
        match f.tick.checked_sub(1).and_then(|t| metadata.fermata.get_mut(t)) {
            Some(x) => *x = f.value,
            None => violations.push(Violation::new(format!("overrides.fermata[{i}]"), format!("tick {} is outside 1..={len}", f.tick))),
        }
    }
    let bars = len.div_ceil(TICKS_PER_BAR);
    for (i, k) in r.overrides.key_signature.iter().enumerate() {
        let field = format!("overrides.key_signature[{i}]");
        if !(1..=bars).contains(&k.bar) {
            violations.push(Violation::new(&field, format!("bar {} is outside 1..={bars}", k.bar)));
        } else if !(MIN_KEY_SIGNATURE..=MAX_KEY_SIGNATURE).contains(&k.sharps) {
            violations.push(Violation::new(&field, format!("{} sharps is outside [-7, 7]", k.sharps)));
        } else {
            let start = (k.bar - 1) * TICKS_PER_BAR;
            for x in &mut metadata.key_signature[start..(start + TICKS_PER_BAR).min(len)] {
                *x = k.sharps;
            }
        }
    }
    if r.block_size == Some(0) {
        violations.push(Violation::new("block_size", "must be at least 1"));
    }
    if !violations.is_empty() {
        return Err(violations);
    }
    constraints.freeze_outside(&cells, len);
    Ok((metadata, constraints))
}

/// Runs a resolved request against `chorale` without touching any session.
pub fn apply_request(models: &ModelSet, chorale: &Chorale, r: &GenerationRequest) -> Result<(Chorale, RunStats), AppError> {
    let (metadata, constraints) = check_request(models, chorale, r).map_err(AppError::Invalid)?;
    let config = SamplerConfig {
        iterations: r.iterations,
        seed: r.seed.unwrap_or(0),
        block_size: r.block_size.unwrap_or(1),
        min_distance: r.min_distance.unwrap_or(0),
        ..SamplerConfig::default()
    };
    let (out, stats) = generate(models, &metadata, &constraints, &config, Some(chorale)).map_err(|e| match e {
        SamplerError::EmptyAllowedSet { voice, tick } => AppError::Invalid(vec![Violation::new(
            "pins",
            format!("no admissible token left at voice {voice} tick {tick}"),
        )]),
        e => e.into(),
    })?;
    let problems = validate(&out);
    if !problems.is_empty() {
        return Err(AppError::Invalid(convert_violations(&problems)));
    }
    Ok((out, stats))
}

impl Session {
    /// A session over an existing score, which must fit the model.
    pub fn from_score(id: String, models: Arc<ModelSet>, chorale: Chorale) -> Result<Self, AppError> {
        let chorale = admit(&models, chorale)?;
        Ok(Self {
            id,
            models,
            creation_seed: None,
            initial: chorale.clone(),
            history: Vec::new(),
            current: chorale,
            log: Vec::new(),
        })
    }

    /// A session over a freshly sampled score of `length` ticks.
    pub fn generated(id: String, models: Arc<ModelSet>, length: usize, seed: u64, iterations: Option<usize>, limits: &Limits) -> Result<Self, AppError> {
        if length == 0 || length > limits.max_length {
            return Err(AppError::Invalid(vec![Violation::new(
                "length",
                format!("must be in 1..={}", limits.max_length),
            )]));
        }
        if iterations.is_some_and(|m| m > limits.max_iterations) {
            return Err(AppError::Invalid(vec![Violation::new(
                "iterations",
                format!("exceeds the server cap of {}", limits.max_iterations),
            )]));
        }
        let config = SamplerConfig {
            iterations: Some(iterations.unwrap_or(400 * length).min(limits.max_iterations)),
            ..SamplerConfig::with_seed(seed)
        };
        let (chorale, _) = generate(&models, &MetadataSeq::neutral(length), &ConstraintSet::new(), &config, None)?;
        let mut s = Self::from_score(id, models, chorale)?;
        s.creation_seed = Some(seed);
        Ok(s)
    }

    pub fn current(&self) -> &Chorale {
        &self.current
    }

    pub fn initial(&self) -> &Chorale {
        &self.initial
    }

    pub fn depth(&self) -> usize {
        self.log.len()
    }

    pub fn models(&self) -> &Arc<ModelSet> {
        &self.models
    }

    /// Applies a request; on any error the session is unchanged.
    pub fn apply(&mut self, request: &GenerationRequest, default_seed: u64, limits: &Limits) -> Result<&LogEntry, AppError> {
        let resolved = resolve(request, default_seed, limits)?;
        let (next, stats) = apply_request(&self.models, &self.current, &resolved)?;
        self.history.push(std::mem::replace(&mut self.current, next));
        self.log.push(LogEntry { request: resolved, stats });
        Ok(self.log.last().expect("just pushed"))
    }

    pub fn undo(&mut self) -> Result<(), AppError> {
        match self.history.pop() {
            Some(prev) => {
                self.current = prev;
                self.log.pop();
                Ok(())
            }
            None => Err(AppError::Invalid(vec![Violation::new("log", "nothing to undo")])),
        }
    }

    /// Re-executes the edit log from the initial score.
    pub fn replay(&self) -> Result<Chorale, AppError> {
        let mut c = self.initial.clone();
        for e in &self.log {
            c = apply_request(&self.models, &c, &e.request)?.0;
        }
        Ok(c)
    }

    pub fn log(&self) -> SessionLog {
        SessionLog {
            id: self.id.clone(),
            creation_seed: self.creation_seed,
            initial: ScoreDocument::from_chorale(&self.initial),
            entries: self.log.clone(),
        }
    }
}

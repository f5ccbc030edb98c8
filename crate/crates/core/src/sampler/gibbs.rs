use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::block::pick_block;
use super::{CellConstraints, Conditional, Grid, SamplerError};
use crate::Rng;

/// Below this total probability over an allowed set the update falls back to
/// a uniform draw from the set.
pub const ZERO_MASS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    #[default]
    Uniform,
    /// Per-voice token frequencies of the training corpus, restricted to
    /// each cell's allowed set.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Cell updates; `None` means 100 per free cell.
    pub iterations: Option<usize>,
    pub init: InitMode,
    pub seed: u64,
    /// Cells updated together per round; 1 is the sequential sampler.
    pub block_size: usize,
    /// Minimum tick distance within a block.
    pub min_distance: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: None,
            init: InitMode::Uniform,
            seed: 0,
            block_size: 1,
            min_distance: 0,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn iterations_for(&self, free_cells: usize) -> usize {
        self.iterations.unwrap_or(100 * free_cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub free_cells: usize,
    pub updates: usize,
    pub rounds: usize,
    pub zero_mass_fallbacks: usize,
    pub block_fallbacks: usize,
}

fn draw_weighted(weights: impl Iterator<Item = f64> + Clone, total: f64, u: f64) -> usize {
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last = i;
            acc += w;
            if target < acc {
                return i;
            }
        }
    }
    last
}

/// Index into `allowed` sampled from `dist` restricted to it, given a
/// uniform `u ∈ [0, 1)`. Returns the token and whether the fallback fired.
fn sample_restricted(dist: &[f64], allowed: &[usize], u: f64) -> (usize, bool) {
    let weights = allowed.iter().map(|&k| dist[k]);
    let total: f64 = weights.clone().sum();
    if total.is_finite() && total >= ZERO_MASS {
        (allowed[draw_weighted(weights, total, u)], false)
    } else {
        let i = ((u * allowed.len() as f64) as usize).min(allowed.len() - 1);
        (allowed[i], true)
    }
}

/// Initial grid: frozen cells copied from `seed`, every other cell drawn from
/// its allowed set uniformly or by `marginals`.
pub fn init_grid(
    sizes: &[usize],
    constraints: &CellConstraints,
    mode: InitMode,
    marginals: Option<&[Vec<f64>]>,
    seed: Option<&Grid>,
    rng: &mut Rng,
) -> Result<Grid, SamplerError> {
    let (voices, len) = (constraints.voices(), constraints.len());
    if sizes.len() != voices {
        return Err(SamplerError::InvalidConfig("vocabulary count differs from voice count".into()));
    }
    if let Some(s) = seed {
        if s.voices() != voices || s.len() != len {
            return Err(SamplerError::InvalidConfig(format!(
                "seed grid is {}x{}, constraints are {voices}x{len}",
                s.voices(),
                s.len()
            )));
        }
    }
    let mut grid = Grid::new(voices, len, 0);
    for v in 0..voices {
        for t in 0..len {
            if constraints.is_frozen(v, t) {
                let s = seed.ok_or(SamplerError::MissingFrozenValue { voice: v + 1, tick: t + 1 })?;
                grid.set(v, t, s.get(v, t));
                continue;
            }
            let allowed = constraints.allowed(v, t);
            let u: f64 = rng.random();
            let k = match (mode, marginals) {
                (InitMode::Marginal, Some(m)) => sample_restricted(&m[v], allowed, u).0,
                _ => allowed[((u * allowed.len() as f64) as usize).min(allowed.len() - 1)],
            };
            grid.set(v, t, k);
        }
    }
    constraints.check_frozen(&grid)?;
    Ok(grid)
}

/// One single-site update: a uniform free cell redrawn from its conditional
/// restricted to the cell's allowed set. Returns the cell, or `None` when
/// every cell is frozen.
pub fn step(
    cond: &dyn Conditional,
    grid: &mut Grid,
    constraints: &CellConstraints,
    free: &[(usize, usize)],
    rng: &mut Rng,
    stats: &mut RunStats,
) -> Option<(usize, usize)> {
    if free.is_empty() {
        return None;
    }
    let (v, t) = free[rng.random_range(0..free.len())];
    let mut dist = vec![0.0; cond.vocab_size(v)];
    cond.distribution(grid, v, t, &mut dist);
    let (k, fallback) = sample_restricted(&dist, constraints.allowed(v, t), rng.random());
    grid.set(v, t, k);
    stats.updates += 1;
    stats.rounds += 1;
    stats.zero_mass_fallbacks += usize::from(fallback);
    Some((v, t))
}

/// Runs the sampler from `init` for `config.iterations_for(free)` updates.
///
/// With `block_size > 1` each round picks a block (see [`pick_block`]),
/// computes every member's conditional against the grid as it was at the
/// start of the round, then writes all new values. Uniforms for a round are
/// drawn up front, so parallel evaluation does not affect the result.
pub fn run(
    cond: &dyn Conditional,
    constraints: &CellConstraints,
    config: &SamplerConfig,
    init: Grid,
    rng: &mut Rng,
) -> Result<(Grid, RunStats), SamplerError> {
    run_observed(cond, constraints, config, init, rng, |_| {})
}

/// [`run`] calling `observe` with the grid after every update (sequential
/// mode) or every round (block mode).
pub fn run_observed(
    cond: &dyn Conditional,
    constraints: &CellConstraints,
    config: &SamplerConfig,
    init: Grid,
    rng: &mut Rng,
    mut observe: impl FnMut(&Grid),
) -> Result<(Grid, RunStats), SamplerError> {
    if config.block_size == 0 {
        return Err(SamplerError::InvalidConfig("block size must be at least 1".into()));
    }
    constraints.check_frozen(&init)?;
    let free = constraints.free_cells();
    let mut stats = RunStats {
        free_cells: free.len(),
        ..RunStats::default()
    };
    let total = if free.is_empty() { 0 } else { config.iterations_for(free.len()) };
    let mut grid = init;
    if config.block_size == 1 {
        while stats.updates < total {
            step(cond, &mut grid, constraints, &free, rng, &mut stats);
            observe(&grid);
        }
        return Ok((grid, stats));
    }
    while stats.updates < total {
        let pick = pick_block(&free, config.block_size, config.min_distance, rng);
        stats.block_fallbacks += usize::from(pick.fell_back);
        let mut cells = pick.cells;
        cells.truncate(total - stats.updates);
        let us: Vec<f64> = cells.iter().map(|_| rng.random()).collect();
        let snapshot = &grid;
        let draws: Vec<(usize, bool)> = cells
            .par_iter()
            .zip(&us)
            .map(|(&(v, t), &u)| {
                let mut dist = vec![0.0; cond.vocab_size(v)];
                cond.distribution(snapshot, v, t, &mut dist);
                sample_restricted(&dist, constraints.allowed(v, t), u)
            })
            .collect();
        for (&(v, t), (k, fallback)) in cells.iter().zip(draws) {
            grid.set(v, t, k);
            stats.zero_mass_fallbacks += usize::from(fallback);
        }
        stats.updates += cells.len();
        stats.rounds += 1;
        observe(&grid);
    }
    Ok((grid, stats))
}

use rand::Rng as _;

use super::DiagnosticsError;
use crate::sampler::{Conditional, Grid};

/// Largest enumerable state space.
pub const MAX_STATES: usize = 60_000;

/// Smoothing added to joint tables containing zeros.
pub const SMOOTHING: f64 = 1e-6;

/// A dependency network small enough to enumerate.
///
/// Cells are voice-major like [`Grid`] (`c = v · len + t`), and a state is
/// the base-`n` number whose digit `c` is the value of cell `c`, least
/// significant first. `tables[c][s]` is the probability that cell `c` takes
/// its value in `s` given the other cells of `s`.
#[derive(Debug, Clone)]
pub struct ToyNetwork {
    pub name: String,
    pub voices: usize,
    pub len: usize,
    pub n: usize,
    tables: Vec<Vec<f64>>,
    /// Source joint for networks derived from one (after smoothing).
    pub joint: Option<Vec<f64>>,
    /// Set when the source table had zeros and was smoothed.
    pub smoothing: Option<f64>,
}

fn state_count(voices: usize, len: usize, n: usize) -> Result<usize, DiagnosticsError> {
    let cells = (voices * len) as u32;
    match (n as u128).checked_pow(cells) {
        Some(s) if s <= MAX_STATES as u128 && n > 0 && cells > 0 => Ok(s as usize),
        Some(s) if n > 0 && cells > 0 => Err(DiagnosticsError::StateSpaceTooLarge {
            states: s.min(u64::MAX as u128) as u64,
            limit: MAX_STATES,
        }),
        None => Err(DiagnosticsError::StateSpaceTooLarge {
            states: u64::MAX,
            limit: MAX_STATES,
        }),
        _ => Err(DiagnosticsError::InvalidToy("empty toy".into())),
    }
}

fn conditionals_of(joint: &[f64], cells: usize, n: usize) -> Vec<Vec<f64>> {
    (0..cells)
        .map(|c| {
            let stride = n.pow(c as u32);
            (0..joint.len())
                .map(|s| {
                    let digit = (s / stride) % n;
                    let base = s - digit * stride;
                    let z: f64 = (0..n).map(|k| joint[base + k * stride]).sum();
                    if z > 0.0 {
                        joint[s] / z
                    } else {
                        1.0 / n as f64
                    }
                })
                .collect()
        })
        .collect()
}

fn normalized(joint: &[f64]) -> Result<(Vec<f64>, Option<f64>), DiagnosticsError> {
    if joint.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(DiagnosticsError::InvalidToy("joint has negative or non-finite entries".into()));
    }
    let smoothing = joint.contains(&0.0).then_some(SMOOTHING);
    let eps = smoothing.unwrap_or(0.0);
    let z: f64 = joint.iter().map(|p| p + eps).sum();
    if z <= 0.0 {
        return Err(DiagnosticsError::InvalidToy("joint has no mass".into()));
    }
    Ok((joint.iter().map(|p| (p + eps) / z).collect(), smoothing))
}

impl ToyNetwork {
    /// Exact conditionals of `joint` (length `n^(voices·len)`, any positive
    /// scale). Tables with zeros get [`SMOOTHING`] added to every entry first.
    pub fn from_joint(name: &str, voices: usize, len: usize, n: usize, joint: &[f64]) -> Result<Self, DiagnosticsError> {
        let states = state_count(voices, len, n)?;
        if joint.len() != states {
            return Err(DiagnosticsError::InvalidToy(format!("joint has {} entries, expected {states}", joint.len())));
        }
        let (joint, smoothing) = normalized(joint)?;
        Ok(Self {
            name: name.to_string(),
            voices,
            len,
            n,
            tables: conditionals_of(&joint, voices * len, n),
            joint: Some(joint),
            smoothing,
        })
    }

    /// Each cell's conditional taken from its own joint: `joints[c]` gives
    /// cell `c`. Distinct joints generally make the conditionals
    /// incompatible.
    pub fn from_cell_joints(name: &str, voices: usize, len: usize, n: usize, joints: &[Vec<f64>]) -> Result<Self, DiagnosticsError> {
        let states = state_count(voices, len, n)?;
        let cells = voices * len;
        if joints.len() != cells {
            return Err(DiagnosticsError::InvalidToy(format!("{} joints for {cells} cells", joints.len())));
        }
        let mut tables = Vec::with_capacity(cells);
        let mut smoothing = None;
        for (c, j) in joints.iter().enumerate() {
            if j.len() != states {
                return Err(DiagnosticsError::InvalidToy(format!("joint {c} has {} entries, expected {states}", j.len())));
            }
            let (j, s) = normalized(j)?;
            smoothing = smoothing.or(s);
            tables.push(conditionals_of(&j, cells, n).swap_remove(c));
        }
        Ok(Self {
            name: name.to_string(),
            voices,
            len,
            n,
            tables,
            joint: None,
            smoothing,
        })
    }

    /// Deterministic conditionals: cell `c` always takes `target[c]`.
    /// The chain is absorbed at `target`, which is its stationary law.
    pub fn point_mass(name: &str, voices: usize, len: usize, n: usize, target: &[usize]) -> Result<Self, DiagnosticsError> {
        let states = state_count(voices, len, n)?;
        let cells = voices * len;
        if target.len() != cells || target.iter().any(|&k| k >= n) {
            return Err(DiagnosticsError::InvalidToy("target does not fit the toy".into()));
        }
        let tables = (0..cells)
            .map(|c| {
                let stride = n.pow(c as u32);
                (0..states).map(|s| if (s / stride) % n == target[c] { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        let mut joint = vec![0.0; states];
        joint[target.iter().enumerate().map(|(c, &k)| k * n.pow(c as u32)).sum::<usize>()] = 1.0;
        Ok(Self {
            name: name.to_string(),
            voices,
            len,
            n,
            tables,
            joint: Some(joint),
            smoothing: None,
        })
    }

    /// Tabulates any [`Conditional`] with `n` values per voice over a toy
    /// of `len` ticks, e.g. a trained model restricted to a tiny vocabulary.
    pub fn tabulate(name: &str, cond: &dyn Conditional, len: usize) -> Result<Self, DiagnosticsError> {
        let voices = cond.voices();
        let n = cond.vocab_size(0);
        if (0..voices).any(|v| cond.vocab_size(v) != n) {
            return Err(DiagnosticsError::InvalidToy("voices have different vocabulary sizes".into()));
        }
        let states = state_count(voices, len, n)?;
        let cells = voices * len;
        let mut tables = vec![vec![0.0; states]; cells];
        let mut dist = vec![0.0; n];
        for s in 0..states {
            let grid = Self::grid_of(voices, len, n, s);
            for (c, table) in tables.iter_mut().enumerate() {
                let (v, t) = (c / len, c % len);
                cond.distribution(&grid, v, t, &mut dist);
                let z: f64 = dist.iter().sum();
                if !(z.is_finite() && z > 0.0) {
                    return Err(DiagnosticsError::InvalidToy(format!("conditional of cell {c} has no mass")));
                }
                table[s] = dist[grid.get(v, t)] / z;
            }
        }
        Ok(Self {
            name: name.to_string(),
            voices,
            len,
            n,
            tables,
            joint: None,
            smoothing: None,
        })
    }

    /// A joint with entries drawn uniformly from `[lo, 1]`.
    pub fn random_joint(voices: usize, len: usize, n: usize, lo: f64, seed: u64) -> Result<Vec<f64>, DiagnosticsError> {
        let states = state_count(voices, len, n)?;
        let mut rng = crate::rng_from_seed(seed);
        Ok((0..states).map(|_| rng.random_range(lo..=1.0)).collect())
    }

    pub fn cells(&self) -> usize {
        self.voices * self.len
    }

    pub fn states(&self) -> usize {
        self.tables[0].len()
    }

    pub fn digit(&self, state: usize, cell: usize) -> usize {
        (state / self.n.pow(cell as u32)) % self.n
    }

    /// `state` with cell `cell` set to `value`.
    pub fn with_digit(&self, state: usize, cell: usize, value: usize) -> usize {
        let stride = self.n.pow(cell as u32);
        state - self.digit(state, cell) * stride + value * stride
    }

    /// Probability that cell `cell` takes its value in `state` given the rest.
    pub fn conditional(&self, cell: usize, state: usize) -> f64 {
        self.tables[cell][state]
    }

    pub fn grid_of(voices: usize, len: usize, n: usize, state: usize) -> Grid {
        let mut s = state;
        let cells = (0..voices * len)
            .map(|_| {
                let d = s % n;
                s /= n;
                d
            })
            .collect();
        Grid::from_cells(voices, len, cells)
    }

    pub fn grid(&self, state: usize) -> Grid {
        Self::grid_of(self.voices, self.len, self.n, state)
    }

    pub fn state_of(&self, grid: &Grid) -> usize {
        grid.cells().iter().rev().fold(0, |acc, &d| acc * self.n + d)
    }
}

impl Conditional for ToyNetwork {
    fn voices(&self) -> usize {
        self.voices
    }

    fn vocab_size(&self, _voice: usize) -> usize {
        self.n
    }

    fn distribution(&self, grid: &Grid, voice: usize, t: usize, out: &mut [f64]) {
        let c = voice * self.len + t;
        let s = self.state_of(grid);
        for (k, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.tables[c][self.with_digit(s, c, k)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditionals_match_joint_by_enumeration() {
        let joint = ToyNetwork::random_joint(2, 2, 3, 0.1, 5).unwrap();
        let toy = ToyNetwork::from_joint("r", 2, 2, 3, &joint).unwrap();
        let z: f64 = joint.iter().sum();
        let p: Vec<f64> = joint.iter().map(|x| x / z).collect();
        for s in 0..toy.states() {
            for c in 0..toy.cells() {
                let den: f64 = (0..3).map(|k| p[toy.with_digit(s, c, k)]).sum();
                assert!((toy.conditional(c, s) - p[s] / den).abs() < 1e-14);
            }
        }
        assert!(toy.smoothing.is_none());
    }

    #[test]
    fn zeros_are_smoothed_and_disclosed() {
        let toy = ToyNetwork::from_joint("z", 1, 2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(toy.smoothing, Some(SMOOTHING));
        assert!((0..4).all(|s| (0..2).all(|c| toy.conditional(c, s) > 0.0)));
    }

    #[test]
    fn state_grid_round_trip_and_bounds() {
        let toy = ToyNetwork::from_joint("u", 2, 3, 3, &[1.0; 729]).unwrap();
        for s in [0, 1, 17, 500, 728] {
            assert_eq!(toy.state_of(&toy.grid(s)), s);
        }
        let g = toy.grid(5);
        assert_eq!((g.get(0, 0), g.get(0, 1)), (2, 1));
        assert!(matches!(
            ToyNetwork::from_joint("big", 2, 6, 3, &[]),
            Err(DiagnosticsError::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn tabulating_a_toy_reproduces_it() {
        let joint = ToyNetwork::random_joint(2, 1, 3, 0.2, 9).unwrap();
        let toy = ToyNetwork::from_joint("r", 2, 1, 3, &joint).unwrap();
        let copy = ToyNetwork::tabulate("copy", &toy, 1).unwrap();
        for (a, b) in copy.tables.iter().flatten().zip(toy.tables.iter().flatten()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

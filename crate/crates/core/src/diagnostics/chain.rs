use nalgebra::{DMatrix, DVector};

use super::toy::ToyNetwork;
use super::DiagnosticsError;

/// Largest chain solved exactly by LU decomposition.
pub const EXACT_LIMIT: usize = 2048;
/// L1 change between power iterates at which iteration stops.
pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 1_000_000;

/// Transition matrix of the random-scan single-site chain of a toy.
#[derive(Debug, Clone)]
pub struct ChainMatrix {
    /// Sparse rows as `(target state, probability)`, targets ascending.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Power-iteration estimate of the stationary law.
    pub stationary: Vec<f64>,
    pub power_iterations: usize,
    pub power_converged: bool,
    /// Stationary law from a direct linear solve, when small enough.
    pub exact: Option<Vec<f64>>,
}

impl ChainMatrix {
    pub fn states(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        let row = &self.rows[from];
        row.binary_search_by_key(&to, |e| e.0).map_or(0.0, |i| row[i].1)
    }

    /// Exact law when available, else the power-iteration estimate.
    pub fn best_stationary(&self) -> &[f64] {
        self.exact.as_deref().unwrap_or(&self.stationary)
    }

    pub fn max_row_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().map(|e| e.1).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn step(&self, pi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (s, row) in self.rows.iter().enumerate() {
            if pi[s] != 0.0 {
                for &(t, p) in row {
                    out[t] += pi[s] * p;
                }
            }
        }
    }
}

/// Row `s`: pick a cell uniformly, redraw it from its conditional.
pub fn build_chain(toy: &ToyNetwork) -> Result<ChainMatrix, DiagnosticsError> {
    let states = toy.states();
    if states > super::toy::MAX_STATES {
        return Err(DiagnosticsError::StateSpaceTooLarge {
            states: states as u64,
            limit: super::toy::MAX_STATES,
        });
    }
    let cells = toy.cells();
    let w = 1.0 / cells as f64;
    let rows: Vec<Vec<(usize, f64)>> = (0..states)
        .map(|s| {
            let mut row = Vec::with_capacity(cells * (toy.n - 1) + 1);
            let mut stay = 0.0;
            for c in 0..cells {
                for k in 0..toy.n {
                    let t = toy.with_digit(s, c, k);
                    let p = w * toy.conditional(c, t);
                    if t == s {
                        stay += p;
                    } else if p > 0.0 {
                        row.push((t, p));
                    }
                }
            }
            row.push((s, stay));
            row.sort_by_key(|e| e.0);
            row
        })
        .collect();
    let mut chain = ChainMatrix {
        rows,
        stationary: Vec::new(),
        power_iterations: 0,
        power_converged: false,
        exact: None,
    };
    let mut pi = vec![1.0 / states as f64; states];
    let mut next = vec![0.0; states];
    while chain.power_iterations < POWER_MAX_ITERATIONS {
        chain.step(&pi, &mut next);
        chain.power_iterations += 1;
        let z: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= z);
        let delta: f64 = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if delta < POWER_TOLERANCE {
            chain.power_converged = true;
            break;
        }
    }
    chain.stationary = pi;
    if states <= EXACT_LIMIT {
        chain.exact = exact_stationary(&chain);
    }
    Ok(chain)
}

/// Solves `π (P − I) = 0` with the last balance equation replaced by
/// `Σ π = 1`.
fn exact_stationary(chain: &ChainMatrix) -> Option<Vec<f64>> {
    let n = chain.states();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (s, row) in chain.rows.iter().enumerate() {
        for &(t, p) in row {
            a[(t, s)] += p;
        }
        a[(s, s)] -= 1.0;
    }
    for s in 0..n {
        a[(n - 1, s)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b)?;
    Some(x.iter().map(|v| v.max(0.0)).collect())
}

/// Half the L1 distance.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_chain() {
        let toy = ToyNetwork::from_joint("one", 1, 1, 2, &[0.3, 0.7]).unwrap();
        let chain = build_chain(&toy).unwrap();
        for s in 0..2 {
            assert!((chain.get(s, 0) - 0.3).abs() < 1e-15);
            assert!((chain.get(s, 1) - 0.7).abs() < 1e-15);
        }
        let exact = chain.exact.as_ref().unwrap();
        assert!((exact[0] - 0.3).abs() < 1e-12 && (exact[1] - 0.7).abs() < 1e-12);
        assert!(chain.power_converged);
    }

    #[test]
    fn uniform_joint_gives_uniform_stationary() {
        let toy = ToyNetwork::from_joint("u", 2, 2, 3, &[1.0; 81]).unwrap();
        let chain = build_chain(&toy).unwrap();
        assert!(chain.max_row_error() < 1e-12);
        assert!(chain.stationary.iter().all(|p| (p - 1.0 / 81.0).abs() < 1e-12));
    }

    #[test]
    fn two_by_two_joint_is_stationary() {
        let joint = [0.1, 0.2, 0.3, 0.4];
        let toy = ToyNetwork::from_joint("j", 2, 1, 2, &joint).unwrap();
        let chain = build_chain(&toy).unwrap();
        assert!(total_variation(chain.exact.as_ref().unwrap(), &joint) < 1e-10);
        assert!(total_variation(&chain.stationary, &joint) < 1e-10);
        // the transition written out by hand: from state 0 = (0, 0)
        let p00 = 0.5 * (0.1 / 0.3) + 0.5 * (0.1 / 0.4);
        assert!((chain.get(0, 0) - p00).abs() < 1e-15);
        assert!((chain.get(0, 1) - 0.5 * (0.2 / 0.3)).abs() < 1e-15);
        assert!((chain.get(0, 2) - 0.5 * (0.3 / 0.4)).abs() < 1e-15);
        assert_eq!(chain.get(0, 3), 0.0);
    }

    #[test]
    fn point_mass_absorbs() {
        let toy = ToyNetwork::point_mass("pm", 1, 3, 2, &[1, 0, 1]).unwrap();
        let chain = build_chain(&toy).unwrap();
        let target = 1 + 4;
        assert!(chain.power_converged);
        assert!((chain.best_stationary()[target] - 1.0).abs() < 1e-12);
    }
}

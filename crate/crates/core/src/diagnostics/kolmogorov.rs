use rand::seq::SliceRandom;
use rand::Rng as _;

use super::chain::ChainMatrix;
use super::toy::ToyNetwork;

/// Relative tolerance on cycle products and detailed balance.
pub const RELATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    /// `s1 → s2 → … → sk → s1`; the closing edge is implied.
    pub cycle: Vec<usize>,
    pub forward: f64,
    pub backward: f64,
}

impl Witness {
    pub fn deviation(&self) -> f64 {
        relative_gap(self.forward, self.backward)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KolmogorovReport {
    pub reversible: bool,
    pub witness: Option<Witness>,
    pub cycles_checked: usize,
    /// Largest relative cycle-product gap seen.
    pub max_deviation: f64,
    /// Largest relative gap in `π_s P(s, s') = π_s' P(s', s)` over edges.
    pub detailed_balance_deviation: f64,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

fn products(chain: &ChainMatrix, cycle: &[usize]) -> (f64, f64) {
    let k = cycle.len();
    let mut f = 1.0;
    let mut b = 1.0;
    for i in 0..k {
        let (x, y) = (cycle[i], cycle[(i + 1) % k]);
        f *= chain.get(x, y);
        b *= chain.get(y, x);
    }
    (f, b)
}

struct Scan<'a> {
    chain: &'a ChainMatrix,
    checked: usize,
    max_deviation: f64,
    witness: Option<Witness>,
}

impl Scan<'_> {
    fn check(&mut self, cycle: Vec<usize>) {
        let (forward, backward) = products(self.chain, &cycle);
        self.checked += 1;
        let d = relative_gap(forward, backward);
        if d > self.max_deviation {
            self.max_deviation = d;
            if d > RELATIVE_TOLERANCE {
                self.witness = Some(Witness { cycle, forward, backward });
            }
        }
    }
}

/// Tests the chain for reversibility.
///
/// Every 3-cycle and 4-cycle of the single-site move graph is checked: three
/// or four values of one cell, or two values each of two cells. These cycles
/// generate the cycle space of the move graph, so on a chain whose positive
/// moves are symmetric the criterion is decided exactly. `cycle_budget`
/// further random closed walks (flip up to `n_cells` cells, undo them in a
/// shuffled order) are checked afterwards, from `seed`.
pub fn kolmogorov_check(toy: &ToyNetwork, chain: &ChainMatrix, cycle_budget: usize, seed: u64) -> KolmogorovReport {
    let mut scan = Scan {
        chain,
        checked: 0,
        max_deviation: 0.0,
        witness: None,
    };
    let (n, cells) = (toy.n, toy.cells());
    for s in 0..chain.states() {
        for c in 0..cells {
            let a = toy.digit(s, c);
            // enumerate each cell line once, from its smallest value
            if a != 0 {
                continue;
            }
            let line: Vec<usize> = (0..n).map(|k| toy.with_digit(s, c, k)).collect();
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        scan.check(vec![line[i], line[j], line[k]]);
                        for l in k + 1..n {
                            scan.check(vec![line[i], line[j], line[k], line[l]]);
                            scan.check(vec![line[i], line[j], line[l], line[k]]);
                            scan.check(vec![line[i], line[k], line[j], line[l]]);
                        }
                    }
                }
            }
            for c2 in c + 1..cells {
                if toy.digit(s, c2) != 0 {
                    continue;
                }
                // corners (x, y), (x2, y), (x2, y2), (x, y2) with x < x2, y < y2
                for x in 0..n {
                    for x2 in x + 1..n {
                        for y in 0..n {
                            for y2 in y + 1..n {
                                let base = toy.with_digit(toy.with_digit(s, c, x), c2, y);
                                let p1 = toy.with_digit(base, c, x2);
                                let p2 = toy.with_digit(p1, c2, y2);
                                let p3 = toy.with_digit(base, c2, y2);
                                scan.check(vec![base, p1, p2, p3]);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut rng = crate::rng_from_seed(seed);
    if n > 1 && cells > 1 {
        for _ in 0..cycle_budget {
            let start = rng.random_range(0..chain.states());
            let mut order: Vec<usize> = (0..cells).collect();
            order.shuffle(&mut rng);
            order.truncate(rng.random_range(2..=cells));
            let mut cycle = vec![start];
            let mut s = start;
            for &c in &order {
                let d = toy.digit(s, c);
                s = toy.with_digit(s, c, (d + rng.random_range(1..n)) % n);
                cycle.push(s);
            }
            order.shuffle(&mut rng);
            for &c in &order[..order.len() - 1] {
                s = toy.with_digit(s, c, toy.digit(start, c));
                cycle.push(s);
            }
            scan.check(cycle);
        }
    }
    let pi = chain.best_stationary();
    let mut db = 0.0f64;
    for (s, row) in chain.rows.iter().enumerate() {
        for &(t, p) in row {
            if t > s {
                db = db.max(relative_gap(pi[s] * p, pi[t] * chain.get(t, s)));
            }
        }
    }
    KolmogorovReport {
        reversible: scan.witness.is_none(),
        witness: scan.witness,
        cycles_checked: scan.checked,
        max_deviation: scan.max_deviation,
        detailed_balance_deviation: db,
    }
}

/// Recomputes a witness's products from the toy's conditionals directly,
/// without the chain. Returns the relative gap, or `None` when some step is
/// not a single-site move.
pub fn verify_witness(toy: &ToyNetwork, witness: &Witness) -> Option<f64> {
    let k = witness.cycle.len();
    if k < 3 {
        return None;
    }
    let move_prob = |from: usize, to: usize| -> Option<f64> {
        let changed: Vec<usize> = (0..toy.cells()).filter(|&c| toy.digit(from, c) != toy.digit(to, c)).collect();
        match changed[..] {
            [c] => Some(toy.conditional(c, to) / toy.cells() as f64),
            _ => None,
        }
    };
    let mut f = 1.0;
    let mut b = 1.0;
    for i in 0..k {
        let (x, y) = (witness.cycle[i], witness.cycle[(i + 1) % k]);
        f *= move_prob(x, y)?;
        b *= move_prob(y, x)?;
    }
    Some(relative_gap(f, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::build_chain;

    fn incompatible() -> ToyNetwork {
        ToyNetwork::from_cell_joints("inc", 2, 1, 2, &[vec![0.4, 0.1, 0.2, 0.3], vec![0.1, 0.4, 0.3, 0.2]]).unwrap()
    }

    #[test]
    fn compatible_toys_are_reversible() {
        for seed in 0..4 {
            let joint = ToyNetwork::random_joint(2, 2, 3, 0.05, seed).unwrap();
            let toy = ToyNetwork::from_joint("r", 2, 2, 3, &joint).unwrap();
            let chain = build_chain(&toy).unwrap();
            let r = kolmogorov_check(&toy, &chain, 500, seed);
            assert!(r.reversible, "{r:?}");
            assert!(r.detailed_balance_deviation < 1e-9);
        }
    }

    #[test]
    fn incompatible_pair_has_a_verified_witness() {
        let toy = incompatible();
        let chain = build_chain(&toy).unwrap();
        let r = kolmogorov_check(&toy, &chain, 0, 0);
        assert!(!r.reversible);
        let w = r.witness.unwrap();
        assert_eq!(w.cycle.len(), 4);
        // by hand: cell 0 from J1, cell 1 from J2, states (x0, x1) = x0 + 2 x1
        let p = |a: f64, b: f64| 0.5 * a / b;
        let forward = p(0.1, 0.5) * p(0.2, 0.6) * p(0.2, 0.5) * p(0.1, 0.4);
        let backward = p(0.3, 0.4) * p(0.3, 0.5) * p(0.4, 0.6) * p(0.4, 0.5);
        let expected = (forward - backward).abs() / forward.max(backward);
        let got = verify_witness(&toy, &w).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!(got > 1e-3);
    }

    #[test]
    fn point_mass_is_reversible() {
        let toy = ToyNetwork::point_mass("pm", 2, 2, 3, &[0, 1, 2, 0]).unwrap();
        let chain = build_chain(&toy).unwrap();
        assert!(kolmogorov_check(&toy, &chain, 200, 1).reversible);
    }

    #[test]
    fn exhaustive_count_on_a_small_space() {
        // one cell line of 3 values: a single triangle; two binary cells: one square
        let toy = ToyNetwork::from_joint("u", 1, 1, 3, &[1.0; 3]).unwrap();
        assert_eq!(kolmogorov_check(&toy, &build_chain(&toy).unwrap(), 0, 0).cycles_checked, 1);
        let toy = ToyNetwork::from_joint("u", 1, 2, 2, &[1.0; 4]).unwrap();
        assert_eq!(kolmogorov_check(&toy, &build_chain(&toy).unwrap(), 0, 0).cycles_checked, 1);
    }
}

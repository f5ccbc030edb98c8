use rand::Rng as _;

use crate::Rng;

/// Proposals tried per block size before falling back to a smaller one.
pub const REJECTION_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPick {
    /// `(voice, tick)` pairs, 0-based.
    pub cells: Vec<(usize, usize)>,
    /// Set when the requested size was infeasible within the budget.
    pub fell_back: bool,
}

/// Draws up to `block_size` cells from `free` (0-based `(voice, tick)`)
/// whose ticks are pairwise at least `min_distance` apart.
///
/// Each proposal is `block_size` independent uniform draws from `free`; a
/// proposal is kept when every pair of ticks satisfies the distance rule.
/// Hence every admissible set of cells is returned with equal probability,
/// and with `block_size = 1` the law is a uniform free cell. With
/// `min_distance = 0` repeated cells are possible; the later update wins.
/// After [`REJECTION_BUDGET`] failed proposals the size drops by one.
pub fn pick_block(free: &[(usize, usize)], block_size: usize, min_distance: usize, rng: &mut Rng) -> BlockPick {
    if free.is_empty() || block_size == 0 {
        return BlockPick {
            cells: Vec::new(),
            fell_back: block_size > 0,
        };
    }
    let mut size = block_size;
    let mut fell_back = false;
    loop {
        for _ in 0..REJECTION_BUDGET {
            let cells: Vec<(usize, usize)> = (0..size).map(|_| free[rng.random_range(0..free.len())]).collect();
            let ok = cells
                .iter()
                .enumerate()
                .all(|(i, a)| cells[i + 1..].iter().all(|b| a.1.abs_diff(b.1) >= min_distance));
            if ok {
                return BlockPick { cells, fell_back };
            }
        }
        fell_back = true;
        size -= 1;
        debug_assert!(size >= 1, "a single cell is always admissible");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn ticks(len: usize) -> Vec<(usize, usize)> {
        (0..len).map(|t| (0, t)).collect()
    }

    #[test]
    fn pairs_respect_distance_and_cover_all_valid() {
        let mut rng = crate::rng_from_seed(1);
        let free = ticks(10);
        let mut seen = BTreeMap::new();
        for _ in 0..20_000 {
            let b = pick_block(&free, 2, 5, &mut rng);
            assert!(!b.fell_back);
            let (a, c) = (b.cells[0].1, b.cells[1].1);
            assert!(a.abs_diff(c) >= 5);
            *seen.entry((a.min(c), a.max(c))).or_insert(0) += 1;
        }
        assert_eq!(seen.len(), 15);
    }

    #[test]
    fn infeasible_size_falls_back() {
        let mut rng = crate::rng_from_seed(2);
        let b = pick_block(&ticks(6), 3, 4, &mut rng);
        assert!(b.fell_back);
        assert_eq!(b.cells.len(), 2);
        assert!(b.cells[0].1.abs_diff(b.cells[1].1) >= 4);
    }

    #[test]
    fn zero_distance_allows_repeats() {
        let mut rng = crate::rng_from_seed(3);
        let free = ticks(2);
        let repeats = (0..1000)
            .filter(|_| {
                let b = pick_block(&free, 2, 0, &mut rng);
                b.cells[0] == b.cells[1]
            })
            .count();
        assert!(repeats > 400 && repeats < 600);
    }
}

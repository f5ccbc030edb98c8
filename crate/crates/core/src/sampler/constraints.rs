use super::{Grid, SamplerError};

/// Allowed index set and frozen flag for every cell of a grid.
///
/// Positions in errors are reported 1-based for both voice and tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellConstraints {
    voices: usize,
    len: usize,
    /// Sorted, non-empty, per cell.
    allowed: Vec<Vec<usize>>,
    frozen: Vec<bool>,
}

impl CellConstraints {
    /// Every cell free, allowed sets from `allowed_for(voice, t)`.
    pub fn new(
        voices: usize,
        len: usize,
        mut allowed_for: impl FnMut(usize, usize) -> Vec<usize>,
    ) -> Result<Self, SamplerError> {
        let mut allowed = Vec::with_capacity(voices * len);
        for v in 0..voices {
            for t in 0..len {
                let mut a = allowed_for(v, t);
                a.sort_unstable();
                a.dedup();
                if a.is_empty() {
                    return Err(SamplerError::EmptyAllowedSet { voice: v + 1, tick: t + 1 });
                }
                allowed.push(a);
            }
        }
        Ok(Self {
            voices,
            len,
            allowed,
            frozen: vec![false; voices * len],
        })
    }

    /// Toy-network constraints: all `sizes[v]` tokens allowed everywhere.
    pub fn unconstrained(sizes: &[usize], len: usize) -> Self {
        Self::new(sizes.len(), len, |v, _| (0..sizes[v]).collect()).expect("sizes are positive")
    }

    pub fn voices(&self) -> usize {
        self.voices
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn at(&self, voice: usize, t: usize) -> usize {
        voice * self.len + t
    }

    pub fn allowed(&self, voice: usize, t: usize) -> &[usize] {
        &self.allowed[self.at(voice, t)]
    }

    /// Intersects a cell's allowed set with `subset`.
    pub fn restrict(&mut self, voice: usize, t: usize, subset: &[usize]) -> Result<(), SamplerError> {
        let i = self.at(voice, t);
        self.allowed[i].retain(|k| subset.contains(k));
        if self.allowed[i].is_empty() {
            return Err(SamplerError::EmptyAllowedSet { voice: voice + 1, tick: t + 1 });
        }
        Ok(())
    }

    pub fn freeze(&mut self, voice: usize, t: usize) {
        let i = self.at(voice, t);
        self.frozen[i] = true;
    }

    pub fn is_frozen(&self, voice: usize, t: usize) -> bool {
        self.frozen[self.at(voice, t)]
    }

    /// Non-frozen cells in voice-major order.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        (0..self.voices)
            .flat_map(|v| (0..self.len).map(move |t| (v, t)))
            .filter(|&(v, t)| !self.is_frozen(v, t))
            .collect()
    }

    /// Frozen-cell values must lie in their allowed sets.
    pub fn check_frozen(&self, grid: &Grid) -> Result<(), SamplerError> {
        for v in 0..self.voices {
            for t in 0..self.len {
                if self.is_frozen(v, t) && !self.allowed(v, t).contains(&grid.get(v, t)) {
                    return Err(SamplerError::FrozenOutsideAllowed { voice: v + 1, tick: t + 1 });
                }
            }
        }
        Ok(())
    }
}

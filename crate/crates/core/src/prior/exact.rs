//! Exhaustive enumeration of every grid of a tiny shape.

use super::PriorModel;
use crate::error::{Error, Result};
use crate::grid::{GridShape, SemanticGrid, TokenGrid};
use crate::guidance::{rebalance_prior, LikelihoodTable};

/// Largest number of grids [`exact_sequence_distribution`] will enumerate.
pub const MAX_EXACT_STATES: u64 = 1_000_000;

/// Probability of every grid of one shape.
///
/// Grids are indexed by their tokens read in raster order as base-`|Z|`
/// digits, most significant first.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    shape: GridShape,
    codebook_size: usize,
    probs: Vec<f64>,
}

impl ExactDistribution {
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Index of a token sequence, or `None` if it does not fit this shape.
    pub fn index_of(&self, tokens: &[u32]) -> Option<usize> {
        if tokens.len() != self.shape.len() {
            return None;
        }
        tokens.iter().try_fold(0usize, |acc, &t| {
            ((t as usize) < self.codebook_size).then(|| acc * self.codebook_size + t as usize)
        })
    }

    /// Token sequence of grid `index`.
    pub fn tokens_of(&self, mut index: usize) -> Vec<u32> {
        let mut out = vec![0u32; self.shape.len()];
        for slot in out.iter_mut().rev() {
            *slot = (index % self.codebook_size) as u32;
            index /= self.codebook_size;
        }
        out
    }

    pub fn prob(&self, grid: &TokenGrid) -> f64 {
        if grid.shape() != self.shape || grid.codebook_size() != self.codebook_size {
            return 0.0;
        }
        self.index_of(grid.tokens()).map_or(0.0, |i| self.probs[i])
    }

    /// `(tokens, probability)` for every grid.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<u32>, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (self.tokens_of(i), p))
    }
}

/// Chain-rule probability of every `height × width` grid under `model`,
/// with each step's distribution optionally re-balanced by `guidance`.
pub fn exact_sequence_distribution(
    model: &(impl PriorModel + ?Sized),
    height: usize,
    width: usize,
    semantics: Option<&SemanticGrid>,
    guidance: Option<&LikelihoodTable>,
) -> Result<ExactDistribution> {
    let shape = GridShape::new(height, width)?;
    let z = model.codebook_size();
    let states = u32::try_from(shape.len())
        .ok()
        .and_then(|n| (z as u64).checked_pow(n))
        .filter(|&s| s <= MAX_EXACT_STATES)
        .ok_or_else(|| {
            Error::invalid(format!(
                "{z}^{} grids exceed the enumeration bound of {MAX_EXACT_STATES}",
                shape.len()
            ))
        })?;
    if let Some(table) = guidance {
        if table.codebook_size() != z {
            return Err(Error::CodebookMismatch {
                expected: z,
                found: table.codebook_size(),
            });
        }
    }
    let mut probs = vec![0.0; states as usize];
    let mut prefix = Vec::with_capacity(shape.len());
    let mut walker = Walker {
        model,
        shape,
        semantics,
        guidance,
        probs: &mut probs,
    };
    walker.descend(&mut prefix, 1.0, 0)?;
    Ok(ExactDistribution {
        shape,
        codebook_size: z,
        probs,
    })
}

struct Walker<'a, M: PriorModel + ?Sized> {
    model: &'a M,
    shape: GridShape,
    semantics: Option<&'a SemanticGrid>,
    guidance: Option<&'a LikelihoodTable>,
    probs: &'a mut [f64],
}

impl<M: PriorModel + ?Sized> Walker<'_, M> {
    fn descend(&mut self, prefix: &mut Vec<u32>, mass: f64, index: usize) -> Result<()> {
        if prefix.len() == self.shape.len() {
            self.probs[index] = mass;
            return Ok(());
        }
        let pos = self.shape.position(prefix.len());
        let mut step = self
            .model
            .next_distribution(prefix, self.shape, pos, self.semantics)?;
        if let Some(table) = self.guidance {
            let lik = table.select(self.shape, pos.0, pos.1, self.semantics)?;
            step = rebalance_prior(&step, lik)?;
        }
        let z = self.model.codebook_size();
        for (t, &p) in step.probs().iter().enumerate() {
            let child = index * z + t;
            if p == 0.0 {
                continue;
            }
            prefix.push(t as u32);
            self.descend(prefix, mass * p, child)?;
            prefix.pop();
        }
        Ok(())
    }
}

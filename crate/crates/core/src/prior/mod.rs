//! Autoregressive priors over raster-ordered token grids.
//!
//! A [`PriorModel`] maps a generated prefix to the distribution of the next
//! token. [`MarkovGridPrior`] is a count-based model over a small causal
//! neighbourhood; [`exact_sequence_distribution`] enumerates every grid of a
//! tiny shape and serves as the reference for sampler tests.

mod exact;
mod markov;

pub use exact::{exact_sequence_distribution, ExactDistribution, MAX_EXACT_STATES};
pub use markov::{train_markov_prior, ContextOffset, ContextSymbol, MarkovGridPrior};

use crate::categorical::CategoricalDistribution;
use crate::error::{Error, Result};
use crate::grid::{GridShape, SemanticGrid};

/// Next-token distributions given everything generated so far.
pub trait PriorModel: Sync {
    fn codebook_size(&self) -> usize;

    /// True when the model reads the semantic label at the current position.
    fn is_conditional(&self) -> bool;

    /// Distribution of the token at `position`, where `prefix` holds the
    /// tokens of every earlier raster position of a `shape` grid.
    fn next_distribution(
        &self,
        prefix: &[u32],
        shape: GridShape,
        position: (usize, usize),
        semantics: Option<&SemanticGrid>,
    ) -> Result<CategoricalDistribution>;
}

/// Common argument checks for [`PriorModel::next_distribution`].
pub(crate) fn check_query(
    model: &(impl PriorModel + ?Sized),
    prefix: &[u32],
    shape: GridShape,
    (row, col): (usize, usize),
    semantics: Option<&SemanticGrid>,
) -> Result<()> {
    if !shape.contains(row, col) {
        return Err(Error::invalid(format!(
            "position ({row},{col}) outside a {}x{} grid",
            shape.height, shape.width
        )));
    }
    if shape.index(row, col) != prefix.len() {
        let (er, ec) = shape.position(prefix.len());
        return Err(Error::invalid(format!(
            "position mismatch: prefix of {} tokens expects ({er},{ec}), got ({row},{col})",
            prefix.len()
        )));
    }
    if model.is_conditional() {
        semantics
            .ok_or_else(|| Error::invalid("conditional prior requires a semantic map"))?
            .ensure_covers(shape)?;
    }
    Ok(())
}

/// Uniform next-token distribution regardless of context.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformPrior {
    dist: CategoricalDistribution,
}

impl UniformPrior {
    pub fn new(codebook_size: usize) -> Result<Self> {
        Ok(Self {
            dist: CategoricalDistribution::uniform(codebook_size)?,
        })
    }
}

impl PriorModel for UniformPrior {
    fn codebook_size(&self) -> usize {
        self.dist.codebook_size()
    }

    fn is_conditional(&self) -> bool {
        false
    }

    fn next_distribution(
        &self,
        prefix: &[u32],
        shape: GridShape,
        position: (usize, usize),
        semantics: Option<&SemanticGrid>,
    ) -> Result<CategoricalDistribution> {
        check_query(self, prefix, shape, position, semantics)?;
        Ok(self.dist.clone())
    }
}

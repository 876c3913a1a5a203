//! The autoregressive generation loop.
//!
//! Each raster position takes the prior's next-token distribution, applies
//! guidance, then temperature, then top-k truncation, and draws one token by
//! inverse CDF from a single uniform variate.

use std::sync::Arc;

use crate::categorical::CategoricalDistribution;
use crate::error::{Error, Result};
use crate::grid::{GridShape, SemanticGrid, TokenGrid};
use crate::guidance::{rebalance_prior, LikelihoodTable};
use crate::prior::PriorModel;
use crate::rng::{derive_seed, inverse_cdf, Stream};

#[derive(Debug, Clone)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_k: Option<usize>,
    pub seed: u64,
    pub guidance: Option<Arc<LikelihoodTable>>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_k: None,
            seed: 0,
            guidance: None,
        }
    }
}

impl SamplingConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn guided(mut self, table: LikelihoodTable) -> Self {
        self.guidance = Some(Arc::new(table));
        self
    }

    pub fn validate(&self, codebook_size: usize) -> Result<()> {
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if let Some(k) = self.top_k {
            if k == 0 || k > codebook_size {
                return Err(Error::invalid(format!(
                    "top-k must lie in [1, {codebook_size}], got {k}"
                )));
            }
        }
        if let Some(table) = &self.guidance {
            if table.codebook_size() != codebook_size {
                return Err(Error::CodebookMismatch {
                    expected: codebook_size,
                    found: table.codebook_size(),
                });
            }
        }
        Ok(())
    }
}

/// Raises probabilities to `1 / temperature` and renormalizes.
pub fn apply_temperature(dist: &CategoricalDistribution, temperature: f64) -> Result<CategoricalDistribution> {
    if temperature == 1.0 {
        return Ok(dist.clone());
    }
    let max = dist.probs().iter().copied().fold(0.0, f64::max);
    let inv = 1.0 / temperature;
    let scaled: Vec<f64> = dist.probs().iter().map(|p| (p / max).powf(inv)).collect();
    CategoricalDistribution::normalize(&scaled)
}

/// Keeps the `k` most probable entries (lower index wins ties) and
/// renormalizes.
pub fn apply_top_k(dist: &CategoricalDistribution, k: usize) -> Result<CategoricalDistribution> {
    let probs = dist.probs();
    if k >= probs.len() {
        return Ok(dist.clone());
    }
    if k == 0 {
        return Err(Error::invalid("top-k must be at least 1"));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    let mut kept = vec![0.0; probs.len()];
    for &i in &order[..k] {
        kept[i] = probs[i];
    }
    CategoricalDistribution::normalize(&kept)
}

/// Guidance, temperature and top-k applied to one step's prior.
pub fn step_posterior(
    prior: &CategoricalDistribution,
    config: &SamplingConfig,
    shape: GridShape,
    position: (usize, usize),
    semantics: Option<&SemanticGrid>,
) -> Result<CategoricalDistribution> {
    let mut dist = match &config.guidance {
        Some(table) => {
            let lik = table.select(shape, position.0, position.1, semantics)?;
            rebalance_prior(prior, lik)?
        }
        None => prior.clone(),
    };
    dist = apply_temperature(&dist, config.temperature)?;
    if let Some(k) = config.top_k {
        dist = apply_top_k(&dist, k)?;
    }
    Ok(dist)
}

/// Generates one grid in raster order from `config.seed`.
pub fn sample_grid(
    model: &(impl PriorModel + ?Sized),
    shape: GridShape,
    semantics: Option<&SemanticGrid>,
    config: &SamplingConfig,
) -> Result<TokenGrid> {
    let z = model.codebook_size();
    config.validate(z)?;
    if let Some(sem) = semantics {
        sem.ensure_covers(shape)?;
    }
    let mut stream = Stream::new(config.seed);
    let mut tokens = Vec::with_capacity(shape.len());
    for i in 0..shape.len() {
        let pos = shape.position(i);
        let prior = model.next_distribution(&tokens, shape, pos, semantics)?;
        let post = step_posterior(&prior, config, shape, pos, semantics)?;
        tokens.push(inverse_cdf(post.probs(), stream.next_f64()) as u32);
    }
    TokenGrid::new(shape.height, shape.width, z, tokens)
}

/// Seed used for sample `index` of a batch.
pub fn batch_seed(base_seed: u64, index: usize) -> u64 {
    derive_seed(base_seed, index as u64)
}

/// `n` grids; grid `i` is [`sample_grid`] under [`batch_seed`]`(seed, i)`.
pub fn batch_sample(
    model: &(impl PriorModel + ?Sized),
    shape: GridShape,
    semantics: Option<&SemanticGrid>,
    config: &SamplingConfig,
    n: usize,
) -> Result<Vec<TokenGrid>> {
    if n == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    config.validate(model.codebook_size())?;
    let one = |i: usize| {
        let cfg = SamplingConfig {
            seed: batch_seed(config.seed, i),
            ..config.clone()
        };
        sample_grid(model, shape, semantics, &cfg)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(one).collect()
    }
}

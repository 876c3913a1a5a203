//! Normalized probability vectors over codebook indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of the probability sum from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A probability vector over `codebook_size` indices.
///
/// `source_mass` is the number of observations behind an estimate (0 for
/// analytic distributions). Averaging can weight by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRecord", into = "DistributionRecord")]
pub struct CategoricalDistribution {
    probs: Vec<f64>,
    source_mass: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionRecord {
    codebook_size: usize,
    probs: Vec<f64>,
    source_mass: f64,
}

impl TryFrom<DistributionRecord> for CategoricalDistribution {
    type Error = Error;

    fn try_from(rec: DistributionRecord) -> Result<Self> {
        if rec.probs.len() != rec.codebook_size {
            return Err(Error::LengthMismatch {
                expected: rec.codebook_size,
                found: rec.probs.len(),
            });
        }
        Self::from_probs(rec.probs, rec.source_mass)
    }
}

impl From<CategoricalDistribution> for DistributionRecord {
    fn from(d: CategoricalDistribution) -> Self {
        Self {
            codebook_size: d.probs.len(),
            probs: d.probs,
            source_mass: d.source_mass,
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<f64> {
    if weights.len() < 2 {
        return Err(Error::invalid(format!(
            "codebook size must be at least 2, got {}",
            weights.len()
        )));
    }
    let mut total = 0.0;
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidWeight { index, value });
        }
        total += value;
    }
    if total <= 0.0 {
        return Err(Error::ZeroMass);
    }
    if !total.is_finite() {
        return Err(Error::invalid("total mass overflows"));
    }
    Ok(total)
}

impl CategoricalDistribution {
    /// Scales non-negative `weights` to sum to one.
    pub fn normalize(weights: &[f64]) -> Result<Self> {
        Self::normalize_with_mass(weights, 0.0)
    }

    pub fn normalize_with_mass(weights: &[f64], source_mass: f64) -> Result<Self> {
        let total = check_weights(weights)?;
        check_mass(source_mass)?;
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
            source_mass,
        })
    }

    /// Wraps an already-normalized vector, verifying the invariant.
    pub fn from_probs(probs: Vec<f64>, source_mass: f64) -> Result<Self> {
        let total = check_weights(&probs)?;
        check_mass(source_mass)?;
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::invalid(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs, source_mass })
    }

    pub fn uniform(codebook_size: usize) -> Result<Self> {
        Self::normalize(&vec![1.0; codebook_size])
    }

    pub fn one_hot(codebook_size: usize, index: usize) -> Result<Self> {
        if index >= codebook_size {
            return Err(Error::invalid(format!(
                "index {index} outside codebook of size {codebook_size}"
            )));
        }
        let mut w = vec![0.0; codebook_size];
        w[index] = 1.0;
        Self::normalize(&w)
    }

    pub fn codebook_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn source_mass(&self) -> f64 {
        self.source_mass
    }

    pub fn with_source_mass(mut self, source_mass: f64) -> Result<Self> {
        check_mass(source_mass)?;
        self.source_mass = source_mass;
        Ok(self)
    }

    /// Smallest probability; positive iff the distribution has full support.
    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn ensure_same_size(&self, other: &CategoricalDistribution) -> Result<()> {
        if self.codebook_size() != other.codebook_size() {
            return Err(Error::CodebookMismatch {
                expected: self.codebook_size(),
                found: other.codebook_size(),
            });
        }
        Ok(())
    }

    /// Relabels indices: entry `t` moves to `perm[t]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.codebook_size() {
            return Err(Error::LengthMismatch {
                expected: self.codebook_size(),
                found: perm.len(),
            });
        }
        let mut probs = vec![0.0; perm.len()];
        for (t, &p) in perm.iter().enumerate() {
            probs[p] = self.probs[t];
        }
        Ok(Self {
            probs,
            source_mass: self.source_mass,
        })
    }
}

fn check_mass(mass: f64) -> Result<()> {
    if !mass.is_finite() || mass < 0.0 {
        return Err(Error::invalid(format!("source mass must be finite and >= 0, got {mass}")));
    }
    Ok(())
}

//! Style likelihoods and prior re-balancing.
//!
//! The likelihood of a style exemplar under the model is approximated by the
//! element-wise ratio of its index histogram to the dataset histogram,
//! optionally raised to a strength exponent `λ` (`λ = 1` is the plain ratio,
//! `λ = 0` turns guidance off). At every generation step the model's
//! next-index distribution is multiplied by that vector and renormalized.
//!
//! A [`LikelihoodTable`] holds one global vector and, optionally, one vector
//! per semantic label or per spatial cell. The table is fixed for a whole
//! sampling run; the same vector is re-applied at every step.

use serde::{Deserialize, Serialize};

use crate::categorical::CategoricalDistribution;
use crate::distributions::{cell_of, RegionalDistributions, SpatialDistributions, TokenStatistics};
use crate::error::{Error, Result};
use crate::grid::{GridShape, SemanticGrid};

/// Strictly positive guidance weights over the codebook, stored with the
/// largest weight scaled to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LikelihoodVector {
    weights: Vec<f64>,
}

impl TryFrom<Vec<f64>> for LikelihoodVector {
    type Error = Error;

    fn try_from(weights: Vec<f64>) -> Result<Self> {
        Self::new(weights)
    }
}

impl From<LikelihoodVector> for Vec<f64> {
    fn from(v: LikelihoodVector) -> Self {
        v.weights
    }
}

impl LikelihoodVector {
    /// Validates and max-normalizes raw weights.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::invalid("likelihood vector needs at least 2 entries"));
        }
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidWeight { index, value });
            }
        }
        let max = weights.iter().copied().fold(0.0, f64::max);
        if max != 1.0 {
            weights.iter_mut().for_each(|w| *w /= max);
        }
        Ok(Self { weights })
    }

    /// All-ones vector; leaves every prior unchanged.
    pub fn identity(codebook_size: usize) -> Result<Self> {
        Self::new(vec![1.0; codebook_size])
    }

    pub fn codebook_size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_identity(&self) -> bool {
        self.weights.iter().all(|&w| w == 1.0)
    }
}

/// Likelihood ratio `(style / dataset)^exponent`, max-normalized.
///
/// Both inputs need full support; smooth them (alpha > 0) when estimating
/// from grids.
pub fn style_likelihood(
    style: &CategoricalDistribution,
    dataset: &CategoricalDistribution,
    exponent: f64,
) -> Result<LikelihoodVector> {
    style.ensure_same_size(dataset)?;
    if !exponent.is_finite() || exponent < 0.0 {
        return Err(Error::invalid(format!(
            "guidance exponent must be finite and >= 0, got {exponent}"
        )));
    }
    for (name, d) in [("style", style), ("dataset", dataset)] {
        if let Some(t) = d.probs().iter().position(|&p| p <= 0.0) {
            return Err(Error::invalid(format!(
                "{name} distribution has zero probability at index {t}; \
                 estimate it with a positive smoothing alpha"
            )));
        }
    }
    let ratios: Vec<f64> = style
        .probs()
        .iter()
        .zip(dataset.probs())
        .map(|(s, d)| s / d)
        .collect();
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let weights = ratios
        .iter()
        .map(|r| {
            let scaled = r / max;
            if exponent == 1.0 {
                scaled
            } else {
                scaled.powf(exponent).max(f64::MIN_POSITIVE)
            }
        })
        .collect();
    LikelihoodVector::new(weights)
}

/// Posterior `prior ⊙ weights`, renormalized.
pub fn rebalance_prior(
    prior: &CategoricalDistribution,
    likelihood: &LikelihoodVector,
) -> Result<CategoricalDistribution> {
    if prior.codebook_size() != likelihood.codebook_size() {
        return Err(Error::CodebookMismatch {
            expected: prior.codebook_size(),
            found: likelihood.codebook_size(),
        });
    }
    if likelihood.is_identity() {
        return Ok(prior.clone());
    }
    let product: Vec<f64> = prior
        .probs()
        .iter()
        .zip(likelihood.weights())
        .map(|(p, w)| p * w)
        .collect();
    let total: f64 = product.iter().sum();
    assert!(total > 0.0, "positive weights on a valid prior cannot lose all mass");
    CategoricalDistribution::normalize(&product)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuidanceMode {
    Global,
    Regional,
    Spatial,
}

impl GuidanceMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Global => "global",
            Self::Regional => "regional",
            Self::Spatial => "spatial",
        }
    }
}

impl std::str::FromStr for GuidanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(Self::Global),
            "regional" => Ok(Self::Regional),
            "spatial" => Ok(Self::Spatial),
            other => Err(Error::invalid(format!(
                "unknown guidance mode {other:?} (expected global, regional or spatial)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Partition {
    Global,
    /// Indexed by semantic label; `None` falls back to the global vector.
    Regional(Vec<Option<LikelihoodVector>>),
    Spatial {
        cell_rows: usize,
        cell_cols: usize,
        cells: Vec<Vec<LikelihoodVector>>,
    },
}

/// Guidance weights for a whole sampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRecord", into = "TableRecord")]
pub struct LikelihoodTable {
    exponent: f64,
    global: LikelihoodVector,
    partition: Partition,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRecord {
    mode: GuidanceMode,
    exponent: f64,
    global: LikelihoodVector,
    regional: Option<Vec<Option<LikelihoodVector>>>,
    spatial: Option<SpatialRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpatialRecord {
    cell_rows: usize,
    cell_cols: usize,
    cells: Vec<Vec<LikelihoodVector>>,
}

impl TryFrom<TableRecord> for LikelihoodTable {
    type Error = Error;

    fn try_from(rec: TableRecord) -> Result<Self> {
        let partition = match (rec.mode, rec.regional, rec.spatial) {
            (GuidanceMode::Global, None, None) => Partition::Global,
            (GuidanceMode::Regional, Some(r), None) => Partition::Regional(r),
            (GuidanceMode::Spatial, None, Some(s)) => Partition::Spatial {
                cell_rows: s.cell_rows,
                cell_cols: s.cell_cols,
                cells: s.cells,
            },
            (mode, _, _) => {
                return Err(Error::invalid(format!(
                    "likelihood table in {mode:?} mode has the wrong partition fields"
                )))
            }
        };
        Self::from_parts(rec.exponent, rec.global, partition)
    }
}

impl From<LikelihoodTable> for TableRecord {
    fn from(t: LikelihoodTable) -> Self {
        let mode = t.mode();
        let (regional, spatial) = match t.partition {
            Partition::Global => (None, None),
            Partition::Regional(r) => (Some(r), None),
            Partition::Spatial {
                cell_rows,
                cell_cols,
                cells,
            } => (
                None,
                Some(SpatialRecord {
                    cell_rows,
                    cell_cols,
                    cells,
                }),
            ),
        };
        Self {
            mode,
            exponent: t.exponent,
            global: t.global,
            regional,
            spatial,
        }
    }
}

impl LikelihoodTable {
    fn from_parts(exponent: f64, global: LikelihoodVector, partition: Partition) -> Result<Self> {
        if !exponent.is_finite() || exponent < 0.0 {
            return Err(Error::invalid(format!("invalid exponent {exponent}")));
        }
        let size = global.codebook_size();
        let check = |v: &LikelihoodVector| {
            if v.codebook_size() != size {
                Err(Error::CodebookMismatch {
                    expected: size,
                    found: v.codebook_size(),
                })
            } else {
                Ok(())
            }
        };
        match &partition {
            Partition::Global => {}
            Partition::Regional(r) => {
                if r.is_empty() {
                    return Err(Error::invalid("regional table needs at least one label"));
                }
                r.iter().flatten().try_for_each(check)?;
            }
            Partition::Spatial {
                cell_rows,
                cell_cols,
                cells,
            } => {
                if *cell_rows == 0
                    || *cell_cols == 0
                    || cells.len() != *cell_rows
                    || cells.iter().any(|r| r.len() != *cell_cols)
                {
                    return Err(Error::invalid(format!(
                        "spatial table must hold a {cell_rows}x{cell_cols} grid of vectors"
                    )));
                }
                cells.iter().flatten().try_for_each(check)?;
            }
        }
        Ok(Self {
            exponent,
            global,
            partition,
        })
    }

    /// Table applying one vector everywhere.
    pub fn global(global: LikelihoodVector, exponent: f64) -> Result<Self> {
        Self::from_parts(exponent, global, Partition::Global)
    }

    /// Global table from a style/dataset pair.
    pub fn from_global(
        style: &CategoricalDistribution,
        dataset: &CategoricalDistribution,
        exponent: f64,
    ) -> Result<Self> {
        Self::global(style_likelihood(style, dataset, exponent)?, exponent)
    }

    /// Table with a vector per semantic label; `None` entries use `global`.
    pub fn regional(
        global: LikelihoodVector,
        per_label: Vec<Option<LikelihoodVector>>,
        exponent: f64,
    ) -> Result<Self> {
        Self::from_parts(exponent, global, Partition::Regional(per_label))
    }

    pub fn spatial(
        global: LikelihoodVector,
        cell_rows: usize,
        cell_cols: usize,
        cells: Vec<Vec<LikelihoodVector>>,
        exponent: f64,
    ) -> Result<Self> {
        Self::from_parts(
            exponent,
            global,
            Partition::Spatial {
                cell_rows,
                cell_cols,
                cells,
            },
        )
    }

    pub fn mode(&self) -> GuidanceMode {
        match self.partition {
            Partition::Global => GuidanceMode::Global,
            Partition::Regional(_) => GuidanceMode::Regional,
            Partition::Spatial { .. } => GuidanceMode::Spatial,
        }
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn codebook_size(&self) -> usize {
        self.global.codebook_size()
    }

    pub fn global_vector(&self) -> &LikelihoodVector {
        &self.global
    }

    /// Vector for one semantic label, if the table is regional and the label
    /// has its own entry.
    pub fn label_vector(&self, label: usize) -> Option<&LikelihoodVector> {
        match &self.partition {
            Partition::Regional(r) => r.get(label).and_then(Option::as_ref),
            _ => None,
        }
    }

    /// True when every vector in the table is all-ones.
    pub fn is_identity(&self) -> bool {
        let rest = match &self.partition {
            Partition::Global => true,
            Partition::Regional(r) => r.iter().flatten().all(LikelihoodVector::is_identity),
            Partition::Spatial { cells, .. } => {
                cells.iter().flatten().all(LikelihoodVector::is_identity)
            }
        };
        rest && self.global.is_identity()
    }

    /// The vector that applies at `(row, col)` of a `shape` grid.
    pub fn select(
        &self,
        shape: GridShape,
        row: usize,
        col: usize,
        semantics: Option<&SemanticGrid>,
    ) -> Result<&LikelihoodVector> {
        if !shape.contains(row, col) {
            return Err(Error::invalid(format!(
                "position ({row},{col}) outside a {}x{} grid",
                shape.height, shape.width
            )));
        }
        match &self.partition {
            Partition::Global => Ok(&self.global),
            Partition::Regional(per_label) => {
                let sem = semantics
                    .ok_or_else(|| Error::invalid("regional guidance requires a semantic map"))?;
                sem.ensure_covers(shape)?;
                let label = sem.labels()[shape.index(row, col)] as usize;
                Ok(per_label
                    .get(label)
                    .and_then(Option::as_ref)
                    .unwrap_or(&self.global))
            }
            Partition::Spatial {
                cell_rows,
                cell_cols,
                cells,
            } => {
                let (r, c) = cell_of(shape, *cell_rows, *cell_cols, row, col);
                Ok(&cells[r][c])
            }
        }
    }
}

/// One likelihood vector per semantic label where both the style and the
/// dataset observed that label, plus the global fallback.
pub fn regional_likelihoods(
    style_regional: &RegionalDistributions,
    dataset_regional: &RegionalDistributions,
    style_global: &CategoricalDistribution,
    dataset_global: &CategoricalDistribution,
    exponent: f64,
) -> Result<LikelihoodTable> {
    if style_regional.label_count() != dataset_regional.label_count() {
        return Err(Error::invalid(format!(
            "label count mismatch: style has {}, dataset has {}",
            style_regional.label_count(),
            dataset_regional.label_count()
        )));
    }
    let global = style_likelihood(style_global, dataset_global, exponent)?;
    let per_label = (0..style_regional.label_count())
        .map(|j| match (style_regional.get(j), dataset_regional.get(j)) {
            (Some(s), Some(d)) => style_likelihood(s, d, exponent).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    LikelihoodTable::regional(global, per_label, exponent)
}

/// One likelihood vector per spatial cell, plus the global fallback.
pub fn spatial_likelihoods(
    style_spatial: &SpatialDistributions,
    dataset_spatial: &SpatialDistributions,
    style_global: &CategoricalDistribution,
    dataset_global: &CategoricalDistribution,
    exponent: f64,
) -> Result<LikelihoodTable> {
    let (rows, cols) = (style_spatial.cell_rows(), style_spatial.cell_cols());
    if (rows, cols) != (dataset_spatial.cell_rows(), dataset_spatial.cell_cols()) {
        return Err(Error::invalid("style and dataset cell tilings differ"));
    }
    let global = style_likelihood(style_global, dataset_global, exponent)?;
    let cells = (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| style_likelihood(style_spatial.cell(r, c), dataset_spatial.cell(r, c), exponent))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    LikelihoodTable::spatial(global, rows, cols, cells, exponent)
}

/// Builds a table from a pair of statistics files. Without `mode` the
/// granularity of the files decides; asking for global guidance collapses
/// finer statistics to their combined histograms.
pub fn table_from_statistics(
    style: &TokenStatistics,
    dataset: &TokenStatistics,
    exponent: f64,
    mode: Option<GuidanceMode>,
) -> Result<LikelihoodTable> {
    let (sg, dg) = (style.global()?, dataset.global()?);
    match (mode, style, dataset) {
        (Some(GuidanceMode::Global), _, _) | (None, TokenStatistics::Global(_), TokenStatistics::Global(_)) => {
            LikelihoodTable::from_global(&sg, &dg, exponent)
        }
        (None | Some(GuidanceMode::Regional), TokenStatistics::Regional(s), TokenStatistics::Regional(d)) => {
            regional_likelihoods(s, d, &sg, &dg, exponent)
        }
        (None | Some(GuidanceMode::Spatial), TokenStatistics::Spatial(s), TokenStatistics::Spatial(d)) => {
            spatial_likelihoods(s, d, &sg, &dg, exponent)
        }
        (mode, s, d) => Err(Error::invalid(format!(
            "cannot build {} guidance from {} style statistics and {} dataset statistics",
            mode.map_or("matching", GuidanceMode::name),
            s.kind(),
            d.kind()
        ))),
    }
}

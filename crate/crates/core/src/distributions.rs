//! Codebook-index distributions estimated from token grids.
//!
//! All estimators use additive smoothing: with counts `c` over `|Z|` indices
//! and `α ≥ 0`, `p[t] = (c[t] + α) / (Σc + α·|Z|)`. The default `α = 0.5`
//! keeps every entry strictly positive so likelihood ratios stay defined.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::categorical::CategoricalDistribution;
use crate::error::{Error, Result};
use crate::grid::{GridShape, Scene, SemanticGrid, TokenGrid};
use crate::rng::Stream;

pub const DEFAULT_SMOOTHING: f64 = 0.5;

/// Monte-Carlo sample size used for dataset statistics unless overridden.
pub const DEFAULT_MONTE_CARLO_K: usize = 700;

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::invalid(format!(
            "smoothing alpha must be finite and >= 0, got {alpha}"
        )));
    }
    Ok(())
}

/// Raw per-index counts of one grid.
pub fn token_counts(grid: &TokenGrid) -> Vec<u64> {
    let mut counts = vec![0u64; grid.codebook_size()];
    for &t in grid.tokens() {
        counts[t as usize] += 1;
    }
    counts
}

/// Smoothed distribution from counts, or `None` when there is nothing to
/// normalize (no observations and `α = 0`).
fn smoothed(counts: &[u64], alpha: f64) -> Result<Option<CategoricalDistribution>> {
    let mass: u64 = counts.iter().sum();
    if mass == 0 && alpha == 0.0 {
        return Ok(None);
    }
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 + alpha).collect();
    CategoricalDistribution::normalize_with_mass(&weights, mass as f64).map(Some)
}

/// Index histogram of a single grid, e.g. the style distribution of one
/// exemplar.
pub fn histogram_from_grid(grid: &TokenGrid, alpha: f64) -> Result<CategoricalDistribution> {
    histogram_from_grids([grid], alpha)
}

/// Histogram of the pooled tokens of several grids.
pub fn histogram_from_grids<'a>(
    grids: impl IntoIterator<Item = &'a TokenGrid>,
    alpha: f64,
) -> Result<CategoricalDistribution> {
    check_alpha(alpha)?;
    let mut counts: Option<Vec<u64>> = None;
    for grid in grids {
        let c = token_counts(grid);
        match &mut counts {
            None => counts = Some(c),
            Some(acc) => {
                if acc.len() != c.len() {
                    return Err(Error::CodebookMismatch {
                        expected: acc.len(),
                        found: c.len(),
                    });
                }
                acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
            }
        }
    }
    let counts = counts.ok_or_else(|| Error::invalid("no grids to count"))?;
    smoothed(&counts, alpha)?.ok_or(Error::ZeroMass)
}

/// Per-semantic-label distributions.
///
/// A label that was never observed while `α = 0` has no distribution and is
/// stored as `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RegionalRecord", into = "RegionalRecord")]
pub struct RegionalDistributions {
    per_label: Vec<Option<CategoricalDistribution>>,
    per_label_mass: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionalRecord {
    label_count: usize,
    per_label: Vec<Option<CategoricalDistribution>>,
    per_label_mass: Vec<f64>,
}

impl TryFrom<RegionalRecord> for RegionalDistributions {
    type Error = Error;

    fn try_from(rec: RegionalRecord) -> Result<Self> {
        if rec.per_label.len() != rec.label_count || rec.per_label_mass.len() != rec.label_count {
            return Err(Error::LengthMismatch {
                expected: rec.label_count,
                found: rec.per_label.len().min(rec.per_label_mass.len()),
            });
        }
        Self::new(rec.per_label, rec.per_label_mass)
    }
}

impl From<RegionalDistributions> for RegionalRecord {
    fn from(r: RegionalDistributions) -> Self {
        Self {
            label_count: r.per_label.len(),
            per_label: r.per_label,
            per_label_mass: r.per_label_mass,
        }
    }
}

impl RegionalDistributions {
    pub fn new(
        per_label: Vec<Option<CategoricalDistribution>>,
        per_label_mass: Vec<f64>,
    ) -> Result<Self> {
        if per_label.is_empty() {
            return Err(Error::invalid("regional distributions need at least one label"));
        }
        if per_label.len() != per_label_mass.len() {
            return Err(Error::LengthMismatch {
                expected: per_label.len(),
                found: per_label_mass.len(),
            });
        }
        if per_label_mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::invalid("per-label mass must be finite and >= 0"));
        }
        let mut size = None;
        for d in per_label.iter().flatten() {
            match size {
                None => size = Some(d.codebook_size()),
                Some(s) if s != d.codebook_size() => {
                    return Err(Error::CodebookMismatch {
                        expected: s,
                        found: d.codebook_size(),
                    })
                }
                _ => {}
            }
        }
        if size.is_none() {
            return Err(Error::invalid("every label is absent"));
        }
        Ok(Self {
            per_label,
            per_label_mass,
        })
    }

    pub fn label_count(&self) -> usize {
        self.per_label.len()
    }

    pub fn codebook_size(&self) -> usize {
        self.per_label.iter().flatten().next().map_or(0, |d| d.codebook_size())
    }

    pub fn get(&self, label: usize) -> Option<&CategoricalDistribution> {
        self.per_label.get(label).and_then(Option::as_ref)
    }

    pub fn per_label(&self) -> &[Option<CategoricalDistribution>] {
        &self.per_label
    }

    pub fn mass(&self, label: usize) -> f64 {
        self.per_label_mass[label]
    }

    pub fn per_label_mass(&self) -> &[f64] {
        &self.per_label_mass
    }

    /// Mass-weighted mixture of the present labels; the global distribution
    /// these regions partition.
    pub fn combined(&self) -> Result<CategoricalDistribution> {
        let (dists, masses): (Vec<_>, Vec<_>) = self
            .per_label
            .iter()
            .zip(&self.per_label_mass)
            .filter_map(|(d, &m)| d.as_ref().map(|d| (d.clone(), m)))
            .unzip();
        mixture(&dists, &masses)
    }
}

/// Counts of each label's tokens.
fn region_counts(grid: &TokenGrid, semantics: &SemanticGrid) -> Result<Vec<Vec<u64>>> {
    semantics.ensure_covers(grid.shape())?;
    let mut counts = vec![vec![0u64; grid.codebook_size()]; semantics.label_count()];
    for (&t, &l) in grid.tokens().iter().zip(semantics.labels()) {
        counts[l as usize][t as usize] += 1;
    }
    Ok(counts)
}

fn regional_from_counts(counts: Vec<Vec<u64>>, alpha: f64) -> Result<RegionalDistributions> {
    let mut per_label = Vec::with_capacity(counts.len());
    let mut mass = Vec::with_capacity(counts.len());
    for c in &counts {
        mass.push(c.iter().sum::<u64>() as f64);
        per_label.push(smoothed(c, alpha)?);
    }
    RegionalDistributions::new(per_label, mass)
}

/// Histograms restricted to each semantic region of `grid`.
pub fn histogram_by_region(
    grid: &TokenGrid,
    semantics: &SemanticGrid,
    alpha: f64,
) -> Result<RegionalDistributions> {
    check_alpha(alpha)?;
    regional_from_counts(region_counts(grid, semantics)?, alpha)
}

/// Region histograms of the pooled tokens of several annotated grids.
pub fn histogram_by_region_pooled<'a>(
    scenes: impl IntoIterator<Item = (&'a TokenGrid, &'a SemanticGrid)>,
    alpha: f64,
) -> Result<RegionalDistributions> {
    check_alpha(alpha)?;
    let mut acc: Option<Vec<Vec<u64>>> = None;
    for (grid, sem) in scenes {
        let c = region_counts(grid, sem)?;
        match &mut acc {
            None => acc = Some(c),
            Some(a) => {
                if a.len() != c.len() || a[0].len() != c[0].len() {
                    return Err(Error::invalid(
                        "pooled grids disagree on label count or codebook size",
                    ));
                }
                for (row, add) in a.iter_mut().zip(c) {
                    row.iter_mut().zip(add).for_each(|(x, y)| *x += y);
                }
            }
        }
    }
    let counts = acc.ok_or_else(|| Error::invalid("no grids to count"))?;
    regional_from_counts(counts, alpha)
}

/// Cell of `(row, col)` when a `shape` grid is tiled into
/// `cell_rows × cell_cols` floor-partition cells.
pub fn cell_of(shape: GridShape, cell_rows: usize, cell_cols: usize, row: usize, col: usize) -> (usize, usize) {
    (row * cell_rows / shape.height, col * cell_cols / shape.width)
}

/// Per-cell distributions over a spatial tiling of aligned grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpatialRecord", into = "SpatialRecord")]
pub struct SpatialDistributions {
    cell_rows: usize,
    cell_cols: usize,
    per_cell: Vec<Vec<CategoricalDistribution>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpatialRecord {
    cell_rows: usize,
    cell_cols: usize,
    per_cell: Vec<Vec<CategoricalDistribution>>,
}

impl TryFrom<SpatialRecord> for SpatialDistributions {
    type Error = Error;

    fn try_from(rec: SpatialRecord) -> Result<Self> {
        Self::new(rec.cell_rows, rec.cell_cols, rec.per_cell)
    }
}

impl From<SpatialDistributions> for SpatialRecord {
    fn from(s: SpatialDistributions) -> Self {
        Self {
            cell_rows: s.cell_rows,
            cell_cols: s.cell_cols,
            per_cell: s.per_cell,
        }
    }
}

impl SpatialDistributions {
    pub fn new(
        cell_rows: usize,
        cell_cols: usize,
        per_cell: Vec<Vec<CategoricalDistribution>>,
    ) -> Result<Self> {
        if cell_rows == 0 || cell_cols == 0 {
            return Err(Error::invalid("cell tiling must be positive"));
        }
        if per_cell.len() != cell_rows || per_cell.iter().any(|r| r.len() != cell_cols) {
            return Err(Error::invalid(format!(
                "per_cell must be a {cell_rows}x{cell_cols} grid"
            )));
        }
        let size = per_cell[0][0].codebook_size();
        if let Some(d) = per_cell.iter().flatten().find(|d| d.codebook_size() != size) {
            return Err(Error::CodebookMismatch {
                expected: size,
                found: d.codebook_size(),
            });
        }
        Ok(Self {
            cell_rows,
            cell_cols,
            per_cell,
        })
    }

    pub fn cell_rows(&self) -> usize {
        self.cell_rows
    }

    pub fn cell_cols(&self) -> usize {
        self.cell_cols
    }

    pub fn codebook_size(&self) -> usize {
        self.per_cell[0][0].codebook_size()
    }

    pub fn cell(&self, cell_row: usize, cell_col: usize) -> &CategoricalDistribution {
        &self.per_cell[cell_row][cell_col]
    }

    pub fn cells(&self) -> impl Iterator<Item = &CategoricalDistribution> {
        self.per_cell.iter().flatten()
    }

    /// Distribution of the cell containing `(row, col)` of a `shape` grid.
    pub fn at(&self, shape: GridShape, row: usize, col: usize) -> &CategoricalDistribution {
        let (r, c) = cell_of(shape, self.cell_rows, self.cell_cols, row, col);
        self.cell(r, c)
    }

    /// Mass-weighted mixture of all cells.
    pub fn combined(&self) -> Result<CategoricalDistribution> {
        let dists: Vec<_> = self.cells().cloned().collect();
        let masses: Vec<_> = dists.iter().map(|d| d.source_mass()).collect();
        mixture(&dists, &masses)
    }
}

/// Per-cell histograms aggregated over aligned grids.
pub fn histogram_by_cell(
    grids: &[TokenGrid],
    cell_rows: usize,
    cell_cols: usize,
    alpha: f64,
) -> Result<SpatialDistributions> {
    check_alpha(alpha)?;
    let first = grids.first().ok_or_else(|| Error::invalid("empty grid list"))?;
    let shape = first.shape();
    let size = first.codebook_size();
    if cell_rows == 0 || cell_cols == 0 || cell_rows > shape.height || cell_cols > shape.width {
        return Err(Error::invalid(format!(
            "cell tiling {cell_rows}x{cell_cols} must be positive and fit a {}x{} grid",
            shape.height, shape.width
        )));
    }
    let mut counts = vec![vec![vec![0u64; size]; cell_cols]; cell_rows];
    for grid in grids {
        shape.ensure_same(&grid.shape())?;
        if grid.codebook_size() != size {
            return Err(Error::CodebookMismatch {
                expected: size,
                found: grid.codebook_size(),
            });
        }
        for (i, &t) in grid.tokens().iter().enumerate() {
            let (row, col) = shape.position(i);
            let (r, c) = cell_of(shape, cell_rows, cell_cols, row, col);
            counts[r][c][t as usize] += 1;
        }
    }
    let per_cell = counts
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| smoothed(c, alpha)?.ok_or(Error::ZeroMass))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SpatialDistributions::new(cell_rows, cell_cols, per_cell)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Plain arithmetic mean of the probability vectors.
    #[default]
    Uniform,
    /// Mean weighted by each input's `source_mass` (pooled counts).
    Mass,
}

/// Weighted mean of same-size distributions. The result's `source_mass` is
/// the total mass of the inputs.
fn mixture(dists: &[CategoricalDistribution], weights: &[f64]) -> Result<CategoricalDistribution> {
    let first = dists.first().ok_or_else(|| Error::invalid("empty distribution list"))?;
    let mut acc = vec![0.0; first.codebook_size()];
    let mut total_weight = 0.0;
    let mut total_mass = 0.0;
    for (d, &w) in dists.iter().zip(weights) {
        first.ensure_same_size(d)?;
        for (a, p) in acc.iter_mut().zip(d.probs()) {
            *a += w * p;
        }
        total_weight += w;
        total_mass += d.source_mass();
    }
    if total_weight <= 0.0 {
        return Err(Error::ZeroMass);
    }
    CategoricalDistribution::normalize_with_mass(&acc, total_mass)
}

/// Average of several distributions, e.g. the style distribution of a
/// categorized exemplar set.
pub fn average_distributions(
    dists: &[CategoricalDistribution],
    weighting: Weighting,
) -> Result<CategoricalDistribution> {
    if dists.is_empty() {
        return Err(Error::invalid("empty distribution list"));
    }
    let weights: Vec<f64> = match weighting {
        Weighting::Uniform => vec![1.0; dists.len()],
        Weighting::Mass => dists.iter().map(|d| d.source_mass()).collect(),
    };
    mixture(dists, &weights)
}

/// Label-by-label average of regional estimates.
///
/// For each label only inputs that actually observed that region
/// (mass > 0) contribute; a smoothing-only estimate from an input with no
/// pixels of the label is used only if no input observed it.
pub fn average_regional(
    dists: &[RegionalDistributions],
    weighting: Weighting,
) -> Result<RegionalDistributions> {
    let first = dists.first().ok_or_else(|| Error::invalid("empty distribution list"))?;
    let labels = first.label_count();
    if let Some(d) = dists.iter().find(|d| d.label_count() != labels) {
        return Err(Error::invalid(format!(
            "label count mismatch: {labels} vs {}",
            d.label_count()
        )));
    }
    let mut per_label = Vec::with_capacity(labels);
    let mut per_label_mass = Vec::with_capacity(labels);
    for label in 0..labels {
        let observed: Vec<_> = dists
            .iter()
            .filter(|d| d.mass(label) > 0.0)
            .filter_map(|d| d.get(label).cloned())
            .collect();
        let pool = if observed.is_empty() {
            dists.iter().filter_map(|d| d.get(label).cloned()).collect()
        } else {
            observed
        };
        per_label_mass.push(dists.iter().map(|d| d.mass(label)).sum());
        per_label.push(if pool.is_empty() {
            None
        } else {
            Some(average_distributions(&pool, weighting).or_else(|e| match e {
                // all-zero mass weighting on a smoothing-only pool
                Error::ZeroMass => average_distributions(&pool, Weighting::Uniform),
                e => Err(e),
            })?)
        });
    }
    RegionalDistributions::new(per_label, per_label_mass)
}

/// Cell-by-cell average of spatial estimates.
pub fn average_spatial(
    dists: &[SpatialDistributions],
    weighting: Weighting,
) -> Result<SpatialDistributions> {
    let first = dists.first().ok_or_else(|| Error::invalid("empty distribution list"))?;
    let (rows, cols) = (first.cell_rows, first.cell_cols);
    if dists.iter().any(|d| d.cell_rows != rows || d.cell_cols != cols) {
        return Err(Error::invalid("cell tiling mismatch"));
    }
    let per_cell = (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| {
                    let cell: Vec<_> = dists.iter().map(|d| d.cell(r, c).clone()).collect();
                    average_distributions(&cell, weighting)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SpatialDistributions::new(rows, cols, per_cell)
}

/// Random access to a corpus of grids.
pub trait GridProvider: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn tokens(&self, index: usize) -> Result<Cow<'_, TokenGrid>>;

    fn semantics(&self, _index: usize) -> Result<Option<Cow<'_, SemanticGrid>>> {
        Ok(None)
    }
}

impl GridProvider for [TokenGrid] {
    fn len(&self) -> usize {
        <[TokenGrid]>::len(self)
    }

    fn tokens(&self, index: usize) -> Result<Cow<'_, TokenGrid>> {
        Ok(Cow::Borrowed(&self[index]))
    }
}

impl GridProvider for [Scene] {
    fn len(&self) -> usize {
        <[Scene]>::len(self)
    }

    fn tokens(&self, index: usize) -> Result<Cow<'_, TokenGrid>> {
        Ok(Cow::Borrowed(&self[index].tokens))
    }

    fn semantics(&self, index: usize) -> Result<Option<Cow<'_, SemanticGrid>>> {
        Ok(self[index].semantics.as_ref().map(Cow::Borrowed))
    }
}

/// Corpus indices of `k` draws with replacement, uniform over the corpus.
pub fn monte_carlo_indices(corpus_len: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("K must be positive"));
    }
    if corpus_len == 0 {
        return Err(Error::invalid("corpus is empty"));
    }
    let mut stream = Stream::new(seed);
    Ok((0..k)
        .map(|_| stream.next_below(corpus_len as u64) as usize)
        .collect())
}

/// Applies `f` to every drawn index, in parallel when enabled, returning
/// results in draw order.
fn map_draws<T, F>(draws: &[usize], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        draws.par_iter().map(|&i| f(i)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        draws.iter().map(|&i| f(i)).collect()
    }
}

/// Dataset distribution estimated as the uniform mean of the histograms of
/// `k` grids drawn with replacement from `source`.
pub fn monte_carlo_dataset_distribution<P: GridProvider + ?Sized>(
    source: &P,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<CategoricalDistribution> {
    check_alpha(alpha)?;
    let draws = monte_carlo_indices(source.len(), k, seed)?;
    let hists = map_draws(&draws, |i| histogram_from_grid(&*source.tokens(i)?, alpha))?;
    average_distributions(&hists, Weighting::Uniform)
}

/// Region-restricted variant of [`monte_carlo_dataset_distribution`]; every
/// drawn grid must carry semantics.
pub fn monte_carlo_regional_distribution<P: GridProvider + ?Sized>(
    source: &P,
    k: usize,
    alpha: f64,
    seed: u64,
) -> Result<RegionalDistributions> {
    check_alpha(alpha)?;
    let draws = monte_carlo_indices(source.len(), k, seed)?;
    let regional = map_draws(&draws, |i| {
        let sem = source
            .semantics(i)?
            .ok_or_else(|| Error::invalid(format!("grid {i} has no semantic map")))?;
        histogram_by_region(&*source.tokens(i)?, &sem, alpha)
    })?;
    average_regional(&regional, Weighting::Uniform)
}

/// Per-cell variant of [`monte_carlo_dataset_distribution`].
pub fn monte_carlo_spatial_distribution<P: GridProvider + ?Sized>(
    source: &P,
    k: usize,
    cell_rows: usize,
    cell_cols: usize,
    alpha: f64,
    seed: u64,
) -> Result<SpatialDistributions> {
    check_alpha(alpha)?;
    let draws = monte_carlo_indices(source.len(), k, seed)?;
    let spatial = map_draws(&draws, |i| {
        histogram_by_cell(&[source.tokens(i)?.into_owned()], cell_rows, cell_cols, alpha)
    })?;
    average_spatial(&spatial, Weighting::Uniform)
}

/// A statistics file of any granularity. The variant is recognized from the
/// JSON keys: `probs` (global), `per_label` (regional) or `per_cell`
/// (spatial).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TokenStatistics {
    Global(CategoricalDistribution),
    Regional(RegionalDistributions),
    Spatial(SpatialDistributions),
}

impl<'de> Deserialize<'de> for TokenStatistics {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(d)?;
        let object = value
            .as_object()
            .ok_or_else(|| D::Error::custom("statistics must be a JSON object"))?;
        let parsed = if object.contains_key("per_label") {
            serde_json::from_value(value).map(Self::Regional)
        } else if object.contains_key("per_cell") {
            serde_json::from_value(value).map(Self::Spatial)
        } else if object.contains_key("probs") {
            serde_json::from_value(value).map(Self::Global)
        } else {
            return Err(D::Error::custom(
                "statistics need one of the keys `probs`, `per_label` or `per_cell`",
            ));
        };
        parsed.map_err(D::Error::custom)
    }
}

impl TokenStatistics {
    pub fn codebook_size(&self) -> usize {
        match self {
            Self::Global(d) => d.codebook_size(),
            Self::Regional(r) => r.codebook_size(),
            Self::Spatial(s) => s.codebook_size(),
        }
    }

    /// The global histogram, or the mass-weighted combination of the parts.
    pub fn global(&self) -> Result<CategoricalDistribution> {
        match self {
            Self::Global(d) => Ok(d.clone()),
            Self::Regional(r) => r.combined(),
            Self::Spatial(s) => s.combined(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Global(_) => "global",
            Self::Regional(_) => "regional",
            Self::Spatial(_) => "spatial",
        }
    }
}

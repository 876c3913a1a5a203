//! Token-space divergences and style evaluation.
//!
//! Sample histograms are always unsmoothed; references are expected to be
//! smoothed so that every KL divergence `KL(sample ‖ reference)` is finite.

use serde::{Deserialize, Serialize};

use crate::categorical::CategoricalDistribution;
use crate::distributions::{
    histogram_by_cell, histogram_by_region, histogram_by_region_pooled, histogram_from_grid,
    histogram_from_grids, RegionalDistributions, SpatialDistributions,
};
use crate::error::{Error, Result};
use crate::grid::{Scene, TokenGrid};

/// `Σ p·ln(p/q)` with `0·ln(0/q) = 0`.
pub fn kl_divergence(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<f64> {
    p.ensure_same_size(q)?;
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.probs().iter().zip(q.probs()).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::invalid(format!("q lacks support at index {i}")));
            }
            kl += pi * (pi / qi).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// `½ Σ |p − q|`.
pub fn total_variation(p: &CategoricalDistribution, q: &CategoricalDistribution) -> Result<f64> {
    p.ensure_same_size(q)?;
    let sum: f64 = p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs()).sum();
    Ok((sum / 2.0).min(1.0))
}

/// `1 − guided / unguided`, or 0 when the unguided value is 0.
pub fn relative_reduction(guided: f64, unguided: f64) -> f64 {
    if unguided == 0.0 {
        0.0
    } else {
        1.0 - guided / unguided
    }
}

/// A named style target with a global histogram and, optionally,
/// per-label histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleReference {
    pub name: String,
    pub global: CategoricalDistribution,
    #[serde(default)]
    pub regional: Option<RegionalDistributions>,
}

impl StyleReference {
    /// Pooled, smoothed histograms of exemplar scenes. Per-label histograms
    /// are included when every scene carries a semantic map.
    pub fn from_scenes(name: impl Into<String>, scenes: &[Scene], alpha: f64) -> Result<Self> {
        let global = histogram_from_grids(scenes.iter().map(|s| &s.tokens), alpha)?;
        let regional = if scenes.iter().all(|s| s.semantics.is_some()) {
            let pairs = scenes
                .iter()
                .map(|s| (&s.tokens, s.semantics.as_ref().expect("checked above")));
            Some(histogram_by_region_pooled(pairs, alpha)?)
        } else {
            None
        };
        Ok(Self {
            name: name.into(),
            global,
            regional,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Global,
    Regional,
}

/// Per-label KLs of a sample's region histograms against a reference. Labels
/// absent from the sample give `None`; labels absent from the reference use
/// its global histogram.
fn regional_kls(sample: &RegionalDistributions, reference: &StyleReference) -> Result<Vec<Option<f64>>> {
    sample
        .per_label()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            s.as_ref()
                .map(|s| {
                    let r = reference
                        .regional
                        .as_ref()
                        .and_then(|r| r.get(j))
                        .unwrap_or(&reference.global);
                    kl_divergence(s, r)
                })
                .transpose()
        })
        .collect()
}

fn mass_weighted(values: &[Option<f64>], masses: &[f64]) -> f64 {
    let total: f64 = masses.iter().sum();
    values
        .iter()
        .zip(masses)
        .filter_map(|(v, m)| v.map(|v| v * m))
        .sum::<f64>()
        / total
}

/// Classification score of one scene against one reference (lower is closer).
pub fn style_distance(scene: &Scene, reference: &StyleReference, mode: MatchMode) -> Result<f64> {
    match mode {
        MatchMode::Global => kl_divergence(&histogram_from_grid(&scene.tokens, 0.0)?, &reference.global),
        MatchMode::Regional => {
            let sem = scene
                .semantics
                .as_ref()
                .ok_or_else(|| Error::invalid("regional style matching needs semantic maps"))?;
            let hist = histogram_by_region(&scene.tokens, sem, 0.0)?;
            Ok(mass_weighted(&regional_kls(&hist, reference)?, hist.per_label_mass()))
        }
    }
}

/// Index of the KL-closest reference; ties go to the lowest index.
pub fn classify_style(scene: &Scene, references: &[StyleReference], mode: MatchMode) -> Result<usize> {
    if references.len() < 2 {
        return Err(Error::invalid("style matching needs at least 2 references"));
    }
    let mut best = (0, f64::INFINITY);
    for (i, r) in references.iter().enumerate() {
        let d = style_distance(scene, r, mode)?;
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleMatchReport {
    pub styles: Vec<String>,
    /// `confusion[true][assigned]`.
    pub confusion: Vec<Vec<u64>>,
    pub assigned: Vec<usize>,
    pub accuracy: f64,
}

impl StyleMatchReport {
    /// Fraction of samples assigned to `style`.
    pub fn assignment_rate(&self, style: usize) -> f64 {
        if self.assigned.is_empty() {
            return 0.0;
        }
        self.assigned.iter().filter(|&&a| a == style).count() as f64 / self.assigned.len() as f64
    }
}

/// Classifies every sample and tallies against its true style.
pub fn style_match_rate(
    samples: &[Scene],
    truth: &[usize],
    references: &[StyleReference],
    mode: MatchMode,
) -> Result<StyleMatchReport> {
    if samples.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: samples.len(),
            found: truth.len(),
        });
    }
    let n = references.len();
    if let Some(&t) = truth.iter().find(|&&t| t >= n) {
        return Err(Error::invalid(format!("true style {t} has no reference")));
    }
    let assigned = samples
        .iter()
        .map(|s| classify_style(s, references, mode))
        .collect::<Result<Vec<_>>>()?;
    let mut confusion = vec![vec![0u64; n]; n];
    for (&t, &a) in truth.iter().zip(&assigned) {
        confusion[t][a] += 1;
    }
    let correct = truth.iter().zip(&assigned).filter(|(t, a)| t == a).count();
    Ok(StyleMatchReport {
        styles: references.iter().map(|r| r.name.clone()).collect(),
        confusion,
        accuracy: if samples.is_empty() {
            0.0
        } else {
            correct as f64 / samples.len() as f64
        },
        assigned,
    })
}

/// KL of the pooled token histogram of `samples` to `reference`.
pub fn pooled_kl(samples: &[TokenGrid], reference: &CategoricalDistribution) -> Result<f64> {
    kl_divergence(&histogram_from_grids(samples, 0.0)?, reference)
}

/// Per-label KL of the pooled region histograms of `samples`.
pub fn pooled_regional_kl(samples: &[Scene], reference: &StyleReference) -> Result<Vec<Option<f64>>> {
    let pooled = pool_regions(samples)?;
    regional_kls(&pooled, reference)
}

fn pool_regions(samples: &[Scene]) -> Result<RegionalDistributions> {
    let pairs = samples
        .iter()
        .map(|s| {
            s.semantics
                .as_ref()
                .map(|sem| (&s.tokens, sem))
                .ok_or_else(|| Error::invalid("regional metrics need semantic maps"))
        })
        .collect::<Result<Vec<_>>>()?;
    histogram_by_region_pooled(pairs, 0.0)
}

/// Mass-weighted mean over cells of the KL between the pooled per-cell
/// histograms of `samples` and the matching reference cell.
pub fn spatial_kl(samples: &[TokenGrid], reference: &SpatialDistributions) -> Result<f64> {
    let pooled = histogram_by_cell(samples, reference.cell_rows(), reference.cell_cols(), 0.0)?;
    let mut acc = 0.0;
    let mut mass = 0.0;
    for r in 0..reference.cell_rows() {
        for c in 0..reference.cell_cols() {
            let s = pooled.cell(r, c);
            acc += s.source_mass() * kl_divergence(s, reference.cell(r, c))?;
            mass += s.source_mass();
        }
    }
    Ok(acc / mass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub id: usize,
    pub seed: Option<u64>,
    pub kl_global: f64,
    pub tv_global: f64,
    pub kl_labels: Vec<Option<f64>>,
    pub assigned_style: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub count: usize,
    pub pooled_kl: f64,
    pub pooled_tv: f64,
    pub pooled_kl_labels: Vec<Option<f64>>,
    pub mean_sample_kl: f64,
    pub samples: Vec<SampleMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceReport {
    pub target: String,
    pub guided: SetReport,
    pub unguided: SetReport,
    /// `1 − KL_guided / KL_unguided` on pooled histograms.
    pub kl_reduction: f64,
    pub kl_reduction_labels: Vec<Option<f64>>,
}

/// Inputs of [`guidance_report`] besides the sample sets.
#[derive(Debug, Clone, Copy)]
pub struct ReportOptions<'a> {
    /// Also report per-label statistics (samples need semantic maps).
    pub regions: bool,
    /// When non-empty, every sample is also style-classified.
    pub references: &'a [StyleReference],
    pub match_mode: MatchMode,
}

fn set_report(
    samples: &[Scene],
    seeds: Option<&[u64]>,
    target: &StyleReference,
    opts: &ReportOptions<'_>,
) -> Result<SetReport> {
    if samples.is_empty() {
        return Err(Error::invalid("sample set is empty"));
    }
    let grids: Vec<TokenGrid> = samples.iter().map(|s| s.tokens.clone()).collect();
    let pooled = histogram_from_grids(&grids, 0.0)?;
    let per_sample = samples
        .iter()
        .enumerate()
        .map(|(id, s)| {
            let h = histogram_from_grid(&s.tokens, 0.0)?;
            let kl_labels = if opts.regions {
                let sem = s
                    .semantics
                    .as_ref()
                    .ok_or_else(|| Error::invalid("regional metrics need semantic maps"))?;
                regional_kls(&histogram_by_region(&s.tokens, sem, 0.0)?, target)?
            } else {
                Vec::new()
            };
            let assigned_style = if opts.references.is_empty() {
                None
            } else {
                let i = classify_style(s, opts.references, opts.match_mode)?;
                Some(opts.references[i].name.clone())
            };
            Ok(SampleMetrics {
                id,
                seed: seeds.and_then(|s| s.get(id).copied()),
                kl_global: kl_divergence(&h, &target.global)?,
                tv_global: total_variation(&h, &target.global)?,
                kl_labels,
                assigned_style,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SetReport {
        count: samples.len(),
        pooled_kl: kl_divergence(&pooled, &target.global)?,
        pooled_tv: total_variation(&pooled, &target.global)?,
        pooled_kl_labels: if opts.regions {
            pooled_regional_kl(samples, target)?
        } else {
            Vec::new()
        },
        mean_sample_kl: per_sample.iter().map(|m| m.kl_global).sum::<f64>() / samples.len() as f64,
        samples: per_sample,
    })
}

/// Compares guided and unguided sample sets against a target style.
pub fn guidance_report(
    guided: &[Scene],
    guided_seeds: Option<&[u64]>,
    unguided: &[Scene],
    unguided_seeds: Option<&[u64]>,
    target: &StyleReference,
    opts: ReportOptions<'_>,
) -> Result<GuidanceReport> {
    let g = set_report(guided, guided_seeds, target, &opts)?;
    let u = set_report(unguided, unguided_seeds, target, &opts)?;
    let labels = g
        .pooled_kl_labels
        .iter()
        .zip(&u.pooled_kl_labels)
        .map(|(a, b)| Some(relative_reduction((*a)?, (*b)?)))
        .collect();
    Ok(GuidanceReport {
        target: target.name.clone(),
        kl_reduction: relative_reduction(g.pooled_kl, u.pooled_kl),
        kl_reduction_labels: labels,
        guided: g,
        unguided: u,
    })
}

impl GuidanceReport {
    /// One row per sample: set, id, seed, kl_global, tv_global,
    /// kl_label_j..., assigned_style.
    pub fn to_csv(&self) -> Result<String> {
        let labels = self
            .guided
            .samples
            .iter()
            .chain(&self.unguided.samples)
            .map(|s| s.kl_labels.len())
            .max()
            .unwrap_or(0);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["set".to_string(), "id".into(), "seed".into(), "kl_global".into(), "tv_global".into()];
        header.extend((0..labels).map(|j| format!("kl_label_{j}")));
        header.push("assigned_style".into());
        w.write_record(&header).map_err(csv_error)?;
        for (set, report) in [("guided", &self.guided), ("unguided", &self.unguided)] {
            for s in &report.samples {
                let mut row = vec![
                    set.to_string(),
                    s.id.to_string(),
                    s.seed.map(|v| v.to_string()).unwrap_or_default(),
                    s.kl_global.to_string(),
                    s.tv_global.to_string(),
                ];
                row.extend((0..labels).map(|j| {
                    s.kl_labels
                        .get(j)
                        .copied()
                        .flatten()
                        .map(|v| v.to_string())
                        .unwrap_or_default()
                }));
                row.push(s.assigned_style.clone().unwrap_or_default());
                w.write_record(&row).map_err(csv_error)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

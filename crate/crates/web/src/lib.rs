//! Browser bindings for a small interactive demo.
//!
//! A [`Demo`] builds a benchmark world in memory, trains a label-conditional
//! Markov prior on it and estimates the dataset's per-region index
//! distribution. The page then calls three operations:
//! - [`Demo::sample`]: draw a grid, guided toward one style or unguided.
//! - [`Demo::mix`]: guide each semantic region toward a different style.
//! - [`Demo::inspect`]: show prior, likelihood and posterior at one cell of
//!   the last drawn grid.

use std::sync::Arc;

use serde::Serialize;
use vqstyle::distributions::{monte_carlo_regional_distribution, RegionalDistributions, DEFAULT_MONTE_CARLO_K, DEFAULT_SMOOTHING};
use vqstyle::guidance::{regional_likelihoods, style_likelihood, LikelihoodTable, LikelihoodVector};
use vqstyle::metrics::{classify_style, MatchMode, StyleReference};
use vqstyle::prior::{train_markov_prior, ContextOffset, MarkovGridPrior, PriorModel};
use vqstyle::rng::{derive_seed, Stream};
use vqstyle::sampler::{sample_grid, step_posterior, SamplingConfig};
use vqstyle::world::{build_benchmark, BenchmarkConfig, LayoutSpec};
use vqstyle::{CategoricalDistribution, GridShape, Scene, SemanticGrid, TokenGrid};
use wasm_bindgen::prelude::*;

fn err(e: vqstyle::Error) -> String {
    e.to_string()
}

struct Drawn {
    grid: TokenGrid,
    config: SamplingConfig,
}

#[derive(Serialize)]
struct CellView<'a> {
    row: usize,
    col: usize,
    label: u32,
    token: u32,
    prior: &'a [f64],
    likelihood: &'a [f64],
    posterior: &'a [f64],
}

#[wasm_bindgen]
pub struct Demo {
    shape: GridShape,
    label_count: usize,
    layout: LayoutSpec,
    prior: MarkovGridPrior,
    dataset: RegionalDistributions,
    dataset_global: CategoricalDistribution,
    styles: Vec<StyleReference>,
    semantics: SemanticGrid,
    last: Option<Drawn>,
}

#[wasm_bindgen]
impl Demo {
    /// Builds the named preset world (`landscape-2x4` or `mirrored-bands`).
    #[wasm_bindgen(constructor)]
    pub fn new(preset: &str, seed: u32) -> Result<Demo, String> {
        let mut config = BenchmarkConfig::preset(preset).map_err(err)?;
        config.seed = u64::from(seed);
        let bench = build_benchmark(&config).map_err(err)?;
        let corpus = bench.corpus();
        let prior = train_markov_prior(&corpus, ContextOffset::default_template(), true, DEFAULT_SMOOTHING)
            .map_err(err)?;
        let dataset = monte_carlo_regional_distribution(
            corpus.as_slice(),
            DEFAULT_MONTE_CARLO_K,
            DEFAULT_SMOOTHING,
            derive_seed(config.seed, 2),
        )
        .map_err(err)?;
        let dataset_global = dataset.combined().map_err(err)?;
        let styles = bench
            .exemplars
            .iter()
            .zip(&bench.styles)
            .map(|(ex, style)| {
                let scenes: Vec<Scene> = ex.iter().map(|e| e.scene.clone()).collect();
                StyleReference::from_scenes(style.name.clone(), &scenes, DEFAULT_SMOOTHING)
            })
            .collect::<vqstyle::Result<Vec<_>>>()
            .map_err(err)?;
        let shape = config.shape().map_err(err)?;
        let layout = config.layouts[0].clone();
        let semantics = layout
            .generate(shape, config.label_count, &mut Stream::new(derive_seed(config.seed, 3)))
            .map_err(err)?;
        Ok(Demo {
            shape,
            label_count: config.label_count,
            layout,
            prior,
            dataset,
            dataset_global,
            styles,
            semantics,
            last: None,
        })
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    #[wasm_bindgen(js_name = codebookSize)]
    pub fn codebook_size(&self) -> usize {
        self.prior.codebook_size()
    }

    #[wasm_bindgen(js_name = labelCount)]
    pub fn label_count(&self) -> usize {
        self.label_count
    }

    #[wasm_bindgen(js_name = styleNames)]
    pub fn style_names(&self) -> Vec<String> {
        self.styles.iter().map(|s| s.name.clone()).collect()
    }

    /// Current semantic map, row-major.
    pub fn semantics(&self) -> Vec<u32> {
        self.semantics.labels().to_vec()
    }

    /// Draws a new semantic map from the preset's layout.
    #[wasm_bindgen(js_name = newLayout)]
    pub fn new_layout(&mut self, seed: u32) -> Result<Vec<u32>, String> {
        self.semantics = self
            .layout
            .generate(self.shape, self.label_count, &mut Stream::new(u64::from(seed)))
            .map_err(err)?;
        self.last = None;
        Ok(self.semantics())
    }

    /// Samples one grid; `style` selects the target, `None` samples the
    /// prior alone.
    pub fn sample(&mut self, style: Option<u32>, lambda: f64, seed: u32) -> Result<Vec<u32>, String> {
        let table = match style {
            None => None,
            Some(s) => {
                let reference = self.style(s)?;
                let regional = reference.regional.as_ref().ok_or("style has no per-region statistics")?;
                Some(
                    regional_likelihoods(regional, &self.dataset, &reference.global, &self.dataset_global, lambda)
                        .map_err(err)?,
                )
            }
        };
        self.draw(table, seed)
    }

    /// Samples one grid with `styles[j]` guiding the cells labelled `j`.
    pub fn mix(&mut self, styles: Vec<u32>, lambda: f64, seed: u32) -> Result<Vec<u32>, String> {
        if styles.len() != self.label_count {
            return Err(format!("need one style per label ({}), got {}", self.label_count, styles.len()));
        }
        let per_label = styles
            .iter()
            .enumerate()
            .map(|(label, &s)| {
                let reference = self.style(s)?;
                let own = reference.regional.as_ref().and_then(|r| r.get(label)).unwrap_or(&reference.global);
                let data = self.dataset.get(label).unwrap_or(&self.dataset_global);
                style_likelihood(own, data, lambda).map(Some).map_err(err)
            })
            .collect::<Result<Vec<_>, String>>()?;
        let global = LikelihoodVector::identity(self.codebook_size()).map_err(err)?;
        let table = LikelihoodTable::regional(global, per_label, lambda).map_err(err)?;
        self.draw(Some(table), seed)
    }

    /// JSON view of the prior, likelihood weights and posterior that
    /// produced cell `(row, col)` of the last grid.
    pub fn inspect(&self, row: usize, col: usize) -> Result<String, String> {
        let last = self.last.as_ref().ok_or("nothing sampled yet")?;
        if !self.shape.contains(row, col) {
            return Err(format!("cell ({row},{col}) outside the grid"));
        }
        let index = self.shape.index(row, col);
        let prefix = &last.grid.tokens()[..index];
        let prior = self
            .prior
            .next_distribution(prefix, self.shape, (row, col), Some(&self.semantics))
            .map_err(err)?;
        let identity = LikelihoodVector::identity(self.codebook_size()).map_err(err)?;
        let likelihood = match &last.config.guidance {
            Some(t) => t.select(self.shape, row, col, Some(&self.semantics)).map_err(err)?,
            None => &identity,
        };
        let posterior = step_posterior(&prior, &last.config, self.shape, (row, col), Some(&self.semantics))
            .map_err(err)?;
        let view = CellView {
            row,
            col,
            label: self.semantics.labels()[index],
            token: last.grid.tokens()[index],
            prior: prior.probs(),
            likelihood: likelihood.weights(),
            posterior: posterior.probs(),
        };
        serde_json::to_string(&view).map_err(|e| e.to_string())
    }

    /// Name of the style whose histogram is closest to the last grid.
    #[wasm_bindgen(js_name = closestStyle)]
    pub fn closest_style(&self) -> Result<String, String> {
        let last = self.last.as_ref().ok_or("nothing sampled yet")?;
        let scene = Scene::unlabeled(last.grid.clone());
        let i = classify_style(&scene, &self.styles, MatchMode::Global).map_err(err)?;
        Ok(self.styles[i].name.clone())
    }
}

impl Demo {
    fn style(&self, index: u32) -> Result<&StyleReference, String> {
        self.styles
            .get(index as usize)
            .ok_or_else(|| format!("no style {index}; there are {}", self.styles.len()))
    }

    fn draw(&mut self, table: Option<LikelihoodTable>, seed: u32) -> Result<Vec<u32>, String> {
        let config = SamplingConfig {
            guidance: table.map(Arc::new),
            ..SamplingConfig::with_seed(u64::from(seed))
        };
        let grid = sample_grid(&self.prior, self.shape, Some(&self.semantics), &config).map_err(err)?;
        let tokens = grid.tokens().to_vec();
        self.last = Some(Drawn { grid, config });
        Ok(tokens)
    }
}

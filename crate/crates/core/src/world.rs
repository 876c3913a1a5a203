//! Synthetic style benchmark.
//!
//! A style assigns each semantic label a token distribution; a layout draws
//! the semantic map. Scenes are generated left to right with a copy-left
//! texture: inside a region, a token repeats its left neighbour with
//! probability `coherence` and is otherwise drawn fresh from the label's
//! distribution.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::categorical::CategoricalDistribution;
use crate::codec;
use crate::error::{Error, Result};
use crate::grid::{GridShape, Scene, SemanticGrid, TokenGrid};
use crate::metrics::total_variation;
use crate::rng::{derive_seed, Stream};

/// Per-label token distributions plus a coherence level.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleSpec {
    pub name: String,
    pub per_label: Vec<CategoricalDistribution>,
    pub coherence: f64,
}

impl StyleSpec {
    pub fn new(name: impl Into<String>, per_label: Vec<CategoricalDistribution>, coherence: f64) -> Result<Self> {
        let name = name.into();
        if !(0.0..1.0).contains(&coherence) {
            return Err(Error::invalid(format!(
                "style {name:?}: coherence must lie in [0, 1), got {coherence}"
            )));
        }
        let first = per_label
            .first()
            .ok_or_else(|| Error::invalid(format!("style {name:?} has no label distributions")))?;
        for d in &per_label[1..] {
            first.ensure_same_size(d)?;
        }
        Ok(Self {
            name,
            per_label,
            coherence,
        })
    }

    pub fn codebook_size(&self) -> usize {
        self.per_label[0].codebook_size()
    }

    pub fn label_count(&self) -> usize {
        self.per_label.len()
    }
}

/// How semantic maps are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayoutSpec {
    /// Label 0 above a horizon row drawn uniformly between the two
    /// fractions of the height, label 1 below.
    Horizon { min_fraction: f64, max_fraction: f64 },
    /// `count` equal horizontal bands labelled `0..count` top to bottom.
    Bands { count: usize },
    Constant { label: u32 },
}

impl LayoutSpec {
    pub fn validate(&self, height: usize, label_count: usize) -> Result<()> {
        match *self {
            Self::Horizon {
                min_fraction,
                max_fraction,
            } => {
                if !(0.0..=1.0).contains(&min_fraction)
                    || !(0.0..=1.0).contains(&max_fraction)
                    || min_fraction > max_fraction
                {
                    return Err(Error::invalid(format!(
                        "horizon fractions must satisfy 0 <= min <= max <= 1, got {min_fraction}, {max_fraction}"
                    )));
                }
                if label_count < 2 {
                    return Err(Error::invalid("horizon layout needs at least 2 labels"));
                }
            }
            Self::Bands { count } => {
                if count == 0 || count > height || count > label_count {
                    return Err(Error::invalid(format!(
                        "band count {count} must lie in [1, min(height {height}, labels {label_count})]"
                    )));
                }
            }
            Self::Constant { label } => {
                if label as usize >= label_count {
                    return Err(Error::invalid(format!(
                        "constant label {label} not below label count {label_count}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn generate(&self, shape: GridShape, label_count: usize, stream: &mut Stream) -> Result<SemanticGrid> {
        self.validate(shape.height, label_count)?;
        let row_label: Vec<u32> = match *self {
            Self::Horizon {
                min_fraction,
                max_fraction,
            } => {
                let lo = (min_fraction * shape.height as f64).round() as u64;
                let hi = (max_fraction * shape.height as f64).round() as u64;
                let horizon = lo + stream.next_below(hi - lo + 1);
                (0..shape.height)
                    .map(|r| u32::from(r as u64 >= horizon))
                    .collect()
            }
            Self::Bands { count } => (0..shape.height)
                .map(|r| (r * count / shape.height) as u32)
                .collect(),
            Self::Constant { label } => vec![label; shape.height],
        };
        let labels = row_label
            .iter()
            .flat_map(|&l| std::iter::repeat_n(l, shape.width))
            .collect();
        SemanticGrid::new(shape.height, shape.width, label_count, labels)
    }
}

/// One scene from `style` over a `layout` map. The layout and the tokens use
/// separate sub-seeds of `seed`.
pub fn generate_scene(
    style: &StyleSpec,
    layout: &LayoutSpec,
    shape: GridShape,
    seed: u64,
) -> Result<Scene> {
    let label_count = style.label_count();
    let semantics = layout.generate(shape, label_count, &mut Stream::new(derive_seed(seed, 0)))?;
    let mut stream = Stream::new(derive_seed(seed, 1));
    let labels = semantics.labels();
    let mut tokens = Vec::with_capacity(shape.len());
    for i in 0..shape.len() {
        let label = labels[i];
        let (_, col) = shape.position(i);
        let copy = col > 0
            && labels[i - 1] == label
            && style.coherence > 0.0
            && stream.next_f64() < style.coherence;
        let token = if copy {
            tokens[i - 1]
        } else {
            stream.pick(style.per_label[label as usize].probs()) as u32
        };
        tokens.push(token);
    }
    let grid = TokenGrid::new(shape.height, shape.width, style.codebook_size(), tokens)?;
    Scene::new(grid, Some(semantics))
}

/// Token distribution of one label in a config file: uniform over a support
/// set, or explicit probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TokenSpec {
    Support { support: Vec<u32> },
    Probs { probs: Vec<f64> },
}

impl TokenSpec {
    pub fn support(range: std::ops::Range<u32>) -> Self {
        Self::Support {
            support: range.collect(),
        }
    }

    pub fn to_distribution(&self, codebook_size: usize) -> Result<CategoricalDistribution> {
        match self {
            Self::Support { support } => {
                let mut w = vec![0.0; codebook_size];
                for &t in support {
                    *w.get_mut(t as usize).ok_or_else(|| {
                        Error::invalid(format!("support token {t} outside codebook of size {codebook_size}"))
                    })? = 1.0;
                }
                CategoricalDistribution::normalize(&w)
            }
            Self::Probs { probs } => {
                if probs.len() != codebook_size {
                    return Err(Error::LengthMismatch {
                        expected: codebook_size,
                        found: probs.len(),
                    });
                }
                CategoricalDistribution::normalize(probs)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleConfig {
    pub name: String,
    pub coherence: f64,
    pub per_label: Vec<TokenSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub name: String,
    pub codebook_size: usize,
    pub label_count: usize,
    pub height: usize,
    pub width: usize,
    pub styles: Vec<StyleConfig>,
    /// Relative style frequencies in the corpus.
    pub mixture: Vec<f64>,
    /// Each scene picks one uniformly.
    pub layouts: Vec<LayoutSpec>,
    pub corpus_size: usize,
    pub exemplars_per_style: usize,
    pub seed: u64,
}

pub const LANDSCAPE_2X4: &str = "landscape-2x4";
pub const MIRRORED_BANDS: &str = "mirrored-bands";

impl BenchmarkConfig {
    /// Four sky/ground styles over 32 tokens. Each label has two disjoint
    /// 8-token supports, and each style combines one sky with one ground
    /// support, so every support is shared by exactly two styles.
    pub fn landscape_2x4() -> Self {
        let sky = [("clear", 0..8), ("dusk", 8..16)];
        let ground = [("rock", 16..24), ("snow", 24..32)];
        let styles = sky
            .iter()
            .flat_map(|(s, sr)| {
                ground.iter().map(move |(g, gr)| StyleConfig {
                    name: format!("{s}-{g}"),
                    coherence: 0.6,
                    per_label: vec![TokenSpec::support(sr.clone()), TokenSpec::support(gr.clone())],
                })
            })
            .collect();
        Self {
            name: LANDSCAPE_2X4.into(),
            codebook_size: 32,
            label_count: 2,
            height: 32,
            width: 32,
            styles,
            mixture: vec![1.0; 4],
            layouts: vec![LayoutSpec::Horizon {
                min_fraction: 0.3,
                max_fraction: 0.7,
            }],
            corpus_size: 2000,
            exemplars_per_style: 4,
            seed: 0,
        }
    }

    /// Two styles with identical global histograms: tokens 0..8 on top and
    /// 8..16 below, or the reverse.
    pub fn mirrored_bands() -> Self {
        let style = |name: &str, top: std::ops::Range<u32>, bottom: std::ops::Range<u32>| StyleConfig {
            name: name.into(),
            coherence: 0.6,
            per_label: vec![TokenSpec::support(top), TokenSpec::support(bottom)],
        };
        Self {
            name: MIRRORED_BANDS.into(),
            codebook_size: 16,
            label_count: 2,
            height: 16,
            width: 16,
            styles: vec![style("low-high", 0..8, 8..16), style("high-low", 8..16, 0..8)],
            mixture: vec![1.0, 1.0],
            layouts: vec![LayoutSpec::Bands { count: 2 }],
            corpus_size: 1000,
            exemplars_per_style: 4,
            seed: 0,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            LANDSCAPE_2X4 => Ok(Self::landscape_2x4()),
            MIRRORED_BANDS => Ok(Self::mirrored_bands()),
            other => Err(Error::invalid(format!(
                "unknown benchmark {other:?} (expected {LANDSCAPE_2X4} or {MIRRORED_BANDS})"
            ))),
        }
    }

    pub fn shape(&self) -> Result<GridShape> {
        GridShape::new(self.height, self.width)
    }

    pub fn style_specs(&self) -> Result<Vec<StyleSpec>> {
        self.styles
            .iter()
            .map(|s| {
                if s.per_label.len() != self.label_count {
                    return Err(Error::invalid(format!(
                        "style {:?} defines {} labels, expected {}",
                        s.name,
                        s.per_label.len(),
                        self.label_count
                    )));
                }
                let dists = s
                    .per_label
                    .iter()
                    .map(|t| t.to_distribution(self.codebook_size))
                    .collect::<Result<_>>()?;
                StyleSpec::new(s.name.clone(), dists, s.coherence)
            })
            .collect()
    }

    fn validate(&self) -> Result<Vec<StyleSpec>> {
        let shape = self.shape()?;
        if self.styles.is_empty() {
            return Err(Error::invalid("benchmark needs at least one style"));
        }
        if self.mixture.len() != self.styles.len() {
            return Err(Error::LengthMismatch {
                expected: self.styles.len(),
                found: self.mixture.len(),
            });
        }
        CategoricalDistribution::normalize(&self.mixture)?;
        if self.layouts.is_empty() {
            return Err(Error::invalid("benchmark needs at least one layout"));
        }
        for l in &self.layouts {
            l.validate(shape.height, self.label_count)?;
        }
        if self.corpus_size == 0 {
            return Err(Error::invalid("corpus size must be at least 1"));
        }
        self.style_specs()
    }
}

/// Warnings for style sets that are hard to tell apart: fewer than two
/// styles, or a pair whose label distributions all stay within TV 0.5.
pub fn separability_warnings(styles: &[StyleSpec]) -> Vec<String> {
    let mut out = Vec::new();
    if styles.len() < 2 {
        out.push(format!("only {} style(s); style matching is trivial", styles.len()));
    }
    for (i, a) in styles.iter().enumerate() {
        for b in &styles[i + 1..] {
            let sep = a
                .per_label
                .iter()
                .zip(&b.per_label)
                .map(|(p, q)| total_variation(p, q).unwrap_or(0.0))
                .fold(0.0, f64::max);
            if sep < 0.5 {
                out.push(format!(
                    "styles {:?} and {:?} are poorly separated (max per-label TV {sep:.3})",
                    a.name, b.name
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScene {
    pub scene: Scene,
    pub style: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub config: BenchmarkConfig,
    pub styles: Vec<StyleSpec>,
    pub scenes: Vec<LabeledScene>,
    /// Held-out scenes, `exemplars_per_style` per style, grouped by style.
    pub exemplars: Vec<Vec<LabeledScene>>,
    pub warnings: Vec<String>,
}

impl Benchmark {
    pub fn corpus(&self) -> Vec<Scene> {
        self.scenes.iter().map(|s| s.scene.clone()).collect()
    }

    pub fn style_index(&self, name: &str) -> Option<usize> {
        self.styles.iter().position(|s| s.name == name)
    }
}

fn map_indices<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(&f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Generates the corpus and exemplars in memory.
pub fn build_benchmark(config: &BenchmarkConfig) -> Result<Benchmark> {
    let styles = config.validate()?;
    let shape = config.shape()?;
    let corpus_base = derive_seed(config.seed, 0);
    let exemplar_base = derive_seed(config.seed, 1);
    let scenes = map_indices(config.corpus_size, |i| {
        let mut choose = Stream::new(derive_seed(corpus_base, i as u64));
        let style = choose.pick(&config.mixture);
        let layout = &config.layouts[choose.next_below(config.layouts.len() as u64) as usize];
        let seed = choose.next_u64();
        Ok(LabeledScene {
            scene: generate_scene(&styles[style], layout, shape, seed)?,
            style,
            seed,
        })
    })?;
    let per = config.exemplars_per_style;
    let flat = map_indices(styles.len() * per, |k| {
        let style = k / per;
        let mut choose = Stream::new(derive_seed(exemplar_base, k as u64));
        let layout = &config.layouts[choose.next_below(config.layouts.len() as u64) as usize];
        let seed = choose.next_u64();
        Ok(LabeledScene {
            scene: generate_scene(&styles[style], layout, shape, seed)?,
            style,
            seed,
        })
    })?;
    let mut exemplars = vec![Vec::with_capacity(per); styles.len()];
    for e in flat {
        exemplars[e.style].push(e);
    }
    Ok(Benchmark {
        config: config.clone(),
        warnings: separability_warnings(&styles),
        styles,
        scenes,
        exemplars,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub tokens: String,
    pub semantics: String,
    pub style: String,
    pub seed: u64,
}

/// Index of a corpus directory. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub codebook_size: usize,
    pub label_count: usize,
    pub height: usize,
    pub width: usize,
    pub styles: Vec<String>,
    pub scenes: Vec<ManifestEntry>,
    pub exemplars: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";

/// Writes scenes, exemplars, the config and the manifest under `dir`.
pub fn write_benchmark(bench: &Benchmark, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("scenes"))?;
    fs::create_dir_all(dir.join("exemplars"))?;
    let write = |rel_stem: String, s: &LabeledScene| -> Result<ManifestEntry> {
        let tokens = format!("{rel_stem}.tgrd");
        let semantics = format!("{rel_stem}.sgrd");
        codec::write_token_grid(dir.join(&tokens), &s.scene.tokens)?;
        let sem = s.scene.semantics.as_ref().expect("generated scenes carry semantics");
        codec::write_semantic_grid(dir.join(&semantics), sem)?;
        Ok(ManifestEntry {
            tokens,
            semantics,
            style: bench.styles[s.style].name.clone(),
            seed: s.seed,
        })
    };
    let scenes = bench
        .scenes
        .iter()
        .enumerate()
        .map(|(i, s)| write(format!("scenes/scene_{i:05}"), s))
        .collect::<Result<_>>()?;
    let exemplars = bench
        .exemplars
        .iter()
        .flatten()
        .enumerate()
        .map(|(i, s)| write(format!("exemplars/{}_{i:03}", bench.styles[s.style].name), s))
        .collect::<Result<_>>()?;
    let cfg = &bench.config;
    let manifest = Manifest {
        name: cfg.name.clone(),
        codebook_size: cfg.codebook_size,
        label_count: cfg.label_count,
        height: cfg.height,
        width: cfg.width,
        styles: bench.styles.iter().map(|s| s.name.clone()).collect(),
        scenes,
        exemplars,
    };
    codec::write_json(dir.join(CONFIG_FILE), cfg)?;
    let path = dir.join(MANIFEST_FILE);
    codec::write_json(&path, &manifest)?;
    Ok(path)
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        codec::read_json(path)
    }

    fn load(entries: &[ManifestEntry], base: &Path) -> Result<Vec<(Scene, String)>> {
        entries
            .iter()
            .map(|e| {
                let tokens = codec::read_token_grid(base.join(&e.tokens))?;
                let sem = codec::read_semantic_grid(base.join(&e.semantics))?;
                Ok((Scene::new(tokens, Some(sem))?, e.style.clone()))
            })
            .collect()
    }

    /// Reads every corpus scene; `base` is the manifest's directory.
    pub fn load_scenes(&self, base: &Path) -> Result<Vec<(Scene, String)>> {
        Self::load(&self.scenes, base)
    }

    pub fn load_exemplars(&self, base: &Path) -> Result<Vec<(Scene, String)>> {
        Self::load(&self.exemplars, base)
    }
}

//! Count-based Markov prior over a causal grid neighbourhood.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{check_query, PriorModel};
use crate::categorical::CategoricalDistribution;
use crate::error::{Error, Result};
use crate::grid::{GridShape, Scene, SemanticGrid};

/// Relative position `(row delta, col delta)` of a context cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextOffset {
    pub dr: i32,
    pub dc: i32,
}

impl ContextOffset {
    pub const LEFT: Self = Self { dr: 0, dc: -1 };
    pub const ABOVE: Self = Self { dr: -1, dc: 0 };
    pub const ABOVE_LEFT: Self = Self { dr: -1, dc: -1 };
    pub const ABOVE_RIGHT: Self = Self { dr: -1, dc: 1 };

    /// Offsets a template may use, all strictly before the current position
    /// in raster order.
    pub const ALLOWED: [Self; 4] = [Self::LEFT, Self::ABOVE, Self::ABOVE_LEFT, Self::ABOVE_RIGHT];

    pub fn default_template() -> Vec<Self> {
        vec![Self::LEFT, Self::ABOVE]
    }

    /// Parses `left`, `above`, `above-left` or `above-right`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "left" => Ok(Self::LEFT),
            "above" => Ok(Self::ABOVE),
            "above-left" => Ok(Self::ABOVE_LEFT),
            "above-right" => Ok(Self::ABOVE_RIGHT),
            other => Err(Error::invalid(format!(
                "unknown context offset {other:?} (expected left, above, above-left or above-right)"
            ))),
        }
    }
}

fn validate_template(template: &[ContextOffset]) -> Result<()> {
    for (i, off) in template.iter().enumerate() {
        if !ContextOffset::ALLOWED.contains(off) {
            return Err(Error::invalid(format!(
                "context offset [{}, {}] is not one of left, above, above-left, above-right",
                off.dr, off.dc
            )));
        }
        if template[..i].contains(off) {
            return Err(Error::invalid(format!("duplicate context offset [{}, {}]", off.dr, off.dc)));
        }
    }
    Ok(())
}

/// A context slot: a token, or the boundary marker for out-of-grid cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextSymbol {
    Boundary,
    Token(u32),
}

const BOUNDARY_TAG: &str = "B";

impl Serialize for ContextSymbol {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Token(t) => s.serialize_u32(*t),
            Self::Boundary => s.serialize_str(BOUNDARY_TAG),
        }
    }
}

impl<'de> Deserialize<'de> for ContextSymbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Token(u32),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Token(t) => Ok(Self::Token(t)),
            Raw::Tag(s) if s == BOUNDARY_TAG => Ok(Self::Boundary),
            Raw::Tag(s) => Err(serde::de::Error::custom(format!(
                "context symbol must be a token or \"B\", got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct TableKey {
    label: Option<u32>,
    context: Vec<ContextSymbol>,
}

/// Next-token counts keyed by the tokens at fixed causal offsets and,
/// optionally, the semantic label at the current position.
///
/// Probabilities are additively smoothed: `(c + α) / (N + α|Z|)`. A context
/// with no observations and `α = 0` falls back to uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct MarkovGridPrior {
    codebook_size: usize,
    context: Vec<ContextOffset>,
    conditional: bool,
    smoothing_alpha: f64,
    tables: BTreeMap<TableKey, Vec<u64>>,
    dists: HashMap<TableKey, CategoricalDistribution>,
    unseen: CategoricalDistribution,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    codebook_size: usize,
    context: Vec<[i32; 2]>,
    conditional: bool,
    smoothing_alpha: f64,
    tables: Vec<TableRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRecord {
    context: Vec<ContextSymbol>,
    label: Option<u32>,
    counts: BTreeMap<u32, u64>,
}

impl TryFrom<ModelRecord> for MarkovGridPrior {
    type Error = Error;

    fn try_from(rec: ModelRecord) -> Result<Self> {
        let context = rec
            .context
            .iter()
            .map(|&[dr, dc]| ContextOffset { dr, dc })
            .collect();
        let mut model = Self::untrained(rec.codebook_size, context, rec.conditional, rec.smoothing_alpha)?;
        for table in rec.tables {
            if table.context.len() != model.context.len() {
                return Err(Error::invalid(format!(
                    "table context has {} symbols, template has {}",
                    table.context.len(),
                    model.context.len()
                )));
            }
            if table.label.is_some() != model.conditional {
                return Err(Error::invalid(
                    "table labels must be present exactly when the model is conditional",
                ));
            }
            for sym in &table.context {
                if let ContextSymbol::Token(t) = sym {
                    model.check_token(*t)?;
                }
            }
            let mut counts = vec![0u64; model.codebook_size];
            for (&t, &n) in &table.counts {
                model.check_token(t)?;
                counts[t as usize] = n;
            }
            let key = TableKey {
                label: table.label,
                context: table.context,
            };
            if model.tables.insert(key, counts).is_some() {
                return Err(Error::invalid("duplicate count table"));
            }
        }
        model.rebuild();
        Ok(model)
    }
}

impl From<MarkovGridPrior> for ModelRecord {
    fn from(m: MarkovGridPrior) -> Self {
        Self {
            codebook_size: m.codebook_size,
            context: m.context.iter().map(|o| [o.dr, o.dc]).collect(),
            conditional: m.conditional,
            smoothing_alpha: m.smoothing_alpha,
            tables: m
                .tables
                .into_iter()
                .map(|(key, counts)| TableRecord {
                    context: key.context,
                    label: key.label,
                    counts: counts
                        .iter()
                        .enumerate()
                        .filter(|(_, &n)| n > 0)
                        .map(|(t, &n)| (t as u32, n))
                        .collect(),
                })
                .collect(),
        }
    }
}

impl MarkovGridPrior {
    /// A model with empty count tables.
    pub fn untrained(
        codebook_size: usize,
        context: Vec<ContextOffset>,
        conditional: bool,
        smoothing_alpha: f64,
    ) -> Result<Self> {
        validate_template(&context)?;
        if !smoothing_alpha.is_finite() || smoothing_alpha < 0.0 {
            return Err(Error::invalid(format!(
                "smoothing alpha must be finite and >= 0, got {smoothing_alpha}"
            )));
        }
        Ok(Self {
            codebook_size,
            context,
            conditional,
            smoothing_alpha,
            tables: BTreeMap::new(),
            dists: HashMap::new(),
            unseen: CategoricalDistribution::uniform(codebook_size)?,
        })
    }

    pub fn context(&self) -> &[ContextOffset] {
        &self.context
    }

    pub fn smoothing_alpha(&self) -> f64 {
        self.smoothing_alpha
    }

    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    /// Raw counts for a context, if it was ever observed.
    pub fn counts(&self, label: Option<u32>, context: &[ContextSymbol]) -> Option<&[u64]> {
        self.tables
            .get(&TableKey {
                label,
                context: context.to_vec(),
            })
            .map(Vec::as_slice)
    }

    /// Smoothed next-token distribution for an explicit context.
    pub fn distribution_for(&self, label: Option<u32>, context: &[ContextSymbol]) -> &CategoricalDistribution {
        self.dists
            .get(&TableKey {
                label,
                context: context.to_vec(),
            })
            .unwrap_or(&self.unseen)
    }

    fn check_token(&self, t: u32) -> Result<()> {
        if t as usize >= self.codebook_size {
            return Err(Error::invalid(format!(
                "token {t} outside codebook of size {}",
                self.codebook_size
            )));
        }
        Ok(())
    }

    fn smooth(&self, counts: &[u64]) -> CategoricalDistribution {
        let total: u64 = counts.iter().sum();
        if total == 0 && self.smoothing_alpha == 0.0 {
            return self.unseen.clone();
        }
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 + self.smoothing_alpha)
            .collect();
        CategoricalDistribution::normalize_with_mass(&weights, total as f64)
            .expect("positive counts or alpha give positive mass")
    }

    fn rebuild(&mut self) {
        self.unseen = if self.smoothing_alpha > 0.0 {
            self.smooth(&vec![0; self.codebook_size])
        } else {
            CategoricalDistribution::uniform(self.codebook_size).expect("codebook checked")
        };
        self.dists = self
            .tables
            .iter()
            .map(|(k, c)| (k.clone(), self.smooth(c)))
            .collect();
    }

    fn context_at(&self, tokens: &[u32], shape: GridShape, row: usize, col: usize) -> Result<Vec<ContextSymbol>> {
        self.context
            .iter()
            .map(|off| {
                let r = row as i64 + off.dr as i64;
                let c = col as i64 + off.dc as i64;
                if r < 0 || c < 0 || r >= shape.height as i64 || c >= shape.width as i64 {
                    return Ok(ContextSymbol::Boundary);
                }
                let (r, c) = (r as usize, c as usize);
                let t = tokens[shape.index(r, c)];
                if t as usize >= self.codebook_size {
                    return Err(Error::TokenOutOfRange { token: t, row: r, col: c });
                }
                Ok(ContextSymbol::Token(t))
            })
            .collect()
    }

    fn label_at(&self, semantics: Option<&SemanticGrid>, shape: GridShape, row: usize, col: usize) -> Option<u32> {
        if self.conditional {
            semantics.map(|s| s.labels()[shape.index(row, col)])
        } else {
            None
        }
    }
}

impl PriorModel for MarkovGridPrior {
    fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    fn is_conditional(&self) -> bool {
        self.conditional
    }

    fn next_distribution(
        &self,
        prefix: &[u32],
        shape: GridShape,
        (row, col): (usize, usize),
        semantics: Option<&SemanticGrid>,
    ) -> Result<CategoricalDistribution> {
        check_query(self, prefix, shape, (row, col), semantics)?;
        let key = TableKey {
            label: self.label_at(semantics, shape, row, col),
            context: self.context_at(prefix, shape, row, col)?,
        };
        Ok(self.dists.get(&key).unwrap_or(&self.unseen).clone())
    }
}

/// Counts every position of every grid in `corpus`. Deterministic.
pub fn train_markov_prior(
    corpus: &[Scene],
    context: Vec<ContextOffset>,
    conditional: bool,
    smoothing_alpha: f64,
) -> Result<MarkovGridPrior> {
    let first = corpus
        .first()
        .ok_or_else(|| Error::invalid("cannot train on an empty corpus"))?;
    let codebook_size = first.tokens.codebook_size();
    let label_count = first.semantics.as_ref().map(SemanticGrid::label_count);
    let mut model = MarkovGridPrior::untrained(codebook_size, context, conditional, smoothing_alpha)?;
    for (i, scene) in corpus.iter().enumerate() {
        let grid = &scene.tokens;
        if grid.codebook_size() != codebook_size {
            return Err(Error::CodebookMismatch {
                expected: codebook_size,
                found: grid.codebook_size(),
            });
        }
        let semantics = scene.semantics.as_ref();
        if conditional {
            let sem = semantics
                .ok_or_else(|| Error::invalid(format!("grid {i} has no semantic map")))?;
            if Some(sem.label_count()) != label_count {
                return Err(Error::invalid(format!(
                    "grid {i} has {} labels, expected {}",
                    sem.label_count(),
                    label_count.unwrap_or(0)
                )));
            }
        }
        let shape = grid.shape();
        for (idx, &token) in grid.tokens().iter().enumerate() {
            let (row, col) = shape.position(idx);
            let key = TableKey {
                label: model.label_at(semantics, shape, row, col),
                context: model.context_at(grid.tokens(), shape, row, col)?,
            };
            model
                .tables
                .entry(key)
                .or_insert_with(|| vec![0; codebook_size])[token as usize] += 1;
        }
    }
    model.rebuild();
    Ok(model)
}

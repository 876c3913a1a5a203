//! Token and semantic grids.
//!
//! Both grids are stored row-major. Raster order (left to right, top to
//! bottom) is the only sequence order used anywhere in the crate, so a
//! position index `i` always means `row * width + col`.

use crate::error::{Error, Result};

/// Number of entries in a vector-quantized codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CodebookSpec {
    size: usize,
}

impl CodebookSpec {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid(format!(
                "codebook size must be at least 2, got {size}"
            )));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got {height}x{width}"
            )));
        }
        Ok(Self { height, width })
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.height && col < self.width
    }

    /// Raster index of `(row, col)`.
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Inverse of [`GridShape::index`].
    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.width, index % self.width)
    }

    fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub(crate) fn ensure_same(&self, other: &GridShape) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }
}

/// Checks the token grid invariants on raw parts.
///
/// Accepts iff `tokens` has exactly `height * width` entries and every token
/// lies in `[0, codebook_size)`.
pub fn validate_grid(
    height: usize,
    width: usize,
    codebook_size: usize,
    tokens: &[u32],
) -> Result<()> {
    let shape = GridShape::new(height, width)?;
    CodebookSpec::new(codebook_size)?;
    if tokens.len() != shape.len() {
        return Err(Error::LengthMismatch {
            expected: shape.len(),
            found: tokens.len(),
        });
    }
    if let Some(i) = tokens.iter().position(|&t| t as usize >= codebook_size) {
        let (row, col) = shape.position(i);
        return Err(Error::TokenOutOfRange {
            token: tokens[i],
            row,
            col,
        });
    }
    Ok(())
}

/// An `H×W` grid of codebook indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenGrid {
    shape: GridShape,
    codebook_size: usize,
    tokens: Vec<u32>,
}

impl TokenGrid {
    pub fn new(height: usize, width: usize, codebook_size: usize, tokens: Vec<u32>) -> Result<Self> {
        validate_grid(height, width, codebook_size, &tokens)?;
        Ok(Self {
            shape: GridShape { height, width },
            codebook_size,
            tokens,
        })
    }

    pub fn filled(shape: GridShape, codebook_size: usize, token: u32) -> Result<Self> {
        Self::new(shape.height, shape.width, codebook_size, vec![token; shape.len()])
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<u32> {
        self.tokens
    }

    pub fn get(&self, row: usize, col: usize) -> Option<u32> {
        self.shape
            .contains(row, col)
            .then(|| self.tokens[self.shape.index(row, col)])
    }

    /// Applies `f` to every token, e.g. a codebook permutation.
    pub fn map_tokens(&self, f: impl Fn(u32) -> u32) -> Result<Self> {
        Self::new(
            self.height(),
            self.width(),
            self.codebook_size,
            self.tokens.iter().map(|&t| f(t)).collect(),
        )
    }
}

/// An `H×W` grid of semantic labels aligned with a [`TokenGrid`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SemanticGrid {
    shape: GridShape,
    label_count: usize,
    labels: Vec<u32>,
}

impl SemanticGrid {
    pub fn new(height: usize, width: usize, label_count: usize, labels: Vec<u32>) -> Result<Self> {
        let shape = GridShape::new(height, width)?;
        if label_count == 0 {
            return Err(Error::invalid("label count must be positive"));
        }
        if labels.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                found: labels.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&l| l as usize >= label_count) {
            let (row, col) = shape.position(i);
            return Err(Error::LabelOutOfRange {
                label: labels[i],
                row,
                col,
            });
        }
        Ok(Self {
            shape,
            label_count,
            labels,
        })
    }

    pub fn uniform(shape: GridShape, label_count: usize, label: u32) -> Result<Self> {
        Self::new(shape.height, shape.width, label_count, vec![label; shape.len()])
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> Option<u32> {
        self.shape
            .contains(row, col)
            .then(|| self.labels[self.shape.index(row, col)])
    }

    /// Fails unless this grid annotates a grid of the given shape.
    pub fn ensure_covers(&self, shape: GridShape) -> Result<()> {
        shape.ensure_same(&self.shape)
    }
}

/// A token grid with its optional semantic annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scene {
    pub tokens: TokenGrid,
    pub semantics: Option<SemanticGrid>,
}

impl Scene {
    pub fn new(tokens: TokenGrid, semantics: Option<SemanticGrid>) -> Result<Self> {
        if let Some(sem) = &semantics {
            sem.ensure_covers(tokens.shape())?;
        }
        Ok(Self { tokens, semantics })
    }

    pub fn unlabeled(tokens: TokenGrid) -> Self {
        Self {
            tokens,
            semantics: None,
        }
    }
}

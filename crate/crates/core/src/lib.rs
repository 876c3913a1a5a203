//! Style-guided sampling for autoregressive priors over vector-quantized
//! token grids.
//!
//! A style exemplar's index histogram, divided element-wise by the dataset's
//! index histogram, gives a likelihood vector over the codebook. Multiplying
//! each autoregressive step's prior by that vector and renormalizing pulls
//! generated grids toward the exemplar's style without touching the model.
//!
//! Modules, bottom-up:
//! - [`grid`], [`categorical`], [`codec`]: value types and file formats.
//! - [`distributions`]: global, per-region, per-cell and Monte-Carlo
//!   histogram estimators.
//! - [`guidance`]: likelihood vectors and prior re-balancing.
//! - [`prior`]: the autoregressive model interface, a count-based Markov
//!   prior, and an exact enumeration oracle.
//! - [`sampler`]: the generation loop.
//! - [`world`]: a synthetic style benchmark.
//! - [`metrics`]: divergences, style-match classification, reports.

pub mod categorical;
pub mod codec;
pub mod distributions;
pub mod error;
pub mod grid;
pub mod guidance;
pub mod metrics;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod world;

pub use categorical::CategoricalDistribution;
pub use error::{Error, Result};
pub use grid::{CodebookSpec, GridShape, Scene, SemanticGrid, TokenGrid};

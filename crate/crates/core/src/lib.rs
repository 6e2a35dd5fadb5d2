//! Sparse limited-persistence scattering models for spotlight SAR chips.
//!
//! The crate turns complex image chips into polar phase history, fits a
//! group-sparse model whose scattering coefficients vary smoothly with azimuth,
//! and uses the fitted model to synthesise chips at nearby poses. Baseline
//! augmenters, a point-scatterer phantom and dataset tooling live alongside.

pub mod baseline;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod image;
pub mod model;
pub mod nudft;
pub mod phantom;
pub mod solver;
pub mod synthesis;
pub mod transform;
pub mod window;

pub use error::{Error, Result};
pub use geometry::{make_polar_grid, make_spatial_grid, PolarGrid, RadarParams, SpatialGrid, SPEED_OF_LIGHT};
pub use image::{ComplexImage, Rotation};
pub use model::{CoefficientMatrix, GaussianBasisSet, ScatteringModel, ScatteringOperator};
pub use synthesis::{augment_record, PipelineConfig, SynthesisConfig, SyntheticRecord};
pub use transform::{PhaseHistory, TransformMode, TransformOptions};
pub use window::WindowSpec;

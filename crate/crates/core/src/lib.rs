//! Pseudo-spectral toolkit for building and checking subsolutions of the
//! dissipative Aw-Rascle system on the periodic box `[-1, 1)^d`, `d` in {2, 3}.

pub mod drift;
pub mod eigen;
pub mod error;
pub mod lame;
pub mod model;
pub mod profile;
pub mod quad;
pub mod reduce;
pub mod spectral;
pub mod config;
pub mod pipeline;
pub mod scenario;
pub mod subsolution;
pub mod verify;

pub use eigen::{lambda_max, pointwise_inequality_slack, SymMatrix};
pub use error::{Error, Result};
pub use model::{ModelFunctions, Offset, Pressure, Viscosity};
pub use spectral::{Grid, Helmholtz, MatrixField, ScalarField, SymTensorField0, VectorField};

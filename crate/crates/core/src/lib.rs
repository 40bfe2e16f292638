//! Orthogonal polynomials on the unit circle with real Schur parameters.

pub mod calibration;
pub mod checks;
pub mod construction;
pub mod entropy;
pub mod error;
pub mod grid;
pub mod logsum;
pub mod measures;
pub mod opuc;
pub mod oracle;
pub mod schur;
pub mod spikes;

pub use error::{Error, Result};
pub use grid::CircleGrid;
pub use measures::{MeasureSpec, MomentVector};
pub use schur::SchurSequence;

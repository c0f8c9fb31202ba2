//! Random walks on free groups and free products of cyclic groups: sampling,
//! entropy and drift, the Poisson boundary and its harmonic measure, Doob
//! conditioning, strip and ray criteria, and walks on matrix groups.

pub mod boundary;
pub mod conditional;
pub mod criteria;
pub mod error;
pub mod group;
pub mod mc;
pub mod matrix;
pub mod measure;
pub mod scalar;
pub mod walk;

pub use error::{Error, Result};
pub use group::{Element, GroupKind, GroupSpec, Letter};
pub use mc::{Estimate, EstimatorReport, McConfig};
pub use measure::FiniteMeasure;

/// Floating-point step distribution; the default for sampling.
pub type Measure = FiniteMeasure<f64>;
/// Exact rational step distribution.
pub type ExactMeasure = FiniteMeasure<num_rational::BigRational>;
/// Double-precision matrices for the SL(d, R) walks.
pub type Matrix = matrix::SquareMatrix<f64>;

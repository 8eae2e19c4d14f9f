//! Deep blind compressed sensing.
//!
//! Learns a chain of dictionaries `D1 ⋯ DM` and sparse codes `Z` directly from
//! compressive measurements `Y = A X` by alternating minimization of
//! `‖Y − A D1 ⋯ DM Z‖²_F + λ‖Z‖₁`, and evaluates the learned codes as
//! features with a nearest-neighbour classifier.

pub mod dbcs;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod linear_map;
pub mod matrix;
pub mod normalize;
pub mod operators;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use io::{mat_read, mat_write};
pub use linear_map::LinearMap;
pub use matrix::DenseMatrix;
pub use normalize::normalize_columns;
pub use operators::{build_operator, MeasurementOperator, OperatorKind, OperatorParams};
pub use rng::{gaussian_matrix, Rng};
pub use solvers::SolverOptions;

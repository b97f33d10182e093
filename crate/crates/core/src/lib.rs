//! Lift calculus for semisprays on iterated tangent bundles over a single
//! global chart: vertical/complete lifts of functions, vector fields,
//! metrics, Lagrangians and connections; geodesic and Jacobi dynamics; spray,
//! homogeneity, projective and symmetry checks.

pub mod catalog;
pub mod chart;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod fields;
mod linalg;
pub mod models;
pub mod output;
pub mod sampling;
pub mod semispray;
pub mod suite;
pub mod symmetry;

pub use error::{Error, Result};

//! Numerics for semiclassical pseudospectra of one-dimensional
//! non-self-adjoint Schrodinger operators -h^2 u'' + V u on a bounded
//! interval with Dirichlet ends.
//!
//! The crate builds piecewise-analytic potentials from expression
//! strings, discretizes the operator on uniform grids, and measures
//! resolvent norms against the distance to the numerical-range region
//! Phi(V) = closure(ran V) + [0, infinity). On top of that sit the
//! constructive pieces: pseudomode residual sweeps, shooting
//! eigenvalues, Green kernels with their rank-one interface coupling,
//! two-sided WKB constants, and the rotation trick that conjugates a
//! split operator pair into block form.

pub mod catalog;
pub mod discretize;
pub mod error;
pub mod expr;
pub mod green;
pub mod io;
pub mod linalg;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod quasimode;
pub mod svd;
pub mod twist;
pub mod util;
pub mod wkb;

pub use error::{Error, Result};
pub use linalg::{C64, Matrix, ResolventMap};
pub use potential::{PhiRegion, Potential};

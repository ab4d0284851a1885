//! Polynomial system solvers used by the minimal solvers.

pub mod actionmatrix;
pub mod e3q3;
pub mod poly;
pub mod univariate;

pub use actionmatrix::{hidden_variable_eliminate, solve_baseline_system, solve_cubic_system, PolySystem};
pub use e3q3::solve_3q3;
pub use poly::{Poly3, PolyVec3};

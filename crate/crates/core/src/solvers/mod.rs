//! Minimal solvers. Each returns every real candidate; selection among
//! candidates is left to robust scoring.

pub mod epipolar;
pub mod rotation;
pub mod sixdof;
pub mod translation;

pub use epipolar::{epipolar_residual, essential_matrix, instant_pose, sampson_distance};
pub use rotation::solve_rotation;
pub use sixdof::{solve_6dof, solve_6dof_baseline};
pub use translation::{solve_tx, solve_txy, solve_txyz, TxSolution, TxySolution};

use crate::geometry::MotionEstimate;

/// Candidates sorted by ascending algebraic residual.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverResult {
    pub candidates: Vec<MotionEstimate>,
    pub residuals: Vec<f64>,
}

impl SolverResult {
    pub fn new(mut pairs: Vec<(MotionEstimate, f64)>) -> Self {
        pairs.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (candidates, residuals) = pairs.into_iter().unzip();
        Self { candidates, residuals }
    }

    pub fn single(estimate: MotionEstimate, residual: f64) -> Self {
        Self {
            candidates: vec![estimate],
            residuals: vec![residual],
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn best(&self) -> Option<&MotionEstimate> {
        self.candidates.first()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MotionEstimate, f64)> {
        self.candidates.iter().zip(self.residuals.iter().copied())
    }
}

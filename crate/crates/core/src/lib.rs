pub mod bench;
pub mod error;
pub mod geometry;
pub mod io;
pub mod polysolve;
pub mod rectify;
pub mod refine;
pub mod robust;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::*;

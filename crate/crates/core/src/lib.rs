//! Systems of four subspaces of a Hilbert space: finite-dimensional tools,
//! defect computations and an infinite-dimensional exotic family.

pub mod cli;
pub mod endo;
pub mod error;
pub mod exotic;
pub mod linalg;
pub mod subspaces;
pub mod systems;
pub mod weights;

pub use error::{Error, Result};
pub use linalg::TolerancePolicy;
pub use subspaces::Subspace;
pub use systems::FourSystem;

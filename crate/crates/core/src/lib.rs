pub mod cli;
pub mod error;
pub mod flows;
pub mod invariants;
pub mod lattice;
pub mod poisson;
pub mod poly;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{PeriodicOperator, ToleranceConfig};
pub use poisson::{BracketKind, Gradient};

pub mod amplitude;
pub mod caps;
pub mod error;
pub mod isis_solver;
pub mod lattice_states;
pub mod modq;
pub mod reductions;
pub mod rng;
pub mod statevec;

pub use error::{Error, Result};

pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod integrate;
pub mod liouville;
pub mod mcwf;
pub mod model;
pub mod observables;
pub mod subspace;

pub use error::{Error, Result};

pub mod cumulants;
pub mod dense;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod lieb_robinson;
pub mod open_chain;
pub mod operator;
pub mod pauli;
pub mod special;
pub mod states;
pub mod transport;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use operator::{geometry, Geometry, LocalOperator};
pub use pauli::{Pauli, PauliString, Site};

/// Library version, embedded in experiment outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

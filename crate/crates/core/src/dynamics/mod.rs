//! Heisenberg-picture dynamics on finite windows.

mod evolver;
mod generator;
mod interaction;
mod localize;
mod sparse_rk4;
mod window;

pub use evolver::{DenseEvolver, EvolverConfig, Functional, Method};
pub use generator::{Direction, LindbladGenerator, PlacedJump, SchrodingerGenerator};
pub use interaction::{hamiltonian_window, ChainModel, Interaction};
pub use localize::localize;
pub use sparse_rk4::SparseRk4;
pub use window::{Boundary, Window};

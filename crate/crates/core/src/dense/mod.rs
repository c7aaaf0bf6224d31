//! Dense and block-sparse linear algebra on qubit windows.

mod linalg;
mod sector;

pub use linalg::{expm, frobenius, gemm, lanczos_extremes, matmul, pauli_decompose, spectral_norm, walsh_hadamard};
pub use sector::{Basis, BlockOp, Csr, SectorSparse, SparseEntries, SECTOR_LEAK_TOL};

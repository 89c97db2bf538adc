//! Composite Hilbert spaces, states and sparse operators.

mod space;
pub mod sparse;
mod state;

pub use space::{build_space, BasisLabel, Factor, Level, SpaceDescriptor};
pub use sparse::CsrMatrix;
pub use state::{
    annihilation, creation, diagonal_operator, expectation, fidelity, ket, ket_str,
    max_modulus, product_operator, superpose, transition, DensityOperator, LocalOp, OperatorMatrix, StateRef,
    StateVector,
};
pub(crate) use state::min_eigenvalue;

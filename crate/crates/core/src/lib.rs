//! Simulation engine for fusing atomic W states through quantum Zeno
//! dynamics in cavity QED.
//!
//! The crate is layered bottom-up:
//!
//! * [`hilbert`]: composite spaces, states, sparse operators.
//! * [`hamiltonian`]: single-cavity and cavity-fiber-cavity models.
//! * [`zeno`]: Zeno subspaces, eigenprojections, adiabatic elimination.
//! * [`dynamics`]: Schrodinger and Lindblad propagation.
//! * [`fusion`]: the fusion protocol on a spectator flag register.

pub mod dynamics;
pub mod error;
pub mod fusion;
pub mod hamiltonian;
pub mod hilbert;
pub mod zeno;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use num_complex::Complex64 as C64;

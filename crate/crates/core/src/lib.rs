//! Finite-level constructions behind the local Dirichlet form on the
//! Sierpiński gasket: the cell graphs `X_n`, averaged energies `A_n`/`D_n`,
//! effective resistances, good (harmonic) functions, Besov-type series and
//! the Abel-summation probe as `β ↑ β* = log 5 / log 2`.

pub mod audit;
pub mod besov;
pub mod chain;
pub mod cli;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod good;
pub mod resistance;
pub mod scalar;

pub use error::{Error, Result};

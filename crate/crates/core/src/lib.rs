//! Winding numbers and twisted traces of cycle integrals of `dlog(j - 1728)`
//! on modular curves, the theta series that complete their generating
//! functions, and the lattice machinery (Weil representation, quadratic
//! forms, Zwegers theta functions) needed to check the identities numerically.

pub mod arith;
pub mod cycles;
pub mod error;
pub mod hyperbolic;
pub mod mock;
pub mod modfun;
pub mod qforms;
pub mod qseries;
pub mod quad;
pub mod theta;
pub mod verify;
pub mod weil;

pub use error::{Error, Result};
pub use num_complex::Complex64;

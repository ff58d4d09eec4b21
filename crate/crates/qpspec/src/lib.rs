//! Numerics for multi-frequency quasi-periodic Schrodinger operators
//! (H u)_n = u_{n+1} + u_{n-1} + lambda V(theta + n alpha) u_n:
//! Fourier series on the torus, SL(2) cocycles, Weyl-type bounds on the spectral
//! measure, triangular power sums, a KAM almost-reducibility iteration, and a
//! Holder-1/2 modulus-of-continuity scan.

pub mod cocycle;
pub mod error;
pub mod format;
pub mod holder;
pub mod kam;
pub mod mat2;
pub mod torus;
pub mod triangular;
pub mod weyl;

pub use error::{Error, Result};

//! Entanglement entropy dynamics of a spin-boson pair, computed exactly and
//! from complex classical trajectories.
//!
//! Coordinates are always ordered `(uA, uB, vA, vB)`: the canonical mode is
//! part A, the spin is part B.

pub mod classical_dynamics;
pub mod cli;
pub mod coherent_states;
pub mod entanglement;
pub mod example_model;
pub mod linalg;
pub mod propagator;
pub mod rootfinder;

mod error;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Shorthand used throughout the crate.
pub type C64 = Complex64;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Converts a spin quantum number to the integer `2j`.
pub fn two_j(j: f64) -> Result<u32> {
    let t = 2.0 * j;
    if !(j > 0.0) || (t - t.round()).abs() > 1e-12 || t > u32::MAX as f64 {
        return Err(Error::InvalidParameter(format!("j = {j} is not a positive half-integer")));
    }
    Ok(t.round() as u32)
}

/// `z^n` by repeated squaring.
pub fn cpowi(z: C64, n: u32) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    let mut base = z;
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

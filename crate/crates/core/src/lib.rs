//! Blind super-resolution receiver for integrated sensing and communication.
//!
//! Echo samples from a MIMO radar carry unknown communication symbols. The
//! receiver recovers the 4-D target parameters (delay, Doppler, AoD, AoA),
//! complex gains and transmitted symbols jointly by solving the dual of a
//! lifted atomic norm problem as a semidefinite program.
//!
//! Pipeline: [`model`] builds scenes and the lifted measurement operator,
//! [`solver`] solves the dual SDR, [`localize`] reads targets off the dual
//! polynomial, [`decode`] recovers gains and symbols. [`certify`] builds
//! kernel-based dual certificates as an independent oracle, [`baselines`]
//! holds the pilot-aided and on-grid comparators, [`bench`] the metrics and
//! Monte Carlo harness.

pub mod baselines;
pub mod bench;
pub mod certify;
pub mod cx;
pub mod decode;
mod error;
pub mod localize;
pub mod model;
pub mod solver;

pub use error::{Error, Result};

/// Complex double.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVec = nalgebra::DVector<C64>;

/// Wrap-around distance on the unit torus.
pub fn wrap_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

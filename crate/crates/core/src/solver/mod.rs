//! Dual SDR construction and the ADMM conic solver.

pub mod conic;
pub mod sdr;

pub use conic::{AdmmOptions, Cone, ConicProgram, SolveStatus};
pub use sdr::{build_clean_sdr, build_noisy_sdr, build_robust_sdr, solve, SdpProblem, SdpSolution};

use crate::localize::DualPolynomial;
use crate::model::MeasurementOperator;
use crate::{CVec, Error, Result};

/// Grid maximum of `‖X*(q) a(τ)‖₂` over `[0,1)⁴`, `res` points per axis.
pub fn dual_atomic_norm_check(q: &CVec, op: &MeasurementOperator, res: usize) -> Result<f64> {
    if res < 16 {
        return Err(Error::InvalidArgument("grid resolution must be at least 16".into()));
    }
    let poly = DualPolynomial::new(q, op)?;
    Ok(poly.eval_grid([res; 4])?.max())
}

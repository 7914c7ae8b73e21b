//! Problem-size counts and per-iteration cost of the ADMM solver.

use crate::model::{build_operator, gaussian_vec, CodingMatrix, Flavor, SceneConfig};
use crate::solver::{build_clean_sdr, solve, AdmmOptions};
use crate::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub scene: SceneConfig,
    /// `E = (2N+1)Nr + ((2N+1)²NtNr)²`
    pub variables: u128,
    /// `F = ((2N+1)²NtNr)² + 1`
    pub constraints: u128,
    /// interior-point estimate `(E+F)^{1.5} E²`
    pub interior_point_estimate: f64,
    /// `(4N²NtNr)⁵`
    pub asymptotic_estimate: f64,
    /// side of the Hermitian PSD block handled by ADMM
    pub psd_dim: usize,
    /// real equality rows of the conic program before redundancy removal
    pub conic_rows: usize,
    pub trace_constraints: usize,
    /// dominant cost per ADMM iteration: one Hermitian eigendecomposition
    pub eig_flops_per_iteration: f64,
    pub measured_seconds_per_iteration: Option<f64>,
}

/// Counts for `scene`. With `measure_iters > 0` a random noiseless instance
/// is also solved for that many ADMM iterations and timed.
pub fn complexity_report(scene: &SceneConfig, measure_iters: usize) -> Result<ComplexityReport> {
    scene.validate()?;
    let (n, nt, nr, t) = (
        scene.half_len as u128,
        scene.n_tx as u128,
        scene.n_rx as u128,
        scene.subspace_dim,
    );
    let m = (2 * n + 1) * (2 * n + 1) * nt * nr;
    let variables = (2 * n + 1) * nr + m * m;
    let constraints = m * m + 1;
    let e = variables as f64;
    let f = constraints as f64;
    let base = 4.0 * (n * n * nt * nr) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
    let codings: Vec<CodingMatrix> = (0..scene.n_tx)
        .map(|_| CodingMatrix::gaussian(scene.lbar(), t, &mut rng))
        .collect();
    let op = build_operator(scene, &codings, Flavor::PerAntennaCoded)?;
    let y = gaussian_vec(op.n_meas(), &mut rng);
    let problem = build_clean_sdr(&y, &op)?;
    let psd_dim = scene.atom_len() + t;
    let measured = if measure_iters > 0 {
        let opts = AdmmOptions {
            max_iters: measure_iters,
            tol: 1e-300,
            ..AdmmOptions::default()
        };
        let start = Instant::now();
        let sol = solve(&problem, &opts)?;
        Some(start.elapsed().as_secs_f64() / sol.iterations.max(1) as f64)
    } else {
        None
    };
    Ok(ComplexityReport {
        scene: scene.clone(),
        variables,
        constraints,
        interior_point_estimate: (e + f).powf(1.5) * e * e,
        asymptotic_estimate: base.powi(5),
        psd_dim,
        conic_rows: problem.program.rows.len(),
        trace_constraints: problem.n_trace_constraints,
        // complex Householder tridiagonalization plus eigenvectors, ~(4/3 + 4)·4 n³
        eig_flops_per_iteration: 64.0 / 3.0 * (psd_dim as f64).powi(3),
        measured_seconds_per_iteration: measured,
    })
}

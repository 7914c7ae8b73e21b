//! Semidefinite relaxations of the dual lifted atomic norm problems.
//!
//! The dual maximizes `⟨q, y⟩_R` subject to `sup_τ ‖X*(q) a(τ)‖₂ ≤ 1`.
//! Writing `a(τ) = W v(τ)` with `W = I ⊗ F ⊗ F`, `F_{l,n} = e^{i2πnl/L̄}/L̄`
//! and `v(τ)` the unit-modulus 4-D Vandermonde vector, the constraint becomes
//! `‖C v(τ)‖ ≤ 1` with `C = X*(q) W`. It is certified by a Hermitian `Q` with
//! `[[Q, Cᴴ], [C, I_T]] ⪰ 0` whose 4-D Toeplitz diagonal sums equal `δ`.

use super::conic::{herm_offset, solve_conic, AdmmOptions, Cone, ConicProgram, SolveStatus};
use crate::error::check_len;
use crate::model::MeasurementOperator;
use crate::{cx, CMat, CVec, Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Where the SDR unknowns live inside the conic variable vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdrLayout {
    pub n_meas: usize,
    pub atom_len: usize,
    pub subspace_dim: usize,
    /// offset of the interleaved `(Re q_j, Im q_j)` free block
    pub q_offset: usize,
    /// offset of the `(M+T)`-dimensional Hermitian block
    pub z_offset: usize,
    /// offset and size of the jammer Hermitian block, robust variant only
    pub jammer: Option<(usize, usize)>,
    pub lambda: Option<f64>,
    pub delta2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpProblem {
    pub program: ConicProgram,
    pub layout: SdrLayout,
    /// Number of 4-D Toeplitz trace constraints (complex).
    pub n_trace_constraints: usize,
}

impl SdpProblem {
    /// Dimensions of the Hermitian PSD blocks.
    pub fn psd_blocks(&self) -> Vec<usize> {
        self.program
            .cones
            .iter()
            .filter_map(|c| match c {
                Cone::Psd(n) => Some(*n),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpSolution {
    #[serde(with = "cx::dvec")]
    pub q: CVec,
    #[serde(with = "cx::dmat")]
    pub big_q: CMat,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective_value: f64,
    pub iterations: usize,
}

/// Linear functional over conic coordinates with complex coefficients,
/// split into its real and imaginary rows.
#[derive(Default)]
struct CRow {
    re: Vec<(usize, f64)>,
    im: Vec<(usize, f64)>,
}

impl CRow {
    /// Adds `c · Z_ij` for a Hermitian block at `base`.
    fn herm(&mut self, base: usize, i: usize, j: usize, c: C64) {
        if i == j {
            let o = base + herm_offset(i, i);
            self.re.push((o, c.re));
            self.im.push((o, c.im));
            return;
        }
        // Z_ij = (x + i y)/√2 for i < j, its conjugate below the diagonal
        let (a, b, sg) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let o = base + herm_offset(a, b);
        let s = FRAC_1_SQRT_2;
        self.re.push((o, c.re * s));
        self.re.push((o + 1, -c.im * s * sg));
        self.im.push((o, c.im * s));
        self.im.push((o + 1, c.re * s * sg));
    }

    /// Adds `c · q_j` where `q` sits interleaved at `base`.
    fn free(&mut self, base: usize, j: usize, c: C64) {
        let o = base + 2 * j;
        self.re.push((o, c.re));
        self.re.push((o + 1, -c.im));
        self.im.push((o, c.im));
        self.im.push((o + 1, c.re));
    }

    fn push(self, p: &mut ConicProgram, rhs: C64) {
        p.push_row(self.re, rhs.re);
        p.push_row(self.im, rhs.im);
    }
}

/// `W = I_{NrNt} ⊗ F ⊗ F`.
pub fn synthesis_matrix(op: &MeasurementOperator) -> CMat {
    let lbar = op.lbar();
    let n = op.half_len as i64;
    let f = CMat::from_fn(lbar, lbar, |l, k| {
        let (l, k) = (l as i64 - n, k as i64 - n);
        C64::from_polar(1.0 / lbar as f64, 2.0 * PI * (l * k) as f64 / lbar as f64)
    });
    let ff = f.kronecker(&f);
    CMat::identity(op.n_tx * op.n_rx, op.n_tx * op.n_rx).kronecker(&ff)
}

/// Coefficient matrix `C = X*(q) W` of the dual polynomial.
pub fn dual_coefficients(op: &MeasurementOperator, q: &CVec) -> Result<CMat> {
    Ok(op.adjoint(q)? * synthesis_matrix(op))
}

/// Multi-index `(r, s, n1, n2)` of a flat atom/coefficient index.
fn multi_index(op: &MeasurementOperator, i: usize) -> [i64; 4] {
    let lbar = op.lbar();
    let m = i % lbar;
    let l = (i / lbar) % lbar;
    let s = (i / (lbar * lbar)) % op.n_tx;
    let r = i / (lbar * lbar * op.n_tx);
    [r as i64, s as i64, l as i64, m as i64]
}

fn add_core(op: &MeasurementOperator, p: &mut ConicProgram, q_off: usize, z_off: usize) -> Result<usize> {
    let (mlen, t, l) = (op.atom_len(), op.subspace_dim, op.n_meas());
    // Toeplitz trace classes: every entry of Q belongs to exactly one
    // offset tuple, so one pass over Q assigns all coefficients.
    let mi: Vec<[i64; 4]> = (0..mlen).map(|i| multi_index(op, i)).collect();
    let mut classes: HashMap<[i64; 4], CRow> = HashMap::new();
    let mut order: Vec<[i64; 4]> = Vec::new();
    for i in 0..mlen {
        for j in 0..mlen {
            let d = [
                mi[j][0] - mi[i][0],
                mi[j][1] - mi[i][1],
                mi[j][2] - mi[i][2],
                mi[j][3] - mi[i][3],
            ];
            let e = classes.entry(d).or_insert_with(|| {
                order.push(d);
                CRow::default()
            });
            e.herm(z_off, i, j, C64::from(1.0));
        }
    }
    let n_classes = order.len();
    for d in order {
        let row = classes.remove(&d).expect("class exists");
        let rhs = if d == [0; 4] { 1.0 } else { 0.0 };
        row.push(p, C64::from(rhs));
    }
    // lower-right identity
    for a in 0..t {
        for b in a..t {
            let mut row = CRow::default();
            row.herm(z_off, mlen + a, mlen + b, C64::from(1.0));
            row.push(p, C64::from(if a == b { 1.0 } else { 0.0 }));
        }
    }
    // lower-left block equals C(q) = Σ_j q_j X*(e_j) W
    let w = synthesis_matrix(op);
    let mut basis = Vec::with_capacity(l);
    for j in 0..l {
        let mut e = CVec::zeros(l);
        e[j] = C64::from(1.0);
        basis.push(op.adjoint(&e)? * &w);
    }
    for tt in 0..t {
        for col in 0..mlen {
            let mut row = CRow::default();
            row.herm(z_off, mlen + tt, col, C64::from(1.0));
            for (j, bj) in basis.iter().enumerate() {
                let c = bj[(tt, col)];
                if c.norm_sqr() > 1e-30 {
                    row.free(q_off, j, -c);
                }
            }
            row.push(p, C64::from(0.0));
        }
    }
    Ok(n_classes)
}

fn set_objective(p: &mut ConicProgram, q_off: usize, y: &CVec) {
    // minimize -Re(qᴴy)
    for (j, yj) in y.iter().enumerate() {
        p.objective[q_off + 2 * j] = -yj.re;
        p.objective[q_off + 2 * j + 1] = -yj.im;
    }
}

/// Clean dual SDR.
pub fn build_clean_sdr(y: &CVec, op: &MeasurementOperator) -> Result<SdpProblem> {
    check_len("y", op.n_meas(), y.len())?;
    let (l, mlen, t) = (op.n_meas(), op.atom_len(), op.subspace_dim);
    let mut p = ConicProgram::new(vec![Cone::Free(2 * l), Cone::Psd(mlen + t)]);
    let (q_off, z_off) = (0, 2 * l);
    let n_trace = add_core(op, &mut p, q_off, z_off)?;
    set_objective(&mut p, q_off, y);
    Ok(SdpProblem {
        program: p,
        layout: SdrLayout {
            n_meas: l,
            atom_len: mlen,
            subspace_dim: t,
            q_offset: q_off,
            z_offset: z_off,
            jammer: None,
            lambda: None,
            delta2: 0.0,
        },
        n_trace_constraints: n_trace,
    })
}

/// Noise-aware dual SDR without a jammer term: objective
/// `⟨q, y⟩_R − δ₂‖q‖₂`.
pub fn build_noisy_sdr(y: &CVec, op: &MeasurementOperator, delta2: f64) -> Result<SdpProblem> {
    check_len("y", op.n_meas(), y.len())?;
    if !(delta2 >= 0.0) {
        return Err(Error::InvalidArgument("delta2 must be nonnegative".into()));
    }
    let (l, mlen, t) = (op.n_meas(), op.atom_len(), op.subspace_dim);
    let mut p = ConicProgram::new(vec![Cone::Free(2 * l), Cone::Psd(mlen + t), Cone::Soc(1 + 2 * l)]);
    let offs = p.offsets();
    let (q_off, z_off, soc_off) = (offs[0], offs[1], offs[2]);
    let n_trace = add_core(op, &mut p, q_off, z_off)?;
    set_objective(&mut p, q_off, y);
    add_noise_ball(&mut p, q_off, soc_off, l, delta2);
    Ok(SdpProblem {
        program: p,
        layout: SdrLayout {
            n_meas: l,
            atom_len: mlen,
            subspace_dim: t,
            q_offset: q_off,
            z_offset: z_off,
            jammer: None,
            lambda: None,
            delta2,
        },
        n_trace_constraints: n_trace,
    })
}

// epigraph of ‖q‖: (t, w) in SOC with w = q
fn add_noise_ball(p: &mut ConicProgram, q_off: usize, soc_off: usize, l: usize, delta2: f64) {
    p.objective[soc_off] = delta2;
    for k in 0..2 * l {
        p.push_row(vec![(soc_off + 1 + k, 1.0), (q_off + k, -1.0)], 0.0);
    }
}

/// Robust dual SDR: objective `⟨q, y_w⟩_R − δ₂‖q‖₂` and jammer dual norm
/// `sup_ψ ‖P conj(a_{Nr}(ψ))‖₂ ≤ λ` with `P[p, r̃] = q_{(r̃,p)}`.
pub fn build_robust_sdr(y_w: &CVec, op: &MeasurementOperator, lambda: f64, delta2: f64) -> Result<SdpProblem> {
    check_len("y", op.n_meas(), y_w.len())?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    if !(delta2 >= 0.0) {
        return Err(Error::InvalidArgument("delta2 must be nonnegative".into()));
    }
    let (l, mlen, t) = (op.n_meas(), op.atom_len(), op.subspace_dim);
    let (nr, lbar) = (op.n_rx, op.lbar());
    let jdim = nr + lbar;
    let mut p = ConicProgram::new(vec![
        Cone::Free(2 * l),
        Cone::Psd(mlen + t),
        Cone::Soc(1 + 2 * l),
        Cone::Psd(jdim),
    ]);
    let offs = p.offsets();
    let (q_off, z_off, soc_off, j_off) = (offs[0], offs[1], offs[2], offs[3]);
    let n_trace = add_core(op, &mut p, q_off, z_off)?;
    set_objective(&mut p, q_off, y_w);
    add_noise_ball(&mut p, q_off, soc_off, l, delta2);
    // jammer block [[W, Pᴴ], [P, λ² I]]
    for d in -(nr as i64 - 1)..=(nr as i64 - 1) {
        let mut row = CRow::default();
        for i in 0..nr as i64 {
            let j = i + d;
            if (0..nr as i64).contains(&j) {
                row.herm(j_off, i as usize, j as usize, C64::from(1.0));
            }
        }
        row.push(&mut p, C64::from(if d == 0 { 1.0 } else { 0.0 }));
    }
    for a in 0..lbar {
        for b in a..lbar {
            let mut row = CRow::default();
            row.herm(j_off, nr + a, nr + b, C64::from(1.0));
            row.push(&mut p, C64::from(if a == b { lambda * lambda } else { 0.0 }));
        }
    }
    for pp in 0..lbar {
        for rt in 0..nr {
            let mut row = CRow::default();
            row.herm(j_off, nr + pp, rt, C64::from(1.0));
            row.free(q_off, rt * lbar + pp, C64::from(-1.0));
            row.push(&mut p, C64::from(0.0));
        }
    }
    Ok(SdpProblem {
        program: p,
        layout: SdrLayout {
            n_meas: l,
            atom_len: mlen,
            subspace_dim: t,
            q_offset: q_off,
            z_offset: z_off,
            jammer: Some((j_off, jdim)),
            lambda: Some(lambda),
            delta2,
        },
        n_trace_constraints: n_trace,
    })
}

/// Solves an SDR and extracts `q` and `Q`.
pub fn solve(problem: &SdpProblem, opts: &AdmmOptions) -> Result<SdpSolution> {
    let sol = solve_conic(&problem.program, opts)?;
    let lay = &problem.layout;
    let q = CVec::from_fn(lay.n_meas, |j, _| {
        C64::new(sol.x[lay.q_offset + 2 * j], sol.x[lay.q_offset + 2 * j + 1])
    });
    let n = lay.atom_len + lay.subspace_dim;
    let z = super::conic::herm_unpack(&sol.x[lay.z_offset..lay.z_offset + n * n], n);
    let big_q = z.view((0, 0), (lay.atom_len, lay.atom_len)).into_owned();
    // objective in the original (maximization) sense, from q alone
    let objective_value = -(0..lay.n_meas)
        .map(|j| {
            problem.program.objective[lay.q_offset + 2 * j] * q[j].re
                + problem.program.objective[lay.q_offset + 2 * j + 1] * q[j].im
        })
        .sum::<f64>()
        - lay.delta2 * q.norm();
    Ok(SdpSolution {
        q,
        big_q,
        status: sol.status,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        objective_value,
        iterations: sol.iterations,
    })
}

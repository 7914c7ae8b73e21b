//! Generic conic program and its ADMM solver.
//!
//! Problems have the form
//!
//! ```text
//! minimize cᵀx  subject to  A x = b,  x ∈ K = K₁ × … × K_p
//! ```
//!
//! where each `K_i` is free space, the nonnegative orthant, a second-order
//! cone or the cone of Hermitian PSD matrices. Hermitian blocks are stored as
//! real vectors: column `j` of the upper triangle starts at offset `j²` and
//! holds `√2·Re Z_ij, √2·Im Z_ij` for `i < j` followed by the diagonal `Z_jj`.
//! The scaling makes the vector inner product equal the trace inner product.
//!
//! Free coordinates are eliminated exactly in the affine step, so splitting
//! only acts on cone coordinates.

use crate::{CMat, Error, Result, C64};
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    Free(usize),
    NonNeg(usize),
    /// `(t, x)` with `‖x‖ ≤ t`; the size counts `t`.
    Soc(usize),
    /// Hermitian `n × n`, stored in `n²` reals.
    Psd(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Free(n) | Cone::NonNeg(n) | Cone::Soc(n) => n,
            Cone::Psd(n) => n * n,
        }
    }
}

/// Offset of `Re Z_ij` (and of `Im Z_ij` one past it) inside a Hermitian
/// block, for `i < j`; for `i == j` the diagonal entry.
pub fn herm_offset(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * j + 2 * i
}

/// Packs a Hermitian matrix (upper triangle read).
pub fn herm_pack(z: &CMat, out: &mut [f64]) {
    let n = z.nrows();
    for j in 0..n {
        for i in 0..j {
            let o = herm_offset(i, j);
            out[o] = SQRT2 * z[(i, j)].re;
            out[o + 1] = SQRT2 * z[(i, j)].im;
        }
        out[herm_offset(j, j)] = z[(j, j)].re;
    }
}

pub fn herm_unpack(v: &[f64], n: usize) -> CMat {
    let mut z = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let o = herm_offset(i, j);
            let e = C64::new(v[o], v[o + 1]) / SQRT2;
            z[(i, j)] = e;
            z[(j, i)] = e.conj();
        }
        z[(j, j)] = C64::from(v[herm_offset(j, j)]);
    }
    z
}

/// Eigenpairs of a Hermitian matrix with negative eigenvalues, as
/// `(λ, V)` with `V` holding one eigenvector per column.
#[cfg(feature = "lapack")]
pub fn negative_eigen(z: &CMat) -> (Vec<f64>, CMat) {
    use lapack_sys::{__BindgenComplex, zheevr_};
    use std::os::raw::{c_char, c_int};
    let n = z.nrows() as c_int;
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let mut a = z.clone();
    let bound = z.iter().map(|x| x.norm()).sum::<f64>() + 1.0;
    let (vl, vu, il, iu, abstol) = (-bound, 0.0f64, 0 as c_int, 0 as c_int, 0.0f64);
    let mut m: c_int = 0;
    let mut w = vec![0.0f64; n as usize];
    let mut vecs = CMat::zeros(n as usize, n as usize);
    let mut isuppz = vec![0 as c_int; 2 * n as usize];
    let mut info: c_int = 0;
    let (jobz, range, uplo) = (b'V' as c_char, b'V' as c_char, b'L' as c_char);
    let cptr = |m: &mut CMat| m.as_mut_ptr() as *mut __BindgenComplex<f64>;
    // workspace query, then the real call
    let mut wq = [C64::default()];
    let mut rwq = [0.0f64];
    let mut iwq: [c_int; 1] = [0];
    let minus1: c_int = -1;
    unsafe {
        zheevr_(
            &jobz, &range, &uplo, &n, cptr(&mut a), &n, &vl, &vu, &il, &iu, &abstol, &mut m,
            w.as_mut_ptr(), cptr(&mut vecs), &n, isuppz.as_mut_ptr(),
            wq.as_mut_ptr() as *mut __BindgenComplex<f64>, &minus1, rwq.as_mut_ptr(), &minus1,
            iwq.as_mut_ptr(), &minus1, &mut info,
        );
    }
    let lwork = (wq[0].re as c_int).max(2 * n);
    let lrwork = (rwq[0] as c_int).max(24 * n);
    let liwork = iwq[0].max(10 * n);
    let mut work = vec![C64::default(); lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0 as c_int; liwork as usize];
    unsafe {
        zheevr_(
            &jobz, &range, &uplo, &n, cptr(&mut a), &n, &vl, &vu, &il, &iu, &abstol, &mut m,
            w.as_mut_ptr(), cptr(&mut vecs), &n, isuppz.as_mut_ptr(),
            work.as_mut_ptr() as *mut __BindgenComplex<f64>, &lwork, rwork.as_mut_ptr(), &lrwork,
            iwork.as_mut_ptr(), &liwork, &mut info,
        );
    }
    if info != 0 {
        return negative_eigen_fallback(z);
    }
    let k = m as usize;
    w.truncate(k);
    (w, vecs.columns(0, k).into_owned())
}

#[cfg(not(feature = "lapack"))]
pub fn negative_eigen(z: &CMat) -> (Vec<f64>, CMat) {
    negative_eigen_fallback(z)
}

fn negative_eigen_fallback(z: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(z.clone());
    let idx: Vec<usize> = (0..z.nrows()).filter(|&k| eig.eigenvalues[k] < 0.0).collect();
    let mut v = CMat::zeros(z.nrows(), idx.len());
    for (c, &k) in idx.iter().enumerate() {
        v.set_column(c, &eig.eigenvectors.column(k));
    }
    (idx.iter().map(|&k| eig.eigenvalues[k]).collect(), v)
}

/// Projection of a Hermitian matrix onto the PSD cone.
pub fn project_psd(z: &CMat) -> CMat {
    let n = z.nrows();
    let (lam, mut v) = negative_eigen(z);
    for (k, l) in lam.iter().enumerate() {
        v.column_mut(k).scale_mut((-l).sqrt());
    }
    let mut out = z.clone();
    if !lam.is_empty() {
        out.gemm(C64::from(1.0), &v, &v.adjoint(), C64::from(1.0));
    }
    for j in 0..n {
        out[(j, j)].im = 0.0;
        for i in 0..j {
            let a = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
            out[(i, j)] = a;
            out[(j, i)] = a.conj();
        }
    }
    out
}

/// Projection onto `{(t, x) : ‖x‖ ≤ t}`.
pub fn project_soc(v: &mut [f64]) {
    let t = v[0];
    let nx = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nx <= t {
        return;
    }
    if nx <= -t {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let a = 0.5 * (t + nx);
    v[0] = a;
    let s = a / nx;
    v[1..].iter_mut().for_each(|x| *x *= s);
}

/// Conic program in standard form. Rows are sparse `(column, value)` lists.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConicProgram {
    pub cones: Vec<Cone>,
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
}

impl ConicProgram {
    pub fn new(cones: Vec<Cone>) -> Self {
        let n = cones.iter().map(Cone::dim).sum();
        ConicProgram {
            cones,
            objective: vec![0.0; n],
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    /// Start offset of each cone block.
    pub fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.cones.len());
        let mut acc = 0;
        for c in &self.cones {
            o.push(acc);
            acc += c.dim();
        }
        o
    }

    /// Adds a row after merging duplicate columns and dropping zeros.
    pub fn push_row(&mut self, mut terms: Vec<(usize, f64)>, rhs: f64) {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (c, v) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.rows.push(merged);
        self.rhs.push(rhs);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub rho: f64,
    pub over_relaxation: f64,
    /// Residual balancing period; 0 keeps `rho` fixed.
    pub adapt_every: usize,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            tol: 1e-6,
            max_iters: 50_000,
            rho: 1.0,
            over_relaxation: 1.5,
            adapt_every: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    /// Full variable vector; cone blocks hold the projected iterate.
    pub x: Vec<f64>,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub iterations: usize,
    /// Rows kept after redundancy elimination.
    pub rank: usize,
}

/// Row groups coupled through shared cone columns. `A_c A_cᵀ` is block
/// diagonal over these groups.
struct Group {
    rows: Vec<usize>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

struct Prepared {
    free: Vec<usize>,
    cone: Vec<usize>,
    /// kept rows split into free and cone parts, in local indices
    af: Vec<Vec<(usize, f64)>>,
    ac: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    groups: Vec<Group>,
    /// K⁻¹ A_f, dense m × n_f
    e: DMatrix<f64>,
    schur: Option<Cholesky<f64, nalgebra::Dyn>>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Pivoted Cholesky of a Gram matrix; returns the indices of a maximal
/// numerically independent subset.
fn pivoted_select(gram: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let n = gram.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut diag: Vec<f64> = (0..n).map(|i| gram[(i, i)]).collect();
    let scale = diag.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let mut used = vec![false; n];
    let mut kept = Vec::new();
    for k in 0..n {
        let Some(p) = (0..n).filter(|&i| !used[i]).max_by(|&a, &b| diag[a].total_cmp(&diag[b])) else {
            break;
        };
        if diag[p] <= tol * scale {
            break;
        }
        used[p] = true;
        kept.push(p);
        let piv = diag[p].sqrt();
        l[(p, k)] = piv;
        for i in (0..n).filter(|&i| !used[i]) {
            let mut v = gram[(i, p)];
            for c in 0..k {
                v -= l[(i, c)] * l[(p, c)];
            }
            l[(i, k)] = v / piv;
            diag[i] -= l[(i, k)] * l[(i, k)];
        }
    }
    kept.sort_unstable();
    kept
}

fn sparse_dot(row: &[(usize, f64)], x: &[f64]) -> f64 {
    row.iter().map(|&(c, v)| v * x[c]).sum()
}

fn row_gram(rows: &[&Vec<(usize, f64)>]) -> DMatrix<f64> {
    let n = rows.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (a, b) = (rows[i], rows[j]);
            let (mut p, mut q, mut s) = (0, 0, 0.0);
            while p < a.len() && q < b.len() {
                match a[p].0.cmp(&b[q].0) {
                    std::cmp::Ordering::Less => p += 1,
                    std::cmp::Ordering::Greater => q += 1,
                    std::cmp::Ordering::Equal => {
                        s += a[p].1 * b[q].1;
                        p += 1;
                        q += 1;
                    }
                }
            }
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    g
}

fn prepare(p: &ConicProgram) -> Result<Prepared> {
    let n = p.n_vars();
    let mut is_free = vec![false; n];
    for (c, o) in p.cones.iter().zip(p.offsets()) {
        if let Cone::Free(d) = c {
            is_free[o..o + d].iter_mut().for_each(|f| *f = true);
        }
    }
    let mut local = vec![0usize; n];
    let (mut free, mut cone) = (Vec::new(), Vec::new());
    for i in 0..n {
        if is_free[i] {
            local[i] = free.len();
            free.push(i);
        } else {
            local[i] = cone.len();
            cone.push(i);
        }
    }
    let split = |row: &Vec<(usize, f64)>| {
        let mut f = Vec::new();
        let mut c = Vec::new();
        for &(j, v) in row {
            if is_free[j] {
                f.push((local[j], v));
            } else {
                c.push((local[j], v));
            }
        }
        (f, c)
    };
    let m0 = p.rows.len();
    let parts: Vec<_> = p.rows.iter().map(split).collect();
    if parts.iter().any(|(f, c)| c.is_empty() && !f.is_empty()) {
        return Err(Error::Unsupported("equality rows must touch a cone variable".into()));
    }
    // union rows sharing a cone column
    let mut parent: Vec<usize> = (0..m0).collect();
    let mut owner = vec![usize::MAX; cone.len()];
    for (i, (_, c)) in parts.iter().enumerate() {
        for &(j, _) in c {
            if owner[j] == usize::MAX {
                owner[j] = i;
            } else {
                let (a, b) = (find(&mut parent, owner[j]), find(&mut parent, i));
                parent[a] = b;
            }
        }
    }
    let mut comp: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..m0 {
        if parts[i].1.is_empty() {
            if p.rhs[i].abs() > 1e-9 {
                return Err(Error::InvalidArgument("inconsistent empty equality row".into()));
            }
            continue;
        }
        let r = find(&mut parent, i);
        comp.entry(r).or_default().push(i);
    }
    let mut kept_rows: Vec<Vec<usize>> = Vec::new();
    for rows in comp.values() {
        let cone_rows: Vec<_> = rows.iter().map(|&i| &parts[i].1).collect();
        let g = row_gram(&cone_rows);
        let keep = pivoted_select(&g, 1e-12);
        if keep.len() < rows.len() {
            // dropped rows must be combinations of kept full rows
            let full: Vec<_> = rows.iter().map(|&i| &p.rows[i]).collect();
            let gf = row_gram(&full);
            let kk = DMatrix::from_fn(keep.len(), keep.len(), |a, b| gf[(keep[a], keep[b])]);
            let ch = Cholesky::new(kk).ok_or_else(|| Error::Singular(f64::INFINITY))?;
            for d in 0..rows.len() {
                if keep.contains(&d) {
                    continue;
                }
                let rhs = DVector::from_fn(keep.len(), |a, _| gf[(keep[a], d)]);
                let coef = ch.solve(&rhs);
                let resid = gf[(d, d)] - rhs.dot(&coef);
                if resid > 1e-9 * gf[(d, d)].max(1.0) {
                    return Err(Error::Unsupported(
                        "rows dependent on cone columns but not on free columns".into(),
                    ));
                }
                let bd: f64 = keep.iter().zip(coef.iter()).map(|(&k, c)| c * p.rhs[rows[k]]).sum();
                if (bd - p.rhs[rows[d]]).abs() > 1e-8 * (1.0 + bd.abs()) {
                    return Err(Error::InvalidArgument("inconsistent equality constraints".into()));
                }
            }
        }
        kept_rows.push(keep.into_iter().map(|k| rows[k]).collect());
    }
    let mut af = Vec::new();
    let mut ac = Vec::new();
    let mut b = Vec::new();
    let mut groups = Vec::new();
    for rows in kept_rows {
        let start = ac.len();
        for &i in &rows {
            af.push(parts[i].0.clone());
            ac.push(parts[i].1.clone());
            b.push(p.rhs[i]);
        }
        let refs: Vec<_> = ac[start..].iter().collect();
        let chol = Cholesky::new(row_gram(&refs)).ok_or(Error::Singular(f64::INFINITY))?;
        groups.push(Group {
            rows: (start..ac.len()).collect(),
            chol,
        });
    }
    let m = ac.len();
    let nf = free.len();
    let mut e = DMatrix::<f64>::zeros(m, nf);
    for (i, row) in af.iter().enumerate() {
        for &(j, v) in row {
            e[(i, j)] = v;
        }
    }
    let mut prep = Prepared {
        free,
        cone,
        af,
        ac,
        b,
        groups,
        e: DMatrix::zeros(0, 0),
        schur: None,
    };
    for j in 0..nf {
        let mut col: Vec<f64> = e.column(j).iter().cloned().collect();
        prep.k_solve(&mut col);
        e.column_mut(j).copy_from_slice(&col);
    }
    if nf > 0 {
        // S = A_fᵀ K⁻¹ A_f
        let mut s = DMatrix::<f64>::zeros(nf, nf);
        for (i, row) in prep.af.iter().enumerate() {
            for &(a, v) in row {
                for c in 0..nf {
                    s[(a, c)] += v * e[(i, c)];
                }
            }
        }
        let s = (&s + s.transpose()) * 0.5;
        prep.schur = Some(Cholesky::new(s).ok_or_else(|| {
            Error::Unsupported("free variables are not determined by the constraints".into())
        })?);
    }
    prep.e = e;
    Ok(prep)
}

impl Prepared {
    fn k_solve(&self, x: &mut [f64]) {
        for g in &self.groups {
            let v = DVector::from_fn(g.rows.len(), |a, _| x[g.rows[a]]);
            let s = g.chol.solve(&v);
            for (a, &r) in g.rows.iter().enumerate() {
                x[r] = s[a];
            }
        }
    }
}

/// `base[k]` is the offset of block k among cone coordinates.
fn project_cones(cones: &[Cone], base: &[usize], v: &mut [f64]) {
    for (c, &o) in cones.iter().zip(base) {
        match *c {
            Cone::Free(_) => {}
            Cone::NonNeg(d) => v[o..o + d].iter_mut().for_each(|x| *x = x.max(0.0)),
            Cone::Soc(d) => project_soc(&mut v[o..o + d]),
            Cone::Psd(n) => {
                let z = herm_unpack(&v[o..o + n * n], n);
                herm_pack(&project_psd(&z), &mut v[o..o + n * n]);
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves a [`ConicProgram`] by over-relaxed ADMM with residual balancing.
/// Deterministic for fixed inputs.
pub fn solve_conic(p: &ConicProgram, opts: &AdmmOptions) -> Result<ConicSolution> {
    if p.rows.len() != p.rhs.len() {
        return Err(Error::Dimension {
            what: "right-hand side",
            expected: p.rows.len(),
            got: p.rhs.len(),
        });
    }
    if !(opts.rho > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("rho and tol must be positive".into()));
    }
    let prep = prepare(p)?;
    let (nf, nc, m) = (prep.free.len(), prep.cone.len(), prep.b.len());
    let cf: Vec<f64> = prep.free.iter().map(|&i| p.objective[i]).collect();
    let cc: Vec<f64> = prep.cone.iter().map(|&i| p.objective[i]).collect();
    let acc: Vec<f64> = prep.ac.iter().map(|r| sparse_dot(r, &cc)).collect();
    // local offsets of cone blocks
    let mut base = Vec::new();
    let mut acc_o = 0;
    for c in &p.cones {
        base.push(acc_o);
        if !matches!(c, Cone::Free(_)) {
            acc_o += c.dim();
        }
    }

    let mut rho = opts.rho;
    let alpha = opts.over_relaxation;
    let mut s = vec![0.0; nc];
    let mut u = vec![0.0; nc];
    let mut xc = vec![0.0; nc];
    let mut xf = vec![0.0; nf];
    let mut r = vec![0.0; m];
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64, f64, usize)> = None;
    let mut status = SolveStatus::MaxIters;
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut it = 0;
    let (mut rp_rel, mut rd_rel) = (f64::INFINITY, f64::INFINITY);
    while it < opts.max_iters {
        it += 1;
        // affine step
        let v: Vec<f64> = s.iter().zip(&u).map(|(a, b)| a - b).collect();
        for i in 0..m {
            r[i] = sparse_dot(&prep.ac[i], &v) - prep.b[i] - acc[i] / rho;
        }
        prep.k_solve(&mut r);
        if let Some(ch) = &prep.schur {
            let mut g = DVector::from_fn(nf, |j, _| cf[j] / rho);
            for (i, row) in prep.af.iter().enumerate() {
                for &(j, val) in row {
                    g[j] += val * r[i];
                }
            }
            let sol = ch.solve(&g);
            for j in 0..nf {
                xf[j] = -sol[j];
            }
            let ex = &prep.e * DVector::from_column_slice(&xf);
            for i in 0..m {
                r[i] += ex[i];
            }
        }
        for j in 0..nc {
            xc[j] = v[j] - cc[j] / rho;
        }
        for (i, row) in prep.ac.iter().enumerate() {
            for &(j, val) in row {
                xc[j] -= val * r[i];
            }
        }
        // cone step
        let s_old = s.clone();
        let mut w: Vec<f64> = (0..nc)
            .map(|j| alpha * xc[j] + (1.0 - alpha) * s_old[j] + u[j])
            .collect();
        project_cones(&p.cones, &base, &mut w);
        s = w;
        for j in 0..nc {
            u[j] += alpha * xc[j] + (1.0 - alpha) * s_old[j] - s[j];
        }
        let rp = norm(&xc.iter().zip(&s).map(|(a, b)| a - b).collect::<Vec<_>>());
        let rd = rho * norm(&s.iter().zip(&s_old).map(|(a, b)| a - b).collect::<Vec<_>>());
        let unorm = rho * norm(&u);
        rp_rel = rp / (1.0 + norm(&xc).max(norm(&s)));
        rd_rel = rd / (1.0 + unorm);
        let worst = rp_rel.max(rd_rel);
        if best.as_ref().is_none_or(|b| worst < b.0) {
            best = Some((worst, xf.clone(), s.clone(), rp_rel, rd_rel, it));
        }
        if worst <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        if it % 100 == 0 {
            history.push((rp_rel, unorm));
            if diverging(&history, opts.tol) {
                status = SolveStatus::Infeasible;
                break;
            }
        }
        if opts.adapt_every > 0 && it % opts.adapt_every == 0 {
            let scale = if rp > 5.0 * rd {
                2.0
            } else if rd > 5.0 * rp {
                0.5
            } else {
                1.0
            };
            let new_rho = (rho * scale).clamp(1e-6, 1e6);
            if new_rho != rho {
                let f = rho / new_rho;
                u.iter_mut().for_each(|x| *x *= f);
                rho = new_rho;
            }
        }
    }
    let (xf_out, s_out, rp_out, rd_out) = match status {
        SolveStatus::Optimal => (xf, s, rp_rel, rd_rel),
        _ => {
            let b = best.expect("at least one iteration");
            (b.1, b.2, b.3, b.4)
        }
    };
    let mut x = vec![0.0; p.n_vars()];
    for (j, &i) in prep.free.iter().enumerate() {
        x[i] = xf_out[j];
    }
    for (j, &i) in prep.cone.iter().enumerate() {
        x[i] = s_out[j];
    }
    let objective = x.iter().zip(&p.objective).map(|(a, b)| a * b).sum();
    Ok(ConicSolution {
        x,
        status,
        primal_residual: rp_out,
        dual_residual: rd_out,
        objective,
        iterations: it,
        rank: m,
    })
}

/// Infeasibility heuristic on 100-iteration windows: the primal residual has
/// stalled for ten windows while the dual iterate kept growing.
fn diverging(h: &[(f64, f64)], tol: f64) -> bool {
    const W: usize = 10;
    if h.len() < 20 {
        return false;
    }
    let tail = &h[h.len() - W - 1..];
    let stalled = tail.windows(2).all(|w| w[1].0 >= 0.99 * w[0].0);
    let big = tail[W].0 > 1e3 * tol;
    let growing = tail[W].1 > 2.0 * tail[0].1 && tail[W].1 > 1e3;
    stalled && big && growing
}

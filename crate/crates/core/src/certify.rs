//! Kernel-based dual certificates.
//!
//! A candidate dual polynomial is built from squared Fejér kernels and their
//! first partial derivatives, with coefficients fixed by interpolating
//! `sign(α_k) h_k` at each target and forcing a vanishing gradient there.
//! The construction is separable: the 4-D kernel is a product of 1-D
//! kernels normalized to `K(0) = 1`. The randomized matrix kernel weights
//! the delay frequency `n₁` by `d_{n₁} d_{n₁}^H`, with `d_{n₁}` the coding
//! row of sample `n₁` (wrapped modulo L̄).
//!
//! This module is an independent oracle; the recovery pipeline never uses it.

use crate::error::check_len;
use crate::model::{coding_row, CodingMatrix};
use crate::{CMat, CVec, Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Squared Fejér weights `s_n`, `n ∈ -2L..=2L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FejerWeights {
    pub s: Vec<f64>,
    pub l_kernel: usize,
}

impl FejerWeights {
    pub fn get(&self, n: i64) -> f64 {
        let l = self.l_kernel as i64;
        if n.abs() > 2 * l {
            0.0
        } else {
            self.s[(n + 2 * l) as usize]
        }
    }

    pub fn range(&self) -> std::ops::RangeInclusive<i64> {
        let l = 2 * self.l_kernel as i64;
        -l..=l
    }

    fn total(&self) -> f64 {
        self.s.iter().sum()
    }
}

pub fn fejer_weights(l_kernel: usize) -> Result<FejerWeights> {
    if l_kernel < 2 {
        return Err(Error::InvalidArgument("kernel length must be at least 2".into()));
    }
    let l = l_kernel as i64;
    let lf = l as f64;
    let s = (-2 * l..=2 * l)
        .map(|n| {
            let lo = (n - l).max(-l);
            let hi = (n + l).min(l);
            (lo..=hi)
                .map(|i| (1.0 - (i as f64 / lf).abs()) * (1.0 - ((n - i) as f64 / lf).abs()))
                .sum::<f64>()
                / lf
        })
        .collect();
    Ok(FejerWeights { s, l_kernel })
}

/// Kernel length tied to a scene: the kernel's frequencies `|n| ≤ 2L` must
/// fit within the atom lags `|n| ≤ N`.
pub fn kernel_len_for(half_len: usize) -> usize {
    half_len / 2
}

/// Normalized 1-D kernel derivative `k^{(i)}(x)`.
pub fn kernel_1d(x: f64, order: u32, w: &FejerWeights) -> C64 {
    let tot = w.total();
    w.range()
        .map(|n| {
            let f = C64::new(0.0, -2.0 * PI * n as f64).powu(order);
            f * C64::from_polar(w.get(n), -2.0 * PI * x * n as f64)
        })
        .sum::<C64>()
        / tot
}

/// `∂^{i₁}∂^{i₂}∂^{i₃}∂^{i₄} K(τ)`, scalar separable kernel, orders ≤ 3.
pub fn fejer_kernel(tau: [f64; 4], orders: [u32; 4], w: &FejerWeights) -> Result<C64> {
    if orders.iter().any(|&o| o > 3) {
        return Err(Error::InvalidArgument("derivative orders above 3 are not supported".into()));
    }
    Ok((0..4).map(|d| kernel_1d(tau[d], orders[d], w)).product())
}

/// `κ = 1/sqrt(|K''(0)|)` along one axis.
pub fn kappa(w: &FejerWeights) -> f64 {
    1.0 / kernel_1d(0.0, 2, w).re.abs().sqrt()
}

/// Kernel flavour used to build `Γ`.
#[derive(Clone, Debug)]
pub enum KernelSource {
    /// `d d^H` replaced by its expectation `I_T`.
    Expectation { t: usize },
    /// Coding rows of the given matrix (L̄ × T).
    Randomized(CodingMatrix),
}

impl KernelSource {
    fn dim(&self) -> usize {
        match self {
            KernelSource::Expectation { t } => *t,
            KernelSource::Randomized(c) => c.entries.ncols(),
        }
    }
}

/// Matrix kernel derivative `K^{(i)}(τ)` (T × T).
fn matrix_kernel(tau: [f64; 4], orders: [u32; 4], w: &FejerWeights, src: &KernelSource) -> CMat {
    let rest: C64 = (1..4).map(|d| kernel_1d(tau[d], orders[d], w)).product();
    match src {
        KernelSource::Expectation { t } => CMat::identity(*t, *t) * (kernel_1d(tau[0], orders[0], w) * rest),
        KernelSource::Randomized(c) => {
            let d = &c.entries;
            let half = (d.nrows() - 1) / 2;
            let t = d.ncols();
            let mut acc = CMat::zeros(t, t);
            for n in w.range() {
                let wt = C64::new(0.0, -2.0 * PI * n as f64).powu(orders[0])
                    * C64::from_polar(w.get(n), -2.0 * PI * tau[0] * n as f64);
                if wt == C64::default() {
                    continue;
                }
                // row i of D is d_i^H, so d_i = conj(row)ᵀ
                let di = d.row(coding_row(half, n)).adjoint();
                acc += &di * di.adjoint() * wt;
            }
            acc * (rest / w.total())
        }
    }
}

fn unit(e: usize) -> [u32; 4] {
    let mut o = [0; 4];
    if e > 0 {
        o[e - 1] = 1;
    }
    o
}

fn add_orders(a: [u32; 4], b: [u32; 4]) -> [u32; 4] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn diff(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

/// Interpolation system and its solution.
#[derive(Clone, Debug)]
pub struct CertificateSystem {
    pub coords: Vec<[f64; 4]>,
    pub weights: FejerWeights,
    pub kappa: f64,
    /// `5KT × 5KT`, block rows `(value, ∂₁..∂₄)` × targets
    pub gamma: CMat,
    /// `5K × 5K` scalar-kernel counterpart
    pub phi: CMat,
    /// per target: `[α, β, γ, φ, ϱ]`, the derivative blocks already scaled by κ
    pub coeffs: Vec<[CVec; 5]>,
    pub targets_rhs: Vec<CVec>,
    pub interpolation_residual: f64,
    pub derivative_residual: f64,
    source: KernelSource,
}

fn block_factor(row_e: usize, col_e: usize, kappa: f64) -> f64 {
    let c = if col_e > 0 { kappa } else { 1.0 };
    if row_e == 0 {
        c
    } else {
        -kappa * c
    }
}

/// Scalar-kernel matrix `Φ` for the given locations.
pub fn build_phi(coords: &[[f64; 4]], w: &FejerWeights) -> CMat {
    let k = coords.len();
    let kap = kappa(w);
    let mut phi = CMat::zeros(5 * k, 5 * k);
    for re in 0..5 {
        for ce in 0..5 {
            for j in 0..k {
                for i in 0..k {
                    let o = add_orders(unit(re), unit(ce));
                    let v = (0..4)
                        .map(|d| kernel_1d(coords[j][d] - coords[i][d], o[d], w))
                        .product::<C64>();
                    phi[(re * k + j, ce * k + i)] = v * block_factor(re, ce, kap);
                }
            }
        }
    }
    phi
}

/// Builds and solves the interpolation system for `Q(τ_k) = signs_k·h_k`,
/// `∇Q(τ_k) = 0`.
pub fn build_certificate(
    coords: &[[f64; 4]],
    signs: &[C64],
    h: &[CVec],
    source: KernelSource,
    l_kernel: usize,
) -> Result<CertificateSystem> {
    let k = coords.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no targets".into()));
    }
    check_len("signs", k, signs.len())?;
    check_len("h vectors", k, h.len())?;
    let t = source.dim();
    for v in h {
        check_len("h", t, v.len())?;
    }
    let w = fejer_weights(l_kernel)?;
    let kap = kappa(&w);
    let n = 5 * k * t;
    let mut gamma = CMat::zeros(n, n);
    for re in 0..5 {
        for ce in 0..5 {
            let o = add_orders(unit(re), unit(ce));
            let f = block_factor(re, ce, kap);
            for j in 0..k {
                for i in 0..k {
                    let blk = matrix_kernel(diff(coords[j], coords[i]), o, &w, &source) * C64::from(f);
                    gamma
                        .view_mut(((re * k + j) * t, (ce * k + i) * t), (t, t))
                        .copy_from(&blk);
                }
            }
        }
    }
    let targets_rhs: Vec<CVec> = signs.iter().zip(h).map(|(s, v)| v * *s).collect();
    let mut rhs = CVec::zeros(n);
    for (j, r) in targets_rhs.iter().enumerate() {
        rhs.rows_mut(j * t, t).copy_from(r);
    }
    let sv = gamma.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond < 1e12) {
        return Err(Error::Singular(cond));
    }
    let sol = gamma.clone().lu().solve(&rhs).ok_or(Error::Singular(f64::INFINITY))?;
    let coeffs = (0..k)
        .map(|j| {
            std::array::from_fn(|e| {
                let c = sol.rows((e * k + j) * t, t).into_owned();
                if e > 0 {
                    c * C64::from(kap)
                } else {
                    c
                }
            })
        })
        .collect();
    let phi = build_phi(coords, &w);
    let mut sys = CertificateSystem {
        coords: coords.to_vec(),
        weights: w,
        kappa: kap,
        gamma,
        phi,
        coeffs,
        targets_rhs,
        interpolation_residual: 0.0,
        derivative_residual: 0.0,
        source,
    };
    for j in 0..k {
        let v = sys.eval(coords[j], [0; 4]);
        sys.interpolation_residual = sys.interpolation_residual.max((&v - &sys.targets_rhs[j]).norm());
        for e in 1..5 {
            let d = sys.eval(coords[j], unit(e)).norm();
            sys.derivative_residual = sys.derivative_residual.max(d);
        }
    }
    Ok(sys)
}

impl CertificateSystem {
    /// `∂^{orders} Q(τ)`.
    pub fn eval(&self, tau: [f64; 4], orders: [u32; 4]) -> CVec {
        let t = self.source.dim();
        let mut out = CVec::zeros(t);
        for (k, c) in self.coords.iter().enumerate() {
            let d = diff(tau, *c);
            for e in 0..5 {
                let kern = matrix_kernel(d, add_orders(orders, unit(e)), &self.weights, &self.source);
                out += kern * &self.coeffs[k][e];
            }
        }
        out
    }

    pub fn norm_at(&self, tau: [f64; 4]) -> f64 {
        self.eval(tau, [0; 4]).norm()
    }

    /// `‖I − Φ‖`, `‖Φ‖`, `‖Φ⁻¹‖` (spectral norms).
    pub fn phi_bounds(&self) -> (f64, f64, f64) {
        phi_bounds(&self.phi)
    }
}

pub fn phi_bounds(phi: &CMat) -> (f64, f64, f64) {
    let n = phi.nrows();
    let herm = (phi + phi.adjoint()) * C64::from(0.5);
    let ev = herm.symmetric_eigenvalues();
    let dev = (CMat::identity(n, n) - &herm).symmetric_eigenvalues();
    let i_minus = dev.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let norm = ev.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let inv = 1.0 / ev.iter().fold(f64::INFINITY, |a, &x| a.min(x.abs()));
    (i_minus, norm, inv)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub max_offsupport_norm: f64,
    /// smallest fitted `c` in `‖Q(τ_k + δ)‖ ≈ 1 − c δ²` over targets and axes
    pub near_peak_curvature: f64,
    pub near_max_norm: f64,
    pub pass: bool,
}

/// Grid check of `‖Q‖ < 1` away from the targets and quadratic decay near
/// them. The near region is a max-norm ball of radius `0.2/L` per axis.
pub fn verify_certificate(sys: &CertificateSystem, res: usize) -> Result<CertificateReport> {
    if res < 4 {
        return Err(Error::InvalidArgument("grid resolution must be at least 4".into()));
    }
    let near = 0.2 / sys.weights.l_kernel as f64;
    let dist = |a: [f64; 4], b: [f64; 4]| (0..4).map(|d| crate::wrap_dist(a[d], b[d])).fold(0.0, f64::max);
    let mut off_max: f64 = 0.0;
    let h = 1.0 / res as f64;
    for a in 0..res {
        for b in 0..res {
            for c in 0..res {
                for d in 0..res {
                    let p = [a as f64 * h, b as f64 * h, c as f64 * h, d as f64 * h];
                    if sys.coords.iter().all(|&t| dist(p, t) >= near) {
                        off_max = off_max.max(sys.norm_at(p));
                    }
                }
            }
        }
    }
    let mut curv = f64::INFINITY;
    let mut near_max: f64 = 0.0;
    for &t in &sys.coords {
        for e in 0..4 {
            let (mut num, mut den) = (0.0, 0.0);
            for s in 1..=8 {
                for sign in [-1.0, 1.0] {
                    let delta = sign * near * s as f64 / 8.0;
                    let mut p = t;
                    p[e] += delta;
                    let v = sys.norm_at(p);
                    near_max = near_max.max(v);
                    num += delta * delta * (1.0 - v);
                    den += delta.powi(4);
                }
            }
            curv = curv.min(num / den);
        }
    }
    let pass = off_max < 1.0 - 1e-9 && near_max < 1.0 && curv > 0.0;
    Ok(CertificateReport {
        max_offsupport_norm: off_max,
        near_peak_curvature: curv,
        near_max_norm: near_max,
        pass,
    })
}

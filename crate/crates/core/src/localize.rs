//! Dual polynomial evaluation and peak extraction.
//!
//! `f(τ) = X*(q) a(τ) = C v(τ)` where `C = X*(q) W` holds the coefficients of
//! a trigonometric polynomial in `(τ, v, θ, ψ = Nt·φ)`. Grids are therefore
//! evaluated exactly by FFT. The AoA axis of a grid covers `[0, 1/Nt)`.

use crate::error::check_len;
use crate::model::{coord_errors, MeasurementOperator};
use crate::solver::sdr::dual_coefficients;
use crate::{CMat, CVec, Error, Result, C64};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Vector-valued dual polynomial.
#[derive(Clone, Debug)]
pub struct DualPolynomial {
    pub n_tx: usize,
    pub n_rx: usize,
    pub half_len: usize,
    /// `T × M`, columns indexed `(r, s, n1, n2)` like atoms.
    pub coef: CMat,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetEstimate {
    pub coords: [f64; 4],
    pub peak_value: f64,
}

/// Values on a uniform 4-D grid, flat index `((a*R1 + b)*R2 + c)*R3 + d`.
#[derive(Clone, Debug)]
pub struct Grid4 {
    pub res: [usize; 4],
    pub n_tx: usize,
    pub values: Vec<f64>,
}

impl Grid4 {
    pub fn coords_of(&self, idx: [usize; 4]) -> [f64; 4] {
        [
            idx[0] as f64 / self.res[0] as f64,
            idx[1] as f64 / self.res[1] as f64,
            idx[2] as f64 / self.res[2] as f64,
            idx[3] as f64 / (self.res[3] * self.n_tx) as f64,
        ]
    }

    pub fn flat(&self, i: [usize; 4]) -> usize {
        ((i[0] * self.res[1] + i[1]) * self.res[2] + i[2]) * self.res[3] + i[3]
    }

    pub fn unflat(&self, mut f: usize) -> [usize; 4] {
        let d = f % self.res[3];
        f /= self.res[3];
        let c = f % self.res[2];
        f /= self.res[2];
        let b = f % self.res[1];
        [f / self.res[1], b, c, d]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Grid step per coordinate, in coordinate units.
    pub fn cell(&self) -> [f64; 4] {
        [
            1.0 / self.res[0] as f64,
            1.0 / self.res[1] as f64,
            1.0 / self.res[2] as f64,
            1.0 / (self.res[3] * self.n_tx) as f64,
        ]
    }
}

impl DualPolynomial {
    pub fn new(q: &CVec, op: &MeasurementOperator) -> Result<Self> {
        Ok(DualPolynomial {
            n_tx: op.n_tx,
            n_rx: op.n_rx,
            half_len: op.half_len,
            coef: dual_coefficients(op, q)?,
        })
    }

    pub fn lbar(&self) -> usize {
        2 * self.half_len + 1
    }

    /// Unit-modulus Vandermonde vector `v(τ)` with `a(τ) = W v(τ)`.
    pub fn vandermonde(&self, c: [f64; 4]) -> CVec {
        vandermonde(c, self.n_tx, self.n_rx, self.half_len)
    }

    pub fn eval(&self, c: [f64; 4]) -> CVec {
        &self.coef * self.vandermonde(c)
    }

    pub fn norm_at(&self, c: [f64; 4]) -> f64 {
        self.eval(c).norm()
    }

    /// Smallest admissible grid per axis.
    pub fn min_res(&self) -> [usize; 4] {
        [self.lbar(), self.lbar(), 2 * self.n_tx - 1, 2 * self.n_rx - 1]
    }

    /// `‖f‖₂` on a uniform grid by zero-padded FFT.
    pub fn eval_grid(&self, res: [usize; 4]) -> Result<Grid4> {
        let min = self.min_res();
        for k in 0..4 {
            if res[k] < min[k] {
                return Err(Error::InvalidArgument(format!(
                    "grid resolution {} on axis {k} is below {}",
                    res[k], min[k]
                )));
            }
        }
        let (lbar, nt, nr, n) = (self.lbar(), self.n_tx, self.n_rx, self.half_len as i64);
        let [r0, r1, r2, r3] = res;
        let mut out = vec![0.0; r0 * r1 * r2 * r3];
        let mut planner = FftPlanner::<f64>::new();
        let f0 = planner.plan_fft_forward(r0);
        let f1 = planner.plan_fft_forward(r1);
        // angular phase tables
        let th: Vec<C64> = (0..r2 * nt)
            .map(|k| C64::from_polar(1.0, 2.0 * PI * (k % r2) as f64 / r2 as f64))
            .collect();
        let ph: Vec<C64> = (0..r3 * nr)
            .map(|k| C64::from_polar(1.0, 2.0 * PI * (k % r3) as f64 / r3 as f64))
            .collect();
        let mut slab = vec![C64::default(); r0 * r1];
        let mut col = vec![C64::default(); r0];
        for t in 0..self.coef.nrows() {
            for c in 0..r2 {
                for d in 0..r3 {
                    slab.iter_mut().for_each(|z| *z = C64::default());
                    for a in 0..lbar {
                        let row = &mut slab[((a as i64 - n).rem_euclid(r0 as i64) as usize) * r1..][..r1];
                        for b in 0..lbar {
                            let mut acc = C64::default();
                            for r in 0..nr {
                                for s in 0..nt {
                                    let k = ((r * nt + s) * lbar + a) * lbar + b;
                                    acc += self.coef[(t, k)] * th[s * c] * ph[r * d];
                                }
                            }
                            row[(b as i64 - n).rem_euclid(r1 as i64) as usize] = acc;
                        }
                        f1.process(row);
                    }
                    for b in 0..r1 {
                        for a in 0..r0 {
                            col[a] = slab[a * r1 + b];
                        }
                        f0.process(&mut col);
                        for a in 0..r0 {
                            out[((a * r1 + b) * r2 + c) * r3 + d] += col[a].norm_sqr();
                        }
                    }
                }
            }
        }
        out.iter_mut().for_each(|v| *v = v.sqrt());
        Ok(Grid4 {
            res,
            n_tx: self.n_tx,
            values: out,
        })
    }
}

pub(crate) fn vandermonde(c: [f64; 4], nt: usize, nr: usize, half_len: usize) -> CVec {
    let lbar = 2 * half_len + 1;
    let n = half_len as f64;
    let e1: Vec<C64> = (0..lbar)
        .map(|k| C64::from_polar(1.0, -2.0 * PI * (k as f64 - n) * c[0]))
        .collect();
    let e2: Vec<C64> = (0..lbar)
        .map(|k| C64::from_polar(1.0, -2.0 * PI * (k as f64 - n) * c[1]))
        .collect();
    let mut v = CVec::zeros(lbar * lbar * nt * nr);
    let mut i = 0;
    for r in 0..nr {
        for s in 0..nt {
            let ang = C64::from_polar(1.0, 2.0 * PI * (r as f64 * nt as f64 * c[3] + s as f64 * c[2]));
            for a in &e1 {
                for b in &e2 {
                    v[i] = ang * a * b;
                    i += 1;
                }
            }
        }
    }
    v
}

/// Localization settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizeOptions {
    pub res: [usize; 4],
    /// acceptance level for `‖f‖₂`
    pub threshold: f64,
    /// merge radius, in units of the main-lobe width of each axis
    /// (`1/L̄` for delay and Doppler, `1/Nt` for AoD, `1/(Nt·Nr)` for AoA)
    pub min_sep: f64,
}

impl LocalizeOptions {
    pub fn for_scene(n_tx: usize, n_rx: usize) -> Self {
        let ang = 64.max(8 * n_tx * n_rx);
        LocalizeOptions {
            res: [64, 64, ang, ang],
            threshold: 0.99,
            min_sep: 0.5,
        }
    }
}

fn lobe_dist(a: [f64; 4], b: [f64; 4], nt: usize, nr: usize, lbar: usize) -> f64 {
    let e = coord_errors(a, b, nt);
    let w = [
        1.0 / lbar as f64,
        1.0 / lbar as f64,
        1.0 / nt as f64,
        1.0 / (nt * nr) as f64,
    ];
    (0..4).map(|k| e[k] / w[k]).fold(0.0, f64::max)
}

/// Golden-section maximization of `g` on `[lo, hi]`.
pub(crate) fn golden_max(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    while hi - lo > tol {
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + r * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - r * (hi - lo);
            g1 = g(x1);
        }
    }
    0.5 * (lo + hi)
}

fn wrap_coords(mut c: [f64; 4], nt: usize) -> [f64; 4] {
    for v in c.iter_mut().take(3) {
        *v = v.rem_euclid(1.0);
    }
    c[3] = c[3].rem_euclid(1.0 / nt as f64);
    c
}

/// Coordinate-wise golden-section ascent on `‖f‖₂²`, each coordinate kept
/// within one grid cell of its start.
pub fn refine_peak(poly: &DualPolynomial, start: [f64; 4], cell: [f64; 4]) -> TargetEstimate {
    let mut c = start;
    for _ in 0..50 {
        let prev = c;
        for k in 0..4 {
            let g = |x: f64| {
                let mut p = c;
                p[k] = x;
                poly.eval(p).norm_squared()
            };
            let x = golden_max(g, start[k] - cell[k], start[k] + cell[k], 1e-11);
            if g(x) > g(c[k]) {
                c[k] = x;
            }
        }
        if (0..4).all(|k| (c[k] - prev[k]).abs() < 1e-10) {
            break;
        }
    }
    let c = wrap_coords(c, poly.n_tx);
    TargetEstimate {
        coords: c,
        peak_value: poly.norm_at(c),
    }
}

/// Local maxima `≥ threshold` (wrap-around neighbourhoods), merged within
/// `min_sep` lobe widths and refined.
pub fn extract_peaks(grid: &Grid4, poly: &DualPolynomial, threshold: f64, min_sep: f64) -> Vec<TargetEstimate> {
    let res = grid.res;
    let mut cands: Vec<(f64, usize)> = Vec::new();
    for (f, &v) in grid.values.iter().enumerate() {
        if v < threshold {
            continue;
        }
        let idx = grid.unflat(f);
        let mut is_max = true;
        'nb: for da in 0..3usize {
            for db in 0..3usize {
                for dc in 0..3usize {
                    for dd in 0..3usize {
                        if (da, db, dc, dd) == (1, 1, 1, 1) {
                            continue;
                        }
                        let nb = [
                            (idx[0] + res[0] + da - 1) % res[0],
                            (idx[1] + res[1] + db - 1) % res[1],
                            (idx[2] + res[2] + dc - 1) % res[2],
                            (idx[3] + res[3] + dd - 1) % res[3],
                        ];
                        let g = grid.flat(nb);
                        let w = grid.values[g];
                        if w > v || (w == v && g < f) {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
            }
        }
        if is_max {
            cands.push((v, f));
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let (nt, nr, lbar) = (poly.n_tx, poly.n_rx, poly.lbar());
    let merge = |list: Vec<TargetEstimate>| {
        let mut kept: Vec<TargetEstimate> = Vec::new();
        for e in list {
            if kept.iter().all(|k| lobe_dist(k.coords, e.coords, nt, nr, lbar) >= min_sep) {
                kept.push(e);
            }
        }
        kept
    };
    let coarse = merge(
        cands
            .iter()
            .map(|&(v, f)| TargetEstimate {
                coords: grid.coords_of(grid.unflat(f)),
                peak_value: v,
            })
            .collect(),
    );
    let mut refined: Vec<TargetEstimate> = coarse
        .iter()
        .map(|e| refine_peak(poly, e.coords, grid.cell()))
        .collect();
    refined.sort_by(|a, b| b.peak_value.total_cmp(&a.peak_value));
    merge(refined)
}

/// Grid evaluation plus peak extraction.
pub fn localize(poly: &DualPolynomial, opts: &LocalizeOptions) -> Result<(Grid4, Vec<TargetEstimate>)> {
    let grid = poly.eval_grid(opts.res)?;
    let peaks = extract_peaks(&grid, poly, opts.threshold, opts.min_sep);
    Ok((grid, peaks))
}

/// `ψ ↦ ‖P conj(a_{Nr}(ψ))‖₂` with `P[p, r̃] = q_{(r̃,p)}`.
#[derive(Clone, Debug)]
pub struct JammerPolynomial {
    /// L̄ × Nr
    pub p: CMat,
}

impl JammerPolynomial {
    pub fn new(q: &CVec, n_rx: usize, lbar: usize) -> Result<Self> {
        check_len("q", n_rx * lbar, q.len())?;
        Ok(JammerPolynomial {
            p: CMat::from_fn(lbar, n_rx, |p, r| q[r * lbar + p]),
        })
    }

    pub fn eval(&self, psi: f64) -> f64 {
        let c = CVec::from_fn(self.p.ncols(), |r, _| C64::from_polar(1.0, -2.0 * PI * r as f64 * psi));
        (&self.p * c).norm()
    }

    /// Values at `k/res`, by FFT.
    pub fn grid(&self, res: usize) -> Result<Vec<f64>> {
        let nr = self.p.ncols();
        if res < nr {
            return Err(Error::InvalidArgument(format!("jammer grid needs at least {nr} points")));
        }
        let fft = FftPlanner::<f64>::new().plan_fft_forward(res);
        let mut acc = vec![0.0; res];
        let mut buf = vec![C64::default(); res];
        for p in 0..self.p.nrows() {
            buf.iter_mut().for_each(|z| *z = C64::default());
            for r in 0..nr {
                buf[r] = self.p[(p, r)];
            }
            fft.process(&mut buf);
            for k in 0..res {
                acc[k] += buf[k].norm_sqr();
            }
        }
        Ok(acc.into_iter().map(f64::sqrt).collect())
    }

    /// Maximal runs of grid points at or above `level` (circular).
    pub fn clusters(&self, res: usize, level: f64) -> Result<Vec<(usize, usize)>> {
        let g = self.grid(res)?;
        let above: Vec<bool> = g.iter().map(|&v| v >= level).collect();
        if above.iter().all(|&a| a) {
            return Ok(vec![(0, res - 1)]);
        }
        let start = above.iter().position(|&a| !a).expect("some point below");
        let mut out = Vec::new();
        let mut run: Option<usize> = None;
        for i in 1..=res {
            let k = (start + i) % res;
            match (above[k], run) {
                (true, None) => run = Some(k),
                (false, Some(s)) => {
                    out.push((s, (k + res - 1) % res));
                    run = None;
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// Local maxima within `eps` of `lambda`, refined by golden section.
    pub fn estimates(&self, lambda: f64, eps: f64, res: usize) -> Result<Vec<f64>> {
        let g = self.grid(res)?;
        let mut out = Vec::new();
        for k in 0..res {
            let (l, r) = (g[(k + res - 1) % res], g[(k + 1) % res]);
            if g[k] >= lambda * (1.0 - eps) && g[k] >= l && g[k] > r {
                let h = 1.0 / res as f64;
                let x0 = k as f64 * h;
                let psi = golden_max(|x| self.eval(x), x0 - h, x0 + h, 1e-12);
                out.push(psi.rem_euclid(1.0));
            }
        }
        Ok(out)
    }
}

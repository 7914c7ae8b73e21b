//! Gains and symbols from localized targets.

use crate::error::check_len;
use crate::localize::TargetEstimate;
use crate::model::{steering, Constellation, MeasurementOperator};
use crate::{cx, CMat, CVec, Error, Result, C64};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;

/// Decoded gain and symbols of one target. `g = amp_hat · h_hat`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodedMessage {
    #[serde(with = "cx::dvec")]
    pub g: CVec,
    /// `‖g‖₂ e^{-iϕ}` with `ϕ` the snap rotation
    #[serde(with = "cx::scalar")]
    pub amp_hat: C64,
    /// `e^{iϕ} g/‖g‖₂`
    #[serde(with = "cx::dvec")]
    pub h_hat: CVec,
    #[serde(with = "cx::vec")]
    pub symbols_hat: Vec<C64>,
    pub scale_used: f64,
    pub phase: f64,
    pub snap_distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsDecode {
    pub g: Vec<CVec>,
    /// `power·temporal` per jammer (empty without jammers)
    pub jammer_waveforms: Vec<CVec>,
    pub residual: f64,
}

/// `L × L̄` block mapping a jammer waveform at `ψ` to measurements.
pub fn jammer_block(psi: f64, n_rx: usize, lbar: usize) -> CMat {
    let a = steering(psi, n_rx);
    let mut b = CMat::zeros(n_rx * lbar, lbar);
    for r in 0..n_rx {
        for p in 0..lbar {
            b[(r * lbar + p, p)] = a[r];
        }
    }
    b
}

fn regression(op: &MeasurementOperator, coords: &[[f64; 4]], psis: &[f64]) -> CMat {
    let (t, lbar) = (op.subspace_dim, op.lbar());
    let cols = coords.len() * t + psis.len() * lbar;
    let mut a = CMat::zeros(op.n_meas(), cols);
    for (k, c) in coords.iter().enumerate() {
        a.columns_mut(k * t, t).copy_from(&op.atom_response(&op.atom(*c)));
    }
    let off = coords.len() * t;
    for (r, &psi) in psis.iter().enumerate() {
        a.columns_mut(off + r * lbar, lbar)
            .copy_from(&jammer_block(psi, op.n_rx, lbar));
    }
    a
}

/// Least squares with an explicit rank check.
fn lstsq(a: &CMat, y: &CVec) -> Result<(CVec, f64)> {
    let cols = a.ncols();
    if cols == 0 {
        return Ok((CVec::zeros(0), y.norm()));
    }
    if a.nrows() < cols {
        return Err(Error::RankDeficient { cols, rank: a.nrows() });
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax * a.nrows().max(cols) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < cols || smax == 0.0 {
        return Err(Error::RankDeficient { cols, rank });
    }
    let x = svd.solve(y, 0.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let res = (y - a * &x).norm();
    Ok((x, res))
}

fn split(x: &CVec, k: usize, t: usize, r: usize, lbar: usize) -> (Vec<CVec>, Vec<CVec>) {
    let g = (0..k).map(|i| x.rows(i * t, t).into_owned()).collect();
    let w = (0..r).map(|i| x.rows(k * t + i * lbar, lbar).into_owned()).collect();
    (g, w)
}

/// Joint least squares for all `g_k` at fixed locations.
pub fn least_squares_decode(y: &CVec, op: &MeasurementOperator, estimates: &[TargetEstimate]) -> Result<LsDecode> {
    joint_decode_with_jammer(y, op, estimates, &[])
}

/// Joint least squares for target gains and jammer waveforms at fixed
/// locations and spatial frequencies.
pub fn joint_decode_with_jammer(
    y: &CVec,
    op: &MeasurementOperator,
    targets: &[TargetEstimate],
    jammer_psi: &[f64],
) -> Result<LsDecode> {
    check_len("y", op.n_meas(), y.len())?;
    let coords: Vec<_> = targets.iter().map(|e| e.coords).collect();
    let a = regression(op, &coords, jammer_psi);
    let (x, residual) = lstsq(&a, y)?;
    let (g, jammer_waveforms) = split(&x, coords.len(), op.subspace_dim, jammer_psi.len(), op.lbar());
    Ok(LsDecode {
        g,
        jammer_waveforms,
        residual,
    })
}

/// Result of [`polish`].
#[derive(Clone, Debug, PartialEq)]
pub struct Polished {
    pub coords: Vec<[f64; 4]>,
    pub jammer_psi: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Local refinement of locations by Levenberg-Marquardt on the variable
/// projection residual `‖(I - A(θ)A(θ)⁺) y‖₂`. Never increases the residual.
pub fn polish(y: &CVec, op: &MeasurementOperator, coords: &[[f64; 4]], jammer_psi: &[f64]) -> Result<Polished> {
    let (k, r) = (coords.len(), jammer_psi.len());
    let np = 4 * k + r;
    let pack = |c: &[[f64; 4]], p: &[f64]| -> Vec<f64> {
        c.iter().flat_map(|x| x.iter().cloned()).chain(p.iter().cloned()).collect()
    };
    let unpack = |th: &[f64]| -> (Vec<[f64; 4]>, Vec<f64>) {
        let c = (0..k).map(|i| [th[4 * i], th[4 * i + 1], th[4 * i + 2], th[4 * i + 3]]).collect();
        (c, th[4 * k..].to_vec())
    };
    let resid = |th: &[f64]| -> Result<CVec> {
        let (c, p) = unpack(th);
        let a = regression(op, &c, &p);
        let (x, _) = lstsq(&a, y)?;
        Ok(y - a * x)
    };
    let mut th = pack(coords, jammer_psi);
    let mut cur = resid(&th)?;
    let start = cur.norm();
    let mut mu = 1e-3;
    let mut iters = 0;
    if np > 0 && start > 0.0 {
        let h = 1e-7;
        for it in 0..100 {
            iters = it + 1;
            // real Jacobian of the stacked (Re, Im) residual
            let nres = cur.len();
            let mut jac = DMatrix::<f64>::zeros(2 * nres, np);
            for p in 0..np {
                let mut tp = th.clone();
                let mut tm = th.clone();
                tp[p] += h;
                tm[p] -= h;
                let d = (resid(&tp)? - resid(&tm)?) / C64::from(2.0 * h);
                for i in 0..nres {
                    jac[(i, p)] = d[i].re;
                    jac[(nres + i, p)] = d[i].im;
                }
            }
            let rv = DVector::from_fn(2 * nres, |i, _| if i < nres { cur[i].re } else { cur[i - nres].im });
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * &rv;
            let mut improved = false;
            for _ in 0..20 {
                let mut m = jtj.clone();
                for d in 0..np {
                    m[(d, d)] += mu * (jtj[(d, d)] + 1e-12);
                }
                let Some(step) = m.cholesky().map(|c| c.solve(&(-&jtr))) else {
                    mu *= 10.0;
                    continue;
                };
                let cand: Vec<f64> = th.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let next = match resid(&cand) {
                    Ok(v) => v,
                    Err(_) => {
                        mu *= 10.0;
                        continue;
                    }
                };
                if next.norm() < cur.norm() {
                    let small = step.norm() < 1e-13;
                    th = cand;
                    cur = next;
                    mu = (mu / 3.0).max(1e-12);
                    improved = !small;
                    break;
                }
                mu *= 10.0;
            }
            if !improved || cur.norm() < 1e-14 * y.norm() {
                break;
            }
        }
    }
    let (mut c, mut p) = unpack(&th);
    for x in c.iter_mut() {
        for v in x.iter_mut().take(3) {
            *v = v.rem_euclid(1.0);
        }
        x[3] = x[3].rem_euclid(1.0 / op.n_tx as f64);
    }
    p.iter_mut().for_each(|v| *v = v.rem_euclid(1.0));
    Ok(Polished {
        coords: c,
        jammer_psi: p,
        residual: cur.norm(),
        iterations: iters,
    })
}

/// Every achievable `‖s‖₂` of a `t`-tuple of constellation points, ascending.
pub fn achievable_norms(constellation: Constellation, t: usize) -> Vec<f64> {
    let mags: BTreeSet<u64> = constellation
        .points()
        .iter()
        .map(|z| z.norm_sqr().round() as u64)
        .collect();
    let mut sums: BTreeSet<u64> = [0].into_iter().collect();
    for _ in 0..t {
        sums = sums.iter().flat_map(|s| mags.iter().map(move |m| s + m)).collect();
    }
    sums.into_iter().map(|s| (s as f64).sqrt()).collect()
}

fn snap_cost(h: &CVec, c: f64, phi: f64, cons: Constellation) -> f64 {
    let rot = C64::from_polar(c, phi);
    h.iter()
        .map(|&z| {
            let v = rot * z;
            (v - cons.snap(v)).norm_sqr()
        })
        .sum()
}

/// Best rotation for scale `c`: grid over a quarter turn, then alternating
/// assignment / closed-form phase updates.
fn best_phase(h: &CVec, c: f64, cons: Constellation) -> (f64, f64) {
    const GRID: usize = 360;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..GRID {
        let phi = FRAC_PI_2 * i as f64 / GRID as f64;
        let d = snap_cost(h, c, phi, cons);
        if d < best.0 {
            best = (d, phi);
        }
    }
    let mut phi = best.1;
    for _ in 0..20 {
        let rot = C64::from_polar(c, phi);
        let s: C64 = h.iter().map(|&z| z.conj() * cons.snap(rot * z)).sum();
        if s.norm() == 0.0 {
            break;
        }
        let next = s.arg();
        let d = snap_cost(h, c, next, cons);
        if d < best.0 - 1e-15 {
            best = (d, next);
            phi = next;
        } else {
            break;
        }
    }
    (best.0, best.1.rem_euclid(2.0 * std::f64::consts::PI))
}

/// Scale, rotate and snap `g` to the constellation, choosing the scale among
/// achievable tuple norms and the rotation continuously.
pub fn snap_to_constellation(g: &CVec, constellation: Constellation) -> Result<DecodedMessage> {
    let n = g.norm();
    if !(n > 0.0) {
        return Err(Error::InvalidArgument("cannot snap a zero gain vector".into()));
    }
    let h = g / C64::from(n);
    let mut best: Option<(f64, f64, f64)> = None;
    for c in achievable_norms(constellation, g.len()) {
        let (d, phi) = best_phase(&h, c, constellation);
        // strict improvement keeps ties on the smaller norm
        if best.is_none_or(|b| d < b.0 - 1e-12) {
            best = Some((d, c, phi));
        }
    }
    let (d, c, phi) = best.expect("at least one norm");
    let rot = C64::from_polar(1.0, phi);
    let h_hat = &h * rot;
    let symbols_hat = h_hat.iter().map(|&z| constellation.snap(z * c)).collect();
    Ok(DecodedMessage {
        g: g.clone(),
        amp_hat: C64::from_polar(n, -phi),
        h_hat,
        symbols_hat,
        scale_used: c,
        phase: phi,
        snap_distance: d,
    })
}

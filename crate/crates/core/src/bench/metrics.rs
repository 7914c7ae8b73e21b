//! Error metrics and target association.

use crate::model::{coord_errors, MeasurementOperator, SymbolVector, TargetParams};
use crate::{CMat, CVec, Error, Result, C64};

/// Minimum-cost assignment of rows to columns for a rectangular cost
/// matrix. Returns, per row, the assigned column (`None` for surplus rows).
pub fn assign(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    // square padding with zero-cost dummies, then the O(n³) potentials method
    let n = rows.max(cols);
    let c = |i: usize, j: usize| if i < rows && j < cols { cost[i][j] } else { 0.0 };
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; rows];
    for j in 1..=n {
        if p[j] >= 1 && p[j] <= rows && j <= cols {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Max-coordinate identifiable distance between two locations.
pub fn location_distance(a: [f64; 4], b: [f64; 4], n_tx: usize) -> f64 {
    coord_errors(a, b, n_tx).iter().fold(0.0, |m, &x| m.max(x))
}

/// Matches each true location to at most one estimate.
pub fn match_estimates(truth: &[[f64; 4]], est: &[[f64; 4]], n_tx: usize) -> Vec<Option<usize>> {
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| est.iter().map(|e| location_distance(*t, *e, n_tx)).collect())
        .collect();
    assign(&cost)
}

fn channel(op: &MeasurementOperator, terms: impl Iterator<Item = ([f64; 4], C64)>) -> CVec {
    let mut v = CVec::zeros(op.atom_len());
    for (c, a) in terms {
        v += op.atom(c).conjugate() * a;
    }
    v
}

/// `‖v − v̂‖₂/‖v‖₂` with `v = Σ α_k a(τ_k)^H`.
pub fn nmse(truth: &[TargetParams], est: &[([f64; 4], C64)], op: &MeasurementOperator) -> Result<f64> {
    let v = channel(op, truth.iter().map(|t| (t.coords(), t.amp)));
    let nv = v.norm();
    if !(nv > 0.0) {
        return Err(Error::InvalidArgument("true channel is zero".into()));
    }
    let vh = channel(op, est.iter().cloned());
    Ok((v - vh).norm() / nv)
}

/// `‖U − Û‖_F/‖U‖_F` with `Û = Σ_k ĝ_k a(τ̂_k)^H`.
pub fn lifted_error(u_true: &CMat, op: &MeasurementOperator, coords: &[[f64; 4]], gains: &[CVec]) -> Result<f64> {
    let nu = u_true.norm();
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument("true lifted signal is zero".into()));
    }
    let mut u = u_true.clone();
    for (c, g) in coords.iter().zip(gains) {
        u -= g * op.atom(*c).adjoint();
    }
    Ok(u.norm() / nu)
}

const QUARTER: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 1.0),
    C64::new(-1.0, 0.0),
    C64::new(0.0, -1.0),
];

/// Wrong positions of `decoded` against `truth`, minimized over the
/// quarter-turn rotations that leave square QAM invariant.
pub fn symbol_errors(truth: &[C64], decoded: &[C64]) -> usize {
    if truth.len() != decoded.len() {
        return truth.len();
    }
    QUARTER
        .iter()
        .map(|r| truth.iter().zip(decoded).filter(|(t, d)| (**d * r - **t).norm() > 1e-9).count())
        .min()
        .unwrap_or(0)
}

/// Quarter turn applied to `decoded` that best matches `truth`.
pub fn best_quarter_turn(truth: &[C64], decoded: &[C64]) -> C64 {
    let mut best = (usize::MAX, QUARTER[0]);
    for r in QUARTER {
        let e = truth.iter().zip(decoded).filter(|(t, d)| (**d * r - **t).norm() > 1e-9).count();
        if e < best.0 {
            best = (e, r);
        }
    }
    best.1
}

/// Symbol error rate over `K·T` positions. `decoded[k]` is the decode
/// aligned to true target `k`; `None` counts all `T` symbols as wrong.
pub fn ser(truth: &[SymbolVector], decoded: &[Option<Vec<C64>>]) -> Result<f64> {
    if truth.len() != decoded.len() {
        return Err(Error::Dimension {
            what: "aligned decodes",
            expected: truth.len(),
            got: decoded.len(),
        });
    }
    let total: usize = truth.iter().map(|s| s.symbols.len()).sum();
    if total == 0 {
        return Ok(0.0);
    }
    let wrong: usize = truth
        .iter()
        .zip(decoded)
        .map(|(t, d)| match d {
            Some(d) => symbol_errors(&t.symbols, d),
            None => t.symbols.len(),
        })
        .sum();
    Ok(wrong as f64 / total as f64)
}

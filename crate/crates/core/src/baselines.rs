//! Reference estimators with known symbols: pilot-aided ANM and on-grid ℓ1.
//!
//! Both collapse the subspace with a known common direction `h_ref`. The
//! returned amplitudes are coefficients of `h_ref a(τ)^H`; a target whose
//! own `h_k = β_k h_ref` therefore shows up with amplitude `α_k β_k`.

use crate::bench::{recover, RecoverOptions, Recovery};
use crate::error::check_len;
use crate::model::MeasurementOperator;
use crate::{CMat, CVec, Error, Result, C64};
use serde::{Deserialize, Serialize};

/// Common direction of the known `h` vectors. All of them must be parallel.
pub fn common_direction(h: &[CVec], t: usize) -> Result<CVec> {
    let first = h.first().ok_or_else(|| Error::InvalidArgument("no known h vectors".into()))?;
    check_len("h", t, first.len())?;
    let n = first.norm();
    if !(n > 0.0) {
        return Err(Error::InvalidArgument("zero h vector".into()));
    }
    let r = first / C64::from(n);
    for v in &h[1..] {
        check_len("h", t, v.len())?;
        let c = r.dotc(v).norm();
        if (c - v.norm()).abs() > 1e-9 * v.norm().max(1.0) {
            return Err(Error::Unsupported("pilot baselines need parallel h vectors".into()));
        }
    }
    Ok(r)
}

/// Pilot-aided ANM output.
#[derive(Clone, Debug)]
pub struct PilotResult {
    pub h_ref: CVec,
    pub recovery: Recovery,
    /// one coefficient per estimate, relative to `h_ref`
    pub amplitudes: Vec<C64>,
}

/// Same dual SDR with the subspace collapsed to `h_ref`, then localization
/// and least squares.
pub fn pilot_anm(y: &CVec, op: &MeasurementOperator, h: &[CVec], opts: &RecoverOptions) -> Result<PilotResult> {
    let h_ref = common_direction(h, op.subspace_dim)?;
    let collapsed = op.collapse(&h_ref)?;
    let recovery = recover(y, &collapsed, opts)?;
    let amplitudes = recovery.gains.iter().map(|g| g[0]).collect();
    Ok(PilotResult {
        h_ref,
        recovery,
        amplitudes,
    })
}

/// Uniform lattice over the identifiable domain; AoA spans `[0, 1/Nt)`.
#[derive(Clone, Debug)]
pub struct GridDictionary {
    pub res: [usize; 4],
    pub coords: Vec<[f64; 4]>,
    /// L × (#grid atoms)
    pub columns: CMat,
}

impl GridDictionary {
    pub fn build(op: &MeasurementOperator, h_ref: &CVec, res: [usize; 4]) -> Result<Self> {
        if res.iter().any(|&r| r < 4) {
            return Err(Error::InvalidArgument("grid resolution must be at least 4".into()));
        }
        check_len("h", op.subspace_dim, h_ref.len())?;
        let collapsed = op.collapse(h_ref)?;
        let span = [1.0, 1.0, 1.0, 1.0 / op.n_tx as f64];
        let n: usize = res.iter().product();
        let mut coords = Vec::with_capacity(n);
        let mut columns = CMat::zeros(op.n_meas(), n);
        for a in 0..res[0] {
            for b in 0..res[1] {
                for c in 0..res[2] {
                    for d in 0..res[3] {
                        let idx = [a, b, c, d];
                        let x: [f64; 4] = std::array::from_fn(|k| span[k] * idx[k] as f64 / res[k] as f64);
                        let col = collapsed.atom_response(&collapsed.atom(x));
                        columns.set_column(coords.len(), &col.column(0));
                        coords.push(x);
                    }
                }
            }
        }
        Ok(GridDictionary { res, coords, columns })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Options {
    pub res: [usize; 4],
    /// support threshold relative to the largest coefficient
    pub support_threshold: f64,
    pub max_iters: usize,
    pub bisection_steps: usize,
}

impl Default for L1Options {
    fn default() -> Self {
        L1Options {
            res: [16; 4],
            support_threshold: 1e-2,
            max_iters: 2000,
            bisection_steps: 40,
        }
    }
}

#[derive(Clone, Debug)]
pub struct L1Result {
    pub h_ref: CVec,
    pub coefficients: CVec,
    /// `(grid coords, coefficient)` above the support threshold
    pub support: Vec<([f64; 4], C64)>,
    pub penalty: f64,
    pub residual: f64,
    /// residual within 1% of the noise bound
    pub converged: bool,
    /// penalized objective per proximal iteration of the final solve
    pub objective_history: Vec<f64>,
    pub grid_coords: Vec<[f64; 4]>,
}

fn soft(z: C64, t: f64) -> C64 {
    let n = z.norm();
    if n <= t {
        C64::default()
    } else {
        z * ((n - t) / n)
    }
}

fn lipschitz(a: &CMat) -> f64 {
    // power iteration on AᴴA from a fixed start
    let mut v = CVec::from_element(a.ncols(), C64::from(1.0));
    let mut s = 0.0;
    for _ in 0..100 {
        let w = a.ad_mul(&(a * &v));
        let n = w.norm();
        if n == 0.0 {
            return 1.0;
        }
        let next = n / v.norm();
        v = w / C64::from(n);
        if (next - s).abs() <= 1e-10 * next {
            s = next;
            break;
        }
        s = next;
    }
    s * 1.01
}

fn penalized(a: &CMat, y: &CVec, c: &CVec, mu: f64) -> f64 {
    0.5 * (y - a * c).norm_squared() + mu * c.iter().map(|z| z.norm()).sum::<f64>()
}

/// Monotone FISTA for `½‖y − Ac‖² + μ‖c‖₁`, warm-started at `c0`.
fn mfista(a: &CMat, y: &CVec, mu: f64, lip: f64, c0: &CVec, max_iters: usize) -> (CVec, Vec<f64>) {
    let mut x = c0.clone();
    let mut x_prev = x.clone();
    let mut z = x.clone();
    let mut t = 1.0f64;
    let mut f = penalized(a, y, &x, mu);
    let mut hist = vec![f];
    for _ in 0..max_iters {
        let grad = a.ad_mul(&(a * &z - y));
        let cand = (&z - grad / C64::from(lip)).map(|v| soft(v, mu / lip));
        let fc = penalized(a, y, &cand, mu);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        x_prev.copy_from(&x);
        if fc <= f {
            x = cand.clone();
            f = fc;
        }
        z = &x + (&cand - &x) * C64::from(t / t_next) + (&x - &x_prev) * C64::from((t - 1.0) / t_next);
        t = t_next;
        let last = *hist.last().expect("nonempty");
        hist.push(f);
        if last - f <= 1e-12 * last.max(1e-300) && fc >= f {
            break;
        }
    }
    (x, hist)
}

/// `min ‖c‖₁ s.t. ‖y − Φc‖₂ ≤ δ` over a grid dictionary, via the penalized
/// form with the penalty bisected until the residual is within 1% of `δ`.
pub fn l1_grid(y: &CVec, op: &MeasurementOperator, h: &[CVec], noise_bound: f64, opts: &L1Options) -> Result<L1Result> {
    check_len("y", op.n_meas(), y.len())?;
    if !(noise_bound >= 0.0) {
        return Err(Error::InvalidArgument("noise bound must be nonnegative".into()));
    }
    let h_ref = common_direction(h, op.subspace_dim)?;
    let dict = GridDictionary::build(op, &h_ref, opts.res)?;
    let a = &dict.columns;
    let zero = CVec::zeros(a.ncols());
    if y.norm() <= noise_bound {
        return Ok(L1Result {
            h_ref,
            coefficients: zero,
            support: Vec::new(),
            penalty: f64::INFINITY,
            residual: y.norm(),
            converged: true,
            objective_history: Vec::new(),
            grid_coords: dict.coords,
        });
    }
    let lip = lipschitz(a);
    let mu_max = a.ad_mul(y).iter().map(|z| z.norm()).fold(0.0, f64::max);
    // a target residual of 0 is unreachable with a penalty; floor it
    let goal = noise_bound.max(1e-6 * y.norm());
    let (mut lo, mut hi) = ((mu_max * 1e-8).ln(), mu_max.ln());
    let mut best: Option<(CVec, Vec<f64>, f64, f64)> = None;
    let mut warm = zero.clone();
    for _ in 0..opts.bisection_steps {
        let mu = (0.5 * (lo + hi)).exp();
        let (c, hist) = mfista(a, y, mu, lip, &warm, opts.max_iters);
        let res = (y - a * &c).norm();
        let better = best.as_ref().is_none_or(|b| (res - goal).abs() < (b.3 - goal).abs());
        if better {
            best = Some((c.clone(), hist, mu, res));
        }
        if (res - goal).abs() <= 0.01 * goal {
            break;
        }
        if res > goal {
            hi = mu.ln();
        } else {
            lo = mu.ln();
        }
        warm = c;
    }
    let (c, hist, mu, res) = best.expect("at least one bisection step");
    if !c.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument("proximal iteration diverged".into()));
    }
    let cmax = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let support = c
        .iter()
        .enumerate()
        .filter(|(_, z)| cmax > 0.0 && z.norm() >= opts.support_threshold * cmax)
        .map(|(i, z)| (dict.coords[i], *z))
        .collect();
    Ok(L1Result {
        h_ref,
        coefficients: c,
        support,
        penalty: mu,
        residual: res,
        converged: (res - goal).abs() <= 0.01 * goal,
        objective_history: hist,
        grid_coords: dict.coords,
    })
}

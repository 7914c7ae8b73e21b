//! Scenes, atoms, the lifted measurement operator and scene generators.
//!
//! Index conventions used throughout the crate:
//!
//! * atom entries are indexed by `(r, s, l, m)` with `r < Nr` the receive
//!   antenna, `s < Nt` the transmit antenna and `l, m ∈ -N..=N` the delay and
//!   Doppler lags; the flat index is `((r*Nt + s)*L̄ + l+N)*L̄ + m+N`;
//! * measurements are indexed by `j = (r̃, p)` with `r̃ < Nr` and
//!   `p ∈ -N..=N`, flat index `r̃*L̄ + p+N`, so `L = L̄·Nr`;
//! * coding row `i` holds the sample `i - N`; sample indices wrap modulo L̄.
//!
//! The AoA enters only through `e^{i2π r Nt φ}` and is therefore identifiable
//! modulo `1/Nt`. Generators draw it from `[0, 1/Nt)`.

use crate::error::check_len;
use crate::{cx, wrap_dist, CMat, CVec, Error, Result, C64};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Antenna, sample and subspace dimensions of one scene.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub half_len: usize,
    pub subspace_dim: usize,
    pub n_targets: usize,
    pub n_jammers: usize,
    pub rng_seed: u64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScene(m.to_string()));
        if self.n_tx == 0 || self.n_rx == 0 || self.half_len == 0 || self.subspace_dim == 0 {
            return bad("n_tx, n_rx, half_len and subspace_dim must be positive");
        }
        if self.n_targets >= self.n_tx {
            return bad("the number of targets must be smaller than n_tx");
        }
        if self.subspace_dim > self.lbar() {
            return bad("subspace_dim must not exceed 2*half_len+1");
        }
        Ok(())
    }

    /// Samples per antenna, `2N+1`.
    pub fn lbar(&self) -> usize {
        2 * self.half_len + 1
    }

    /// Atom length `M = L̄²·Nt·Nr`.
    pub fn atom_len(&self) -> usize {
        self.lbar() * self.lbar() * self.n_tx * self.n_rx
    }

    /// Measurement count `L = L̄·Nr`.
    pub fn n_meas(&self) -> usize {
        self.lbar() * self.n_rx
    }
}

/// Waveform model variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// All transmit antennas share one coding matrix.
    PaperFaithful,
    /// Transmit antenna `s` uses its own coding matrix `D_s`.
    PerAntennaCoded,
}

/// Square QAM alphabets on the odd-integer grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Constellation {
    Qam4,
    Qam16,
    Qam64,
}

impl Constellation {
    /// Points per axis.
    pub fn side(self) -> usize {
        match self {
            Constellation::Qam4 => 2,
            Constellation::Qam16 => 4,
            Constellation::Qam64 => 8,
        }
    }

    /// Odd-integer levels used on each axis, e.g. `[-3,-1,1,3]`.
    pub fn levels(self) -> Vec<f64> {
        let n = self.side() as i64;
        (0..n).map(|i| (2 * i - n + 1) as f64).collect()
    }

    pub fn points(self) -> Vec<C64> {
        let lv = self.levels();
        lv.iter()
            .flat_map(|&re| lv.iter().map(move |&im| C64::new(re, im)))
            .collect()
    }

    /// Nearest constellation point, per axis.
    pub fn snap(self, z: C64) -> C64 {
        let m = (self.side() - 1) as f64;
        let axis = |x: f64| {
            let k = ((x + m) / 2.0).round().clamp(0.0, m);
            2.0 * k - m
        };
        C64::new(axis(z.re), axis(z.im))
    }
}

/// One target: location on the torus plus complex gain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetParams {
    pub tau: f64,
    pub dopp: f64,
    pub aod: f64,
    pub aoa: f64,
    #[serde(with = "cx::scalar")]
    pub amp: C64,
}

impl TargetParams {
    pub fn coords(&self) -> [f64; 4] {
        [self.tau, self.dopp, self.aod, self.aoa]
    }

    /// Uniform location, AoA in `[0, 1/Nt)`, gain magnitude in `[0.5, 1.5)`.
    pub fn random<R: Rng + ?Sized>(n_tx: usize, rng: &mut R) -> Self {
        let mag = 0.5 + rng.random::<f64>();
        let ph = 2.0 * PI * rng.random::<f64>();
        TargetParams {
            tau: rng.random(),
            dopp: rng.random(),
            aod: rng.random(),
            aoa: rng.random::<f64>() / n_tx as f64,
            amp: C64::from_polar(mag, ph),
        }
    }
}

/// Structured jammer: spatial frequency, power and unit-norm waveform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JammerParams {
    pub psi: f64,
    pub power: f64,
    #[serde(with = "cx::dvec")]
    pub temporal: CVec,
}

impl JammerParams {
    pub fn random<R: Rng + ?Sized>(lbar: usize, power: f64, rng: &mut R) -> Self {
        let t = gaussian_vec(lbar, rng);
        let n = t.norm();
        JammerParams {
            psi: rng.random(),
            power,
            temporal: t / C64::from(n),
        }
    }
}

/// QAM symbols of one target and their unit-norm direction `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolVector {
    #[serde(with = "cx::vec")]
    pub symbols: Vec<C64>,
    #[serde(with = "cx::dvec")]
    pub h: CVec,
    pub constellation: Constellation,
}

impl SymbolVector {
    pub fn new(symbols: Vec<C64>, constellation: Constellation) -> Result<Self> {
        let v = CVec::from_vec(symbols.clone());
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::InvalidArgument("all-zero symbol vector".into()));
        }
        Ok(SymbolVector {
            symbols,
            h: v / C64::from(n),
            constellation,
        })
    }

    pub fn random<R: Rng + ?Sized>(t: usize, constellation: Constellation, rng: &mut R) -> Self {
        let pts = constellation.points();
        let sym = (0..t).map(|_| pts[rng.random_range(0..pts.len())]).collect();
        SymbolVector::new(sym, constellation).expect("QAM points are nonzero")
    }
}

/// Coding matrix `D` (L̄ × T); row `i` is `d_{i-N}^H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodingMatrix {
    #[serde(with = "cx::dmat")]
    pub entries: CMat,
    pub coherence: f64,
}

impl CodingMatrix {
    pub fn new(entries: CMat) -> Self {
        let coherence = entries.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        CodingMatrix { entries, coherence }
    }

    /// I.i.d. unit-variance circular complex Gaussian entries.
    pub fn gaussian<R: Rng + ?Sized>(lbar: usize, t: usize, rng: &mut R) -> Self {
        let v = gaussian_vec(lbar * t, rng);
        Self::new(CMat::from_column_slice(lbar, t, v.as_slice()))
    }

    /// `‖(1/L̄) Σ_l d_l d_l^H - I‖₂`.
    pub fn isotropy_error(&self) -> f64 {
        let lbar = self.entries.nrows() as f64;
        let t = self.entries.ncols();
        let g = self.entries.adjoint() * &self.entries / C64::from(lbar) - CMat::identity(t, t);
        g.symmetric_eigenvalues().iter().fold(0.0f64, |a, &x| a.max(x.abs()))
    }
}

/// Row of a coding matrix holding sample `i` (wrapped modulo L̄).
pub fn coding_row(half_len: usize, i: i64) -> usize {
    let lbar = (2 * half_len + 1) as i64;
    (i + half_len as i64).rem_euclid(lbar) as usize
}

/// `D_N(t) = (1/L̄) Σ_{m=-N}^{N} e^{i2πtm}`; real-valued.
pub fn dirichlet(t: f64, n: usize) -> f64 {
    let s: f64 = (1..=n).map(|m| (2.0 * PI * t * m as f64).cos()).sum();
    (1.0 + 2.0 * s) / (2 * n + 1) as f64
}

/// `[e^{i2π r ψ}]_{r<n}`.
pub fn steering(psi: f64, n: usize) -> CVec {
    CVec::from_fn(n, |r, _| C64::from_polar(1.0, 2.0 * PI * r as f64 * psi))
}

/// Flat atom index of `(r, s, l, m)`.
pub fn atom_index(n_tx: usize, half_len: usize, r: usize, s: usize, l: i64, m: i64) -> usize {
    let lbar = 2 * half_len + 1;
    let n = half_len as i64;
    ((r * n_tx + s) * lbar + (l + n) as usize) * lbar + (m + n) as usize
}

/// 4-D atom with its coordinates `(tau, dopp, aod, aoa)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom4D {
    pub coords: [f64; 4],
    pub vector: CVec,
}

pub fn make_atom(coords: [f64; 4], scene: &SceneConfig) -> Atom4D {
    Atom4D {
        coords,
        vector: atom_vector(coords, scene.n_tx, scene.n_rx, scene.half_len),
    }
}

pub(crate) fn atom_vector(c: [f64; 4], nt: usize, nr: usize, n: usize) -> CVec {
    let lbar = 2 * n + 1;
    let kern = |x: f64| -> Vec<f64> {
        (0..lbar)
            .map(|i| dirichlet((i as f64 - n as f64) / lbar as f64 - x, n))
            .collect()
    };
    let dt = kern(c[0]);
    let dv = kern(c[1]);
    let mut out = CVec::zeros(lbar * lbar * nt * nr);
    let mut k = 0;
    for r in 0..nr {
        for s in 0..nt {
            let ph = C64::from_polar(1.0, 2.0 * PI * (r as f64 * nt as f64 * c[3] + s as f64 * c[2]));
            for a in &dt {
                for b in &dv {
                    out[k] = ph * (a * b);
                    k += 1;
                }
            }
        }
    }
    out
}

/// Lifted linear map `U ↦ [Tr(D̃_j U)]_j`, stored densely as `G` (L × T·M)
/// with `y = G·vec(U)` and `vec(U)[t*M + col] = U[t, col]`.
#[derive(Clone, Debug)]
pub struct MeasurementOperator {
    pub flavor: Flavor,
    pub n_tx: usize,
    pub n_rx: usize,
    pub half_len: usize,
    pub subspace_dim: usize,
    g: CMat,
}

impl MeasurementOperator {
    /// `codings` holds one matrix for [`Flavor::PaperFaithful`] and `Nt`
    /// matrices for [`Flavor::PerAntennaCoded`].
    pub fn build(scene: &SceneConfig, codings: &[CodingMatrix], flavor: Flavor) -> Result<Self> {
        scene.validate()?;
        let need = match flavor {
            Flavor::PaperFaithful => 1,
            Flavor::PerAntennaCoded => scene.n_tx,
        };
        check_len("coding matrices", need, codings.len())?;
        let (lbar, t) = (scene.lbar(), scene.subspace_dim);
        for c in codings {
            check_len("coding rows", lbar, c.entries.nrows())?;
            check_len("coding columns", t, c.entries.ncols())?;
        }
        let (nt, nr, n) = (scene.n_tx, scene.n_rx, scene.half_len as i64);
        let m_len = scene.atom_len();
        let mut g = CMat::zeros(scene.n_meas(), t * m_len);
        for rt in 0..nr {
            for p in -n..=n {
                let j = rt * lbar + (p + n) as usize;
                for s in 0..nt {
                    let d = &codings[if need == 1 { 0 } else { s }].entries;
                    for l in -n..=n {
                        let row = coding_row(scene.half_len, p - l);
                        for m in -n..=n {
                            let col = atom_index(nt, scene.half_len, rt, s, l, m);
                            let ph = C64::from_polar(1.0, 2.0 * PI * (p * m) as f64 / lbar as f64);
                            for tt in 0..t {
                                g[(j, tt * m_len + col)] = ph * d[(row, tt)];
                            }
                        }
                    }
                }
            }
        }
        Ok(MeasurementOperator {
            flavor,
            n_tx: nt,
            n_rx: nr,
            half_len: scene.half_len,
            subspace_dim: t,
            g,
        })
    }

    pub fn lbar(&self) -> usize {
        2 * self.half_len + 1
    }

    pub fn atom_len(&self) -> usize {
        self.lbar() * self.lbar() * self.n_tx * self.n_rx
    }

    pub fn n_meas(&self) -> usize {
        self.lbar() * self.n_rx
    }

    /// Dense `G`.
    pub fn matrix(&self) -> &CMat {
        &self.g
    }

    /// `D̃_j` as an M × T matrix.
    pub fn sensing(&self, j: usize) -> CMat {
        let m = self.atom_len();
        CMat::from_fn(m, self.subspace_dim, |col, t| self.g[(j, t * m + col)])
    }

    pub fn atom(&self, coords: [f64; 4]) -> CVec {
        atom_vector(coords, self.n_tx, self.n_rx, self.half_len)
    }

    pub fn forward(&self, u: &CMat) -> Result<CVec> {
        check_len("U rows", self.subspace_dim, u.nrows())?;
        check_len("U columns", self.atom_len(), u.ncols())?;
        // vec(U) with t-major layout is the column-major storage of U^T
        let ut = u.transpose();
        Ok(&self.g * CVec::from_column_slice(ut.as_slice()))
    }

    /// `X*(q) = Σ_j q_j D̃_j^H`, a T × M matrix.
    pub fn adjoint(&self, q: &CVec) -> Result<CMat> {
        check_len("q", self.n_meas(), q.len())?;
        let v = self.g.ad_mul(q);
        Ok(CMat::from_column_slice(self.atom_len(), self.subspace_dim, v.as_slice()).transpose())
    }

    /// Regression block for one atom: `y = A·g` when `U = g·a^H`.
    pub fn atom_response(&self, a: &CVec) -> CMat {
        let m = self.atom_len();
        let ac = a.conjugate();
        CMat::from_fn(self.n_meas(), self.subspace_dim, |j, t| {
            self.g.row(j).columns(t * m, m).transpose().dot(&ac)
        })
    }

    /// Operator with the subspace collapsed by a known `h` (pilot model, T=1).
    pub fn collapse(&self, h: &CVec) -> Result<Self> {
        check_len("h", self.subspace_dim, h.len())?;
        let m = self.atom_len();
        let mut g = CMat::zeros(self.n_meas(), m);
        for t in 0..self.subspace_dim {
            g += self.g.columns(t * m, m) * h[t];
        }
        Ok(MeasurementOperator {
            flavor: self.flavor,
            n_tx: self.n_tx,
            n_rx: self.n_rx,
            half_len: self.half_len,
            subspace_dim: 1,
            g,
        })
    }
}

pub fn build_operator(
    scene: &SceneConfig,
    codings: &[CodingMatrix],
    flavor: Flavor,
) -> Result<MeasurementOperator> {
    MeasurementOperator::build(scene, codings, flavor)
}

/// Jammer contribution in measurement order:
/// `z[(r̃,p)] = Σ_r power_r · temporal_r[p] · e^{i2π r̃ ψ_r}`.
pub fn jammer_signal(jammers: &[JammerParams], n_rx: usize, lbar: usize) -> Result<CVec> {
    let mut z = CVec::zeros(n_rx * lbar);
    for jm in jammers {
        check_len("jammer temporal", lbar, jm.temporal.len())?;
        let a = steering(jm.psi, n_rx);
        for rt in 0..n_rx {
            for p in 0..lbar {
                z[rt * lbar + p] += a[rt] * jm.temporal[p] * jm.power;
            }
        }
    }
    Ok(z)
}

/// Output of [`simulate`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Simulation {
    #[serde(with = "cx::dvec")]
    pub y_clean: CVec,
    #[serde(with = "cx::dvec")]
    pub y_observed: CVec,
    #[serde(with = "cx::dmat")]
    pub u_true: CMat,
    #[serde(with = "cx::dvec")]
    pub z_true: CVec,
}

/// `U = Σ_k α_k h_k a(τ_k)^H`.
pub fn lifted_signal(op: &MeasurementOperator, targets: &[TargetParams], symbols: &[SymbolVector]) -> Result<CMat> {
    check_len("symbol vectors", targets.len(), symbols.len())?;
    let mut u = CMat::zeros(op.subspace_dim, op.atom_len());
    for (tg, sv) in targets.iter().zip(symbols) {
        check_len("h", op.subspace_dim, sv.h.len())?;
        let a = op.atom(tg.coords());
        u += (&sv.h * tg.amp) * a.adjoint();
    }
    Ok(u)
}

/// Noiseless echo, additive noise at `snr_db` (scaled exactly) and jamming.
pub fn simulate<R: Rng + ?Sized>(
    op: &MeasurementOperator,
    targets: &[TargetParams],
    symbols: &[SymbolVector],
    jammers: &[JammerParams],
    snr_db: Option<f64>,
    rng: &mut R,
) -> Result<Simulation> {
    if snr_db.is_some_and(f64::is_nan) {
        return Err(Error::InvalidArgument("snr_db is NaN".into()));
    }
    let u_true = lifted_signal(op, targets, symbols)?;
    let y_clean = op.forward(&u_true)?;
    let z_true = jammer_signal(jammers, op.n_rx, op.lbar())?;
    let mut y_observed = &y_clean + &z_true;
    if let Some(snr) = snr_db {
        let w = gaussian_vec(y_clean.len(), rng);
        let wn = w.norm();
        let target = y_clean.norm() * 10f64.powf(-snr / 20.0);
        if wn > 0.0 {
            y_observed += w * C64::from(target / wn);
        }
    }
    Ok(Simulation {
        y_clean,
        y_observed,
        u_true,
        z_true,
    })
}

/// Circular complex Gaussian vector with unit-variance entries.
pub fn gaussian_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * s, im * s)
    })
}

/// Min over pairs of the max per-coordinate wrap-around distance.
pub fn min_separation(targets: &[TargetParams]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::InvalidArgument("no targets".into()));
    }
    let mut best = f64::INFINITY;
    for (i, a) in targets.iter().enumerate() {
        for b in &targets[i + 1..] {
            let (ca, cb) = (a.coords(), b.coords());
            let d = (0..4).map(|k| wrap_dist(ca[k], cb[k])).fold(0.0, f64::max);
            best = best.min(d);
        }
    }
    Ok(best)
}

/// Separation threshold `10/(Nt·Nr - 1)`, inclusive.
pub fn check_separation(targets: &[TargetParams], scene: &SceneConfig) -> Result<bool> {
    let virt = scene.n_tx * scene.n_rx;
    let need = if virt > 1 { 10.0 / (virt - 1) as f64 } else { f64::INFINITY };
    Ok(min_separation(targets)? >= need)
}

/// Per-coordinate identifiable error: wrap-around on the torus, with the
/// AoA compared modulo `1/Nt`.
pub fn coord_errors(a: [f64; 4], b: [f64; 4], n_tx: usize) -> [f64; 4] {
    let nt = n_tx as f64;
    [
        wrap_dist(a[0], b[0]),
        wrap_dist(a[1], b[1]),
        wrap_dist(a[2], b[2]),
        wrap_dist(a[3] * nt, b[3] * nt) / nt,
    ]
}

/// Draw `k` targets whose pairwise identifiable distance (max over
/// coordinates of [`coord_errors`]) is at least `sep`.
pub fn random_separated_targets<R: Rng + ?Sized>(
    n_tx: usize,
    k: usize,
    sep: f64,
    rng: &mut R,
) -> Result<Vec<TargetParams>> {
    let mut out: Vec<TargetParams> = Vec::with_capacity(k);
    let mut tries = 0;
    while out.len() < k {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::InvalidArgument(format!("cannot place {k} targets {sep} apart")));
        }
        let t = TargetParams::random(n_tx, rng);
        let ok = out.iter().all(|o| {
            coord_errors(o.coords(), t.coords(), n_tx).iter().fold(0.0f64, |a, &x| a.max(x)) >= sep
        });
        if ok {
            out.push(t);
        }
    }
    Ok(out)
}

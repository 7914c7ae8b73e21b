//! Metrics, Monte Carlo trials, sweeps and complexity reporting.

mod complexity;
mod metrics;
mod sweep;

pub use complexity::{complexity_report, ComplexityReport};
pub use metrics::{
    assign, best_quarter_turn, lifted_error, location_distance, match_estimates, nmse, ser, symbol_errors,
};
pub use sweep::{run_cell, run_sweep, trial_seed, Cell, CellSummary, SweepSpec};

use crate::baselines::{l1_grid, pilot_anm, L1Options};
use crate::decode::{joint_decode_with_jammer, polish, snap_to_constellation, DecodedMessage};
use crate::localize::{localize, DualPolynomial, JammerPolynomial, LocalizeOptions, TargetEstimate};
use crate::model::{
    build_operator, random_separated_targets, simulate, CodingMatrix, Constellation, Flavor, JammerParams,
    MeasurementOperator, SceneConfig, Simulation, SymbolVector, TargetParams,
};
use crate::solver::{build_clean_sdr, build_noisy_sdr, build_robust_sdr, solve, AdmmOptions, SdpSolution, SolveStatus};
use crate::{cx, CVec, Error, Result, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Settings of the LANM recovery pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverOptions {
    pub admm: AdmmOptions,
    /// `None` picks [`LocalizeOptions::for_scene`]
    pub localize: Option<LocalizeOptions>,
    /// noise bound `δ₂`; 0 solves the equality-constrained SDR
    pub delta2: f64,
    /// jammer dual bound; switches to the robust SDR
    pub lambda: Option<f64>,
    pub polish: bool,
}

impl Default for RecoverOptions {
    fn default() -> Self {
        RecoverOptions {
            admm: AdmmOptions::default(),
            localize: None,
            delta2: 0.0,
            lambda: None,
            polish: true,
        }
    }
}

/// Output of [`recover`].
#[derive(Clone, Debug)]
pub struct Recovery {
    pub solution: SdpSolution,
    pub grid_max: f64,
    /// raw peaks of the dual polynomial
    pub peaks: Vec<TargetEstimate>,
    /// locations used for the final fit (polished when enabled)
    pub coords: Vec<[f64; 4]>,
    pub gains: Vec<CVec>,
    pub jammer_psi: Vec<f64>,
    pub jammer_waveforms: Vec<CVec>,
    pub residual: f64,
}

const JAMMER_GRID: usize = 4096;
const JAMMER_EPS: f64 = 1e-3;

/// Solve, localize, optionally polish, and fit gains by least squares.
pub fn recover(y: &CVec, op: &MeasurementOperator, opts: &RecoverOptions) -> Result<Recovery> {
    let problem = match opts.lambda {
        Some(l) => build_robust_sdr(y, op, l, opts.delta2)?,
        None if opts.delta2 > 0.0 => build_noisy_sdr(y, op, opts.delta2)?,
        None => build_clean_sdr(y, op)?,
    };
    let solution = solve(&problem, &opts.admm)?;
    let poly = DualPolynomial::new(&solution.q, op)?;
    let lopts = opts
        .localize
        .unwrap_or_else(|| LocalizeOptions::for_scene(op.n_tx, op.n_rx));
    let (grid, mut peaks) = localize(&poly, &lopts)?;
    let grid_max = grid.max();
    drop(grid);
    let mut psi = match opts.lambda {
        Some(l) => JammerPolynomial::new(&solution.q, op.n_rx, op.lbar())?.estimates(l, JAMMER_EPS, JAMMER_GRID)?,
        None => Vec::new(),
    };
    let (t, lbar, l) = (op.subspace_dim, op.lbar(), op.n_meas());
    psi.truncate(l / lbar);
    let cap = (l - psi.len() * lbar) / t;
    peaks.truncate(cap);
    // drop the weakest peaks until the joint fit has full column rank
    let fit = loop {
        match joint_decode_with_jammer(y, op, &peaks, &psi) {
            Ok(f) => break f,
            Err(Error::RankDeficient { .. }) if !peaks.is_empty() => {
                peaks.pop();
            }
            Err(e) => return Err(e),
        }
    };
    let mut coords: Vec<[f64; 4]> = peaks.iter().map(|p| p.coords).collect();
    let (mut gains, mut waves, mut residual) = (fit.g, fit.jammer_waveforms, fit.residual);
    // polish only while real unknowns stay below real equations
    let dof = peaks.len() * (4 + 2 * t) + psi.len() * (1 + 2 * lbar);
    if opts.polish && !peaks.is_empty() && dof < 2 * l {
        let pol = polish(y, op, &coords, &psi)?;
        let est: Vec<TargetEstimate> = pol
            .coords
            .iter()
            .map(|c| TargetEstimate {
                coords: *c,
                peak_value: poly.norm_at(*c),
            })
            .collect();
        if let Ok(f) = joint_decode_with_jammer(y, op, &est, &pol.jammer_psi) {
            if f.residual <= residual {
                coords = pol.coords;
                psi = pol.jammer_psi;
                gains = f.g;
                waves = f.jammer_waveforms;
                residual = f.residual;
            }
        }
    }
    Ok(Recovery {
        solution,
        grid_max,
        peaks,
        coords,
        gains,
        jammer_psi: psi,
        jammer_waveforms: waves,
        residual,
    })
}

/// Estimator run by a trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Lanm,
    PilotAnm,
    L1,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Lanm => "lanm",
            Estimator::PilotAnm => "pilot-anm",
            Estimator::L1 => "l1",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lanm" => Ok(Estimator::Lanm),
            "pilot-anm" => Ok(Estimator::PilotAnm),
            "l1" => Ok(Estimator::L1),
            _ => Err(Error::InvalidArgument(format!("unknown estimator {s}"))),
        }
    }
}

/// Everything that defines one Monte Carlo trial except its seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSettings {
    pub scene: SceneConfig,
    pub flavor: Flavor,
    pub constellation: Constellation,
    /// `None` is noiseless
    pub snr_db: Option<f64>,
    /// minimum identifiable distance between generated targets
    pub target_separation: f64,
    pub jammer_power: f64,
    pub estimator: Estimator,
    pub recover: RecoverOptions,
    pub l1: L1Options,
}

impl TrialSettings {
    pub fn new(scene: SceneConfig) -> Self {
        TrialSettings {
            scene,
            flavor: Flavor::PerAntennaCoded,
            constellation: Constellation::Qam4,
            snr_db: None,
            target_separation: 0.2,
            jammer_power: 1.0,
            estimator: Estimator::Lanm,
            recover: RecoverOptions::default(),
            l1: L1Options::default(),
        }
    }
}

/// A generated scene instance.
#[derive(Clone, Debug)]
pub struct Instance {
    pub op: MeasurementOperator,
    pub codings: Vec<CodingMatrix>,
    pub targets: Vec<TargetParams>,
    pub symbols: Vec<SymbolVector>,
    pub jammers: Vec<JammerParams>,
    pub sim: Simulation,
    /// `‖y_observed − y_clean − z‖₂`
    pub noise_norm: f64,
}

/// Draws codings, targets, symbols, jammers and noise from one seed.
pub fn generate(settings: &TrialSettings, seed: u64) -> Result<Instance> {
    let sc = &settings.scene;
    sc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_codes = match settings.flavor {
        Flavor::PaperFaithful => 1,
        Flavor::PerAntennaCoded => sc.n_tx,
    };
    let codings: Vec<CodingMatrix> = (0..n_codes)
        .map(|_| CodingMatrix::gaussian(sc.lbar(), sc.subspace_dim, &mut rng))
        .collect();
    let op = build_operator(sc, &codings, settings.flavor)?;
    let targets = random_separated_targets(sc.n_tx, sc.n_targets, settings.target_separation, &mut rng)?;
    let symbols: Vec<SymbolVector> = (0..sc.n_targets)
        .map(|_| SymbolVector::random(sc.subspace_dim, settings.constellation, &mut rng))
        .collect();
    let jammers: Vec<JammerParams> = (0..sc.n_jammers)
        .map(|_| JammerParams::random(sc.lbar(), settings.jammer_power, &mut rng))
        .collect();
    let sim = simulate(&op, &targets, &symbols, &jammers, settings.snr_db, &mut rng)?;
    let noise_norm = (&sim.y_observed - &sim.y_clean - &sim.z_true).norm();
    Ok(Instance {
        op,
        codings,
        targets,
        symbols,
        jammers,
        sim,
        noise_norm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub grid_max: f64,
}

impl SolverStats {
    fn from(r: &Recovery) -> Self {
        SolverStats {
            status: r.solution.status,
            iterations: r.solution.iterations,
            primal_residual: r.solution.primal_residual,
            dual_residual: r.solution.dual_residual,
            objective: r.solution.objective_value,
            grid_max: r.grid_max,
        }
    }
}

/// One estimated target. `amplitude` is the channel gain used for NMSE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub coords: [f64; 4],
    #[serde(with = "cx::scalar")]
    pub amplitude: C64,
    #[serde(with = "cx::dvec")]
    pub gain: CVec,
    #[serde(with = "cx::vec")]
    pub symbols: Vec<C64>,
    /// index of the matched true target
    pub matched: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub settings: TrialSettings,
    pub nmse: f64,
    /// only for estimators that decode symbols
    pub ser: Option<f64>,
    pub lifted_error: f64,
    pub success: bool,
    pub runtime_s: f64,
    pub solver: Option<SolverStats>,
    pub truth: Vec<TargetParams>,
    pub estimates: Vec<EstimateRecord>,
    pub jammer_psi: Vec<f64>,
    pub error: Option<String>,
}

/// Relative Frobenius error below which a recovery counts as successful.
pub const SUCCESS_TOL: f64 = 1e-3;

struct Outcome {
    estimates: Vec<EstimateRecord>,
    gains_for_u: Vec<CVec>,
    ser: Option<f64>,
    solver: Option<SolverStats>,
    jammer_psi: Vec<f64>,
}

fn decode_all(gains: &[CVec], cons: Constellation) -> Vec<Option<DecodedMessage>> {
    gains.iter().map(|g| snap_to_constellation(g, cons).ok()).collect()
}

fn lanm_outcome(inst: &Instance, s: &TrialSettings) -> Result<Outcome> {
    let mut opts = s.recover.clone();
    if s.snr_db.is_some() && opts.delta2 == 0.0 {
        opts.delta2 = inst.noise_norm;
    }
    let rec = recover(&inst.sim.y_observed, &inst.op, &opts)?;
    let truth: Vec<[f64; 4]> = inst.targets.iter().map(|t| t.coords()).collect();
    let matching = match_estimates(&truth, &rec.coords, inst.op.n_tx);
    let decoded = decode_all(&rec.gains, s.constellation);
    let mut estimates: Vec<EstimateRecord> = rec
        .coords
        .iter()
        .zip(&rec.gains)
        .zip(&decoded)
        .map(|((c, g), d)| {
            // α̂ = ĥᴴg with ĥ the unit direction of the decoded symbols
            let (amp, sym) = match d {
                Some(d) => {
                    let h = CVec::from_vec(d.symbols_hat.clone());
                    let n = h.norm();
                    let amp = if n > 0.0 { h.dotc(g) / n } else { C64::from(g.norm()) };
                    (amp, d.symbols_hat.clone())
                }
                None => (C64::default(), Vec::new()),
            };
            EstimateRecord {
                coords: *c,
                amplitude: amp,
                gain: g.clone(),
                symbols: sym,
                matched: None,
            }
        })
        .collect();
    let mut aligned = vec![None; inst.targets.len()];
    for (k, m) in matching.iter().enumerate() {
        if let Some(j) = *m {
            let e = &mut estimates[j];
            e.matched = Some(k);
            if !e.symbols.is_empty() {
                // ĥ is known up to a quarter turn; resolve it against the truth
                let r = best_quarter_turn(&inst.symbols[k].symbols, &e.symbols);
                e.symbols.iter_mut().for_each(|z| *z *= r);
                e.amplitude /= r;
                aligned[k] = Some(e.symbols.clone());
            }
        }
    }
    Ok(Outcome {
        ser: Some(ser(&inst.symbols, &aligned)?),
        gains_for_u: rec.gains.clone(),
        solver: Some(SolverStats::from(&rec)),
        jammer_psi: rec.jammer_psi.clone(),
        estimates,
    })
}

/// Known-`h` estimators report coefficients of `h_ref`; convert them to
/// channel gains through the matched target's `β_k = h_refᴴ h_k`.
fn known_h_outcome(
    inst: &Instance,
    h_ref: &CVec,
    found: Vec<([f64; 4], C64)>,
    solver: Option<SolverStats>,
) -> Outcome {
    let truth: Vec<[f64; 4]> = inst.targets.iter().map(|t| t.coords()).collect();
    let coords: Vec<[f64; 4]> = found.iter().map(|f| f.0).collect();
    let matching = match_estimates(&truth, &coords, inst.op.n_tx);
    let mut estimates: Vec<EstimateRecord> = found
        .iter()
        .map(|(c, a)| EstimateRecord {
            coords: *c,
            amplitude: *a,
            gain: h_ref * *a,
            symbols: Vec::new(),
            matched: None,
        })
        .collect();
    for (k, m) in matching.iter().enumerate() {
        if let Some(j) = *m {
            let beta = h_ref.dotc(&inst.symbols[k].h);
            estimates[j].matched = Some(k);
            if beta.norm() > 0.0 {
                estimates[j].amplitude /= beta;
            }
        }
    }
    Outcome {
        gains_for_u: estimates.iter().map(|e| e.gain.clone()).collect(),
        estimates,
        ser: None,
        solver,
        jammer_psi: Vec::new(),
    }
}

fn outcome(inst: &Instance, s: &TrialSettings) -> Result<Outcome> {
    let hs: Vec<CVec> = inst.symbols.iter().map(|v| v.h.clone()).collect();
    match s.estimator {
        Estimator::Lanm => lanm_outcome(inst, s),
        Estimator::PilotAnm => {
            let mut opts = s.recover.clone();
            if s.snr_db.is_some() && opts.delta2 == 0.0 {
                opts.delta2 = inst.noise_norm;
            }
            let p = pilot_anm(&inst.sim.y_observed, &inst.op, &hs, &opts)?;
            let found = p.recovery.coords.iter().cloned().zip(p.amplitudes.iter().cloned()).collect();
            Ok(known_h_outcome(inst, &p.h_ref, found, Some(SolverStats::from(&p.recovery))))
        }
        Estimator::L1 => {
            let r = l1_grid(&inst.sim.y_observed, &inst.op, &hs, inst.noise_norm, &s.l1)?;
            let found = r
                .coefficients
                .iter()
                .zip(&r.grid_coords)
                .filter(|(c, _)| c.norm() > 0.0)
                .map(|(c, x)| (*x, *c))
                .collect();
            Ok(known_h_outcome(inst, &r.h_ref, found, None))
        }
    }
}

/// Runs one trial. Failures are recorded in the result, never returned.
pub fn run_trial(settings: &TrialSettings, seed: u64, cell: usize, trial: usize) -> TrialResult {
    let start = Instant::now();
    let mut res = TrialResult {
        cell,
        trial,
        seed,
        settings: settings.clone(),
        nmse: f64::NAN,
        ser: None,
        lifted_error: f64::NAN,
        success: false,
        runtime_s: 0.0,
        solver: None,
        truth: Vec::new(),
        estimates: Vec::new(),
        jammer_psi: Vec::new(),
        error: None,
    };
    let run = || -> Result<(Instance, Outcome)> {
        let inst = generate(settings, seed)?;
        let out = outcome(&inst, settings)?;
        Ok((inst, out))
    };
    match run() {
        Ok((inst, out)) => {
            let est: Vec<([f64; 4], C64)> = out.estimates.iter().map(|e| (e.coords, e.amplitude)).collect();
            let coords: Vec<[f64; 4]> = est.iter().map(|e| e.0).collect();
            res.nmse = nmse(&inst.targets, &est, &inst.op).unwrap_or(f64::NAN);
            res.lifted_error = lifted_error(&inst.sim.u_true, &inst.op, &coords, &out.gains_for_u).unwrap_or(f64::NAN);
            res.success = res.lifted_error <= SUCCESS_TOL;
            res.ser = out.ser;
            res.solver = out.solver;
            res.truth = inst.targets;
            res.estimates = out.estimates;
            res.jammer_psi = out.jammer_psi;
        }
        Err(e) => res.error = Some(e.to_string()),
    }
    res.runtime_s = start.elapsed().as_secs_f64();
    res
}

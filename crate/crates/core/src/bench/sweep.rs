//! Cartesian sweeps over scene axes with per-trial derived seeds.

use super::{run_trial, TrialResult, TrialSettings};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sweep axes. An empty axis keeps the base value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: TrialSettings,
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub n_targets: Vec<usize>,
    #[serde(default)]
    pub subspace_dim: Vec<usize>,
    #[serde(default)]
    pub half_len: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    pub workers: usize,
}

/// One point of the sweep grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub snr_db: Option<f64>,
    pub n_targets: usize,
    pub subspace_dim: usize,
    pub half_len: usize,
}

fn axis<T: Clone>(v: &[T], base: T) -> Vec<T> {
    if v.is_empty() {
        vec![base]
    } else {
        v.to_vec()
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("a sweep needs at least one trial per cell".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidArgument("snr_db axis contains NaN".into()));
        }
        for c in self.cells() {
            self.settings_for(&c).scene.validate()?;
        }
        Ok(())
    }

    /// Row-major over (snr, K, T, N).
    pub fn cells(&self) -> Vec<Cell> {
        let b = &self.base.scene;
        let snrs: Vec<Option<f64>> = if self.snr_db.is_empty() {
            vec![self.base.snr_db]
        } else {
            self.snr_db.iter().map(|&s| Some(s)).collect()
        };
        let mut out = Vec::new();
        for s in &snrs {
            for &k in &axis(&self.n_targets, b.n_targets) {
                for &t in &axis(&self.subspace_dim, b.subspace_dim) {
                    for &n in &axis(&self.half_len, b.half_len) {
                        out.push(Cell {
                            index: out.len(),
                            snr_db: *s,
                            n_targets: k,
                            subspace_dim: t,
                            half_len: n,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn settings_for(&self, cell: &Cell) -> TrialSettings {
        let mut s = self.base.clone();
        s.snr_db = cell.snr_db;
        s.scene.n_targets = cell.n_targets;
        s.scene.subspace_dim = cell.subspace_dim;
        s.scene.half_len = cell.half_len;
        s
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in cell `cell`.
pub fn trial_seed(master: u64, cell: usize, trial: usize) -> u64 {
    splitmix(splitmix(splitmix(master) ^ cell as u64) ^ trial as u64)
}

/// Runs all trials of one cell, `workers` at a time. Results are in trial
/// order regardless of scheduling.
pub fn run_cell(spec: &SweepSpec, cell: &Cell) -> Result<Vec<TrialResult>> {
    let settings = spec.settings_for(cell);
    let job = |t: usize| run_trial(&settings, trial_seed(spec.master_seed, cell.index, t), cell.index, t);
    if spec.workers <= 1 {
        return Ok((0..spec.trials).map(job).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(pool.install(|| (0..spec.trials).into_par_iter().map(job).collect()))
}

/// Aggregates over one cell. Failed trials are excluded from the means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub estimator: String,
    pub n_trials: usize,
    pub n_failed: usize,
    pub mean_nmse: f64,
    pub mean_ser: Option<f64>,
    pub success_rate: f64,
    pub mean_runtime_s: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl CellSummary {
    pub fn new(cell: &Cell, trials: &[TrialResult]) -> Self {
        let ok: Vec<&TrialResult> = trials.iter().filter(|t| t.error.is_none()).collect();
        let sers: Vec<f64> = ok.iter().filter_map(|t| t.ser).collect();
        CellSummary {
            cell: cell.clone(),
            estimator: trials
                .first()
                .map_or_else(String::new, |t| t.settings.estimator.name().to_string()),
            n_trials: trials.len(),
            n_failed: trials.len() - ok.len(),
            mean_nmse: mean(ok.iter().map(|t| t.nmse)),
            mean_ser: if sers.is_empty() { None } else { Some(mean(sers.into_iter())) },
            success_rate: if trials.is_empty() {
                f64::NAN
            } else {
                trials.iter().filter(|t| t.success).count() as f64 / trials.len() as f64
            },
            mean_runtime_s: mean(trials.iter().map(|t| t.runtime_s)),
        }
    }

    /// `(statistic, value)` pairs, one CSV row each. Runtime is left out so
    /// the table is reproducible byte for byte.
    pub fn statistics(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![
            ("nmse", self.mean_nmse),
            ("success_rate", self.success_rate),
            ("failed_trials", self.n_failed as f64),
        ];
        if let Some(s) = self.mean_ser {
            v.push(("ser", s));
        }
        v
    }
}

/// Runs every cell in order.
pub fn run_sweep(spec: &SweepSpec) -> Result<(Vec<CellSummary>, Vec<TrialResult>)> {
    spec.validate()?;
    let mut summaries = Vec::new();
    let mut all = Vec::new();
    for cell in spec.cells() {
        let trials = run_cell(spec, &cell)?;
        summaries.push(CellSummary::new(&cell, &trials));
        all.extend(trials);
    }
    Ok((summaries, all))
}

//! Result files: `results.csv`, `trials.json`, `grids/*.csv` and instance JSON.

use lanm_core::bench::{CellSummary, Instance, TrialResult, TrialSettings};
use lanm_core::localize::DualPolynomial;
use lanm_core::model::{build_operator, CodingMatrix, JammerParams, Simulation, SymbolVector, TargetParams};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

pub type Res<T> = Result<T, String>;

fn io<E: std::fmt::Display>(p: &Path) -> impl Fn(E) -> String + '_ {
    move |e| format!("{}: {e}", p.display())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Res<()> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(io(d))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(io(path))?;
    fs::write(path, text).map_err(io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Res<T> {
    let text = fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(io(path))
}

/// A simulated scene, enough to rebuild the operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub seed: u64,
    pub settings: TrialSettings,
    pub codings: Vec<CodingMatrix>,
    pub targets: Vec<TargetParams>,
    pub symbols: Vec<SymbolVector>,
    pub jammers: Vec<JammerParams>,
    pub simulation: Simulation,
    pub noise_norm: f64,
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance, settings: &TrialSettings, seed: u64) -> Self {
        InstanceFile {
            schema_version: SCHEMA_VERSION,
            seed,
            settings: settings.clone(),
            codings: inst.codings.clone(),
            targets: inst.targets.clone(),
            symbols: inst.symbols.clone(),
            jammers: inst.jammers.clone(),
            simulation: inst.sim.clone(),
            noise_norm: inst.noise_norm,
        }
    }

    pub fn into_instance(self) -> Res<(Instance, TrialSettings, u64)> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported instance schema {}", self.schema_version));
        }
        let op = build_operator(&self.settings.scene, &self.codings, self.settings.flavor).map_err(|e| e.to_string())?;
        Ok((
            Instance {
                op,
                codings: self.codings,
                targets: self.targets,
                symbols: self.symbols,
                jammers: self.jammers,
                sim: self.simulation,
                noise_norm: self.noise_norm,
            },
            self.settings,
            self.seed,
        ))
    }
}

/// Trial records with run metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialsFile {
    pub schema_version: u32,
    pub master_seed: u64,
    pub written_unix_s: u64,
    pub trials: Vec<TrialResult>,
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub const RESULTS_HEADER: [&str; 10] = [
    "schema_version",
    "cell",
    "estimator",
    "snr_db",
    "n_targets",
    "subspace_dim",
    "half_len",
    "statistic",
    "value",
    "n_trials",
];

/// One row per cell per statistic. Noiseless cells leave `snr_db` empty.
pub fn write_results_csv(path: &Path, cells: &[CellSummary]) -> Res<()> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(io(d))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(io(path))?;
    w.write_record(RESULTS_HEADER).map_err(io(path))?;
    for c in cells {
        for (name, value) in c.statistics() {
            w.write_record([
                SCHEMA_VERSION.to_string(),
                c.cell.index.to_string(),
                c.estimator.clone(),
                c.cell.snr_db.map_or_else(String::new, |s| s.to_string()),
                c.cell.n_targets.to_string(),
                c.cell.subspace_dim.to_string(),
                c.cell.half_len.to_string(),
                name.to_string(),
                value.to_string(),
                c.n_trials.to_string(),
            ])
            .map_err(io(path))?;
        }
    }
    w.flush().map_err(io(path))
}

/// 2-D slice of `‖f‖₂` through `center`, varying axes `a` and `b` over
/// `res` points each. Columns: `x,y,value` plus a schema column.
pub fn write_slice_csv(
    path: &Path,
    poly: &DualPolynomial,
    center: [f64; 4],
    axes: (usize, usize),
    res: usize,
) -> Res<()> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(io(d))?;
    }
    let span = |k: usize| if k == 3 { 1.0 / poly.n_tx as f64 } else { 1.0 };
    let mut w = csv::Writer::from_path(path).map_err(io(path))?;
    let names = ["tau", "dopp", "aod", "aoa"];
    w.write_record(["schema_version", names[axes.0], names[axes.1], "value"])
        .map_err(io(path))?;
    for i in 0..res {
        for j in 0..res {
            let mut c = center;
            c[axes.0] = span(axes.0) * i as f64 / res as f64;
            c[axes.1] = span(axes.1) * j as f64 / res as f64;
            w.write_record([
                SCHEMA_VERSION.to_string(),
                c[axes.0].to_string(),
                c[axes.1].to_string(),
                poly.norm_at(c).to_string(),
            ])
            .map_err(io(path))?;
        }
    }
    w.flush().map_err(io(path))
}

/// `psi,value` samples of the jammer polynomial with the `λ` level.
pub fn write_jammer_csv(path: &Path, values: &[f64], lambda: f64) -> Res<()> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d).map_err(io(d))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(io(path))?;
    w.write_record(["schema_version", "psi", "value", "lambda"]).map_err(io(path))?;
    let n = values.len();
    for (k, v) in values.iter().enumerate() {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            (k as f64 / n as f64).to_string(),
            v.to_string(),
            lambda.to_string(),
        ])
        .map_err(io(path))?;
    }
    w.flush().map_err(io(path))
}

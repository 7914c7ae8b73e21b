//! TOML scene and sweep configuration.

use lanm_core::baselines::L1Options;
use lanm_core::bench::{Estimator, RecoverOptions, SweepSpec, TrialSettings};
use lanm_core::model::{Constellation, Flavor, SceneConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Top-level keys of a config file. Every key is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_tx: Option<usize>,
    pub n_rx: Option<usize>,
    pub half_len: Option<usize>,
    pub subspace_dim: Option<usize>,
    pub n_targets: Option<usize>,
    pub n_jammers: Option<usize>,
    pub snr_db: Option<f64>,
    pub constellation: Option<Constellation>,
    pub flavor: Option<Flavor>,
    pub seed: Option<u64>,
    pub target_separation: Option<f64>,
    pub jammer_power: Option<f64>,
    pub lambda: Option<f64>,
    pub estimator: Option<Estimator>,
    pub l1_grid_res: Option<usize>,
    pub sweep: Option<SweepAxes>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub n_targets: Vec<usize>,
    #[serde(default)]
    pub subspace_dim: Vec<usize>,
    #[serde(default)]
    pub half_len: Vec<usize>,
    pub trials: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Defaults: Nt=Nr=2, N=2, T=1, one target, no jammer, noiseless 4-QAM.
    pub fn settings(&self) -> TrialSettings {
        let scene = SceneConfig {
            n_tx: self.n_tx.unwrap_or(2),
            n_rx: self.n_rx.unwrap_or(2),
            half_len: self.half_len.unwrap_or(2),
            subspace_dim: self.subspace_dim.unwrap_or(1),
            n_targets: self.n_targets.unwrap_or(1),
            n_jammers: self.n_jammers.unwrap_or(0),
            rng_seed: self.seed(),
        };
        let mut s = TrialSettings::new(scene);
        if let Some(f) = self.flavor {
            s.flavor = f;
        }
        if let Some(c) = self.constellation {
            s.constellation = c;
        }
        s.snr_db = self.snr_db;
        if let Some(d) = self.target_separation {
            s.target_separation = d;
        }
        if let Some(p) = self.jammer_power {
            s.jammer_power = p;
        }
        if let Some(e) = self.estimator {
            s.estimator = e;
        }
        s.recover = RecoverOptions {
            lambda: self.lambda,
            ..RecoverOptions::default()
        };
        if let Some(r) = self.l1_grid_res {
            s.l1 = L1Options {
                res: [r; 4],
                ..L1Options::default()
            };
        }
        s
    }

    pub fn sweep(&self, settings: TrialSettings, workers: usize) -> SweepSpec {
        let ax = self.sweep.clone().unwrap_or_default();
        SweepSpec {
            base: settings,
            snr_db: ax.snr_db,
            n_targets: ax.n_targets,
            subspace_dim: ax.subspace_dim,
            half_len: ax.half_len,
            trials: ax.trials.unwrap_or(1),
            master_seed: self.seed(),
            workers,
        }
    }
}

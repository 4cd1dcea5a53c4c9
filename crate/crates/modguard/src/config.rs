//! Experiment configuration: one TOML file drives the whole pipeline.
//!
//! Every random choice flows from the single `seed` through named
//! sub-streams, and artifacts embed the SHA-256 hash of the canonical TOML
//! serialization, so identical configs are byte-identifiable in outputs.

use modguard_core::signal::{Modulation, SignalError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker cap for per-frame attack evaluation; 1 = fully serial.
    pub threads: usize,
    pub dataset: DatasetCfg,
    pub train: TrainCfg,
    pub cat: CatCfg,
    pub lsgna: LsgnaCfg,
    pub at: AtCfg,
    pub svm: SvmCfg,
    pub ae: AeCfg,
    pub attack: AttackCfg,
    pub eval: EvalCfg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetCfg {
    /// Modulation names; empty means all eleven classes.
    pub classes: Vec<String>,
    pub snr_grid_db: Vec<f64>,
    pub frames_per_cell: usize,
    pub frame_len: usize,
    pub split_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCfg {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub inner_steps: usize,
    pub inner_step_frac: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatCfg {
    /// Budget increment per visit.
    pub eta: f64,
    /// Label-smoothing weight α_i = c·ε_i.
    pub c: f64,
    /// Budget cap; `None` derives 0.5 × the median clean-frame l2 norm.
    pub eps_max: Option<f64>,
    /// Epoch override; per-sample updates are slower than batched ones.
    pub epochs: Option<usize>,
    /// Learning-rate override for the per-sample updates.
    pub lr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsgnaCfg {
    /// Noise standard deviation; `None` derives 0.05 × the RMS amplitude of
    /// clean frames.
    pub sigma: Option<f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtCfg {
    /// The fixed training radius is the median per-frame budget at this PNR.
    pub pnr_db: f64,
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmCfg {
    pub gamma: f64,
    pub c: f64,
    pub reject_rate: f64,
    /// Stratified cap on SVM training features per class; keeps the Gram
    /// matrix and the SMO solve desk-sized.
    pub max_train_per_class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AeCfg {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub reject_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackCfg {
    pub iters: usize,
    pub step_frac: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalCfg {
    pub pnr_grid_db: Vec<f64>,
    /// Frames attacked per grid point; clean accuracy uses the whole test
    /// split at `snr_db`.
    pub n_frames: usize,
    pub snr_db: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            threads: 1,
            dataset: DatasetCfg::default(),
            train: TrainCfg::default(),
            cat: CatCfg::default(),
            lsgna: LsgnaCfg::default(),
            at: AtCfg::default(),
            svm: SvmCfg::default(),
            ae: AeCfg::default(),
            attack: AttackCfg::default(),
            eval: EvalCfg::default(),
        }
    }
}

impl Default for DatasetCfg {
    fn default() -> Self {
        Self {
            classes: Vec::new(),
            snr_grid_db: vec![10.0],
            frames_per_cell: 200,
            frame_len: 128,
            split_ratio: 0.5,
        }
    }
}

impl Default for TrainCfg {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            lr: 0.01,
            momentum: 0.9,
            inner_steps: 10,
            inner_step_frac: 0.1,
        }
    }
}

impl Default for CatCfg {
    fn default() -> Self {
        Self { eta: 0.01, c: 1.0, eps_max: None, epochs: None, lr: None }
    }
}

impl Default for LsgnaCfg {
    fn default() -> Self {
        Self { sigma: None, alpha: 0.1 }
    }
}

impl Default for AtCfg {
    fn default() -> Self {
        Self { pnr_db: -10.0, epochs: None }
    }
}

impl Default for SvmCfg {
    fn default() -> Self {
        Self { gamma: 0.01, c: 1.0, reject_rate: 0.10, max_train_per_class: 150 }
    }
}

impl Default for AeCfg {
    fn default() -> Self {
        Self { epochs: 40, batch_size: 64, lr: 0.05, momentum: 0.9, reject_rate: 0.10 }
    }
}

impl Default for AttackCfg {
    fn default() -> Self {
        Self { iters: 50, step_frac: 0.1, tol: 1e-5 }
    }
}

impl Default for EvalCfg {
    fn default() -> Self {
        Self {
            pnr_grid_db: vec![-20.0, -15.0, -10.0, -5.0, 0.0],
            n_frames: 200,
            snr_db: 10.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML serialization, hex-encoded.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    pub fn resolve_classes(&self) -> Result<Vec<Modulation>, SignalError> {
        if self.dataset.classes.is_empty() {
            return Ok(Modulation::ALL.to_vec());
        }
        self.dataset.classes.iter().map(|n| Modulation::from_name(n)).collect()
    }
}

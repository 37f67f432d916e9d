//! Experiment configuration file (TOML) and the run manifest.
//!
//! Unknown keys are rejected. The config hash is the SHA-256 of the
//! canonical JSON serialization of the parsed config, so it changes exactly
//! when a field changes.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::flow::{CouplingStrategy, TrainConfig};
use crate::metrics::{Bandwidth, EvalConfig, MmdConfig};
use crate::ode::SolverSpec;
use crate::prior::MapperConfig;
use crate::toy::{ToySpec, ToyVariant};
use crate::Error;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_out_dir() -> String {
    "runs/out".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: String,
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_radius")]
    pub radius: f64,
    #[serde(default = "d_prior_std")]
    pub prior_std: f64,
    #[serde(default = "d_square_side")]
    pub square_side: f64,
    #[serde(default = "d_k")]
    pub k_train: usize,
    #[serde(default = "d_noise_std")]
    pub noise_std: f64,
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default = "d_n_per_class")]
    pub n_per_class: usize,
    /// Classes held out of training entirely (ring toy).
    #[serde(default)]
    pub holdout: Vec<String>,
}

fn d_k() -> usize {
    8
}
fn d_radius() -> f64 {
    5.0
}
fn d_prior_std() -> f64 {
    0.2
}
fn d_square_side() -> f64 {
    0.2
}
fn d_noise_std() -> f64 {
    0.1
}
fn d_n_per_class() -> usize {
    1000
}

impl DatasetSection {
    pub fn toy_spec(&self, seed: u64) -> Result<ToySpec, Error> {
        let variant = match self.kind.as_str() {
            "ring" => ToyVariant::Ring {
                k: self.k,
                radius: self.radius,
                prior_std: self.prior_std,
                square_side: self.square_side,
            },
            "vlines" => ToyVariant::Vlines {
                csv: self.csv.clone().ok_or_else(|| {
                    Error::Domain("dataset.kind = \"vlines\" requires dataset.csv".into())
                })?,
            },
            "angle" => ToyVariant::Angle {
                k_train: self.k_train,
                radius: self.radius,
                noise_std: self.noise_std,
            },
            other => {
                return Err(Error::Domain(format!(
                    "unknown dataset kind '{other}' (expected ring | vlines | angle)"
                )))
            }
        };
        Ok(ToySpec {
            variant,
            n_per_class: self.n_per_class,
            seed,
        })
    }

    pub fn holdout_set(&self) -> BTreeSet<String> {
        self.holdout.iter().cloned().collect()
    }

    pub fn is_angle(&self) -> bool {
        self.kind == "angle"
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    #[serde(default = "d_mode")]
    pub mode: String,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_prior_path")]
    pub path: String,
    #[serde(default = "d_mapper_hidden")]
    pub mapper_hidden: usize,
    #[serde(default = "d_mapper_steps")]
    pub mapper_steps: usize,
    #[serde(default = "d_mapper_batch")]
    pub mapper_batch: usize,
    #[serde(default = "d_mapper_lr")]
    pub mapper_lr: f64,
}

fn d_mode() -> String {
    "discrete".into()
}
fn d_sigma() -> f64 {
    crate::prior::DEFAULT_SIGMA
}
fn d_prior_path() -> String {
    "prior.json".into()
}
fn d_mapper_hidden() -> usize {
    64
}
fn d_mapper_steps() -> usize {
    3000
}
fn d_mapper_batch() -> usize {
    128
}
fn d_mapper_lr() -> f64 {
    1e-3
}

impl Default for PriorSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl PriorSection {
    pub fn mapper_config(&self, seed: u64) -> MapperConfig {
        MapperConfig {
            hidden_width: self.mapper_hidden,
            steps: self.mapper_steps,
            batch_size: self.mapper_batch,
            learning_rate: self.mapper_lr,
            seed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_sigma_min")]
    pub sigma_min: f64,
    #[serde(default = "d_strategy")]
    pub strategy: String,
    #[serde(default = "d_hidden_width")]
    pub hidden_width: usize,
    #[serde(default = "d_hidden_depth")]
    pub hidden_depth: usize,
    #[serde(default = "d_checkpoint")]
    pub checkpoint: String,
}

fn d_epochs() -> usize {
    20
}
fn d_batch_size() -> usize {
    256
}
fn d_lr() -> f64 {
    1e-3
}
fn d_sigma_min() -> f64 {
    1e-2
}
fn d_strategy() -> String {
    "cpd".into()
}
fn d_hidden_width() -> usize {
    256
}
fn d_hidden_depth() -> usize {
    4
}
fn d_checkpoint() -> String {
    "model.json".into()
}

impl Default for TrainingSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl TrainingSection {
    pub fn strategy(&self) -> Result<CouplingStrategy, Error> {
        self.strategy.parse()
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, Error> {
        Ok(TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            sigma_min: self.sigma_min,
            seed,
            strategy: self.strategy()?,
            hidden_width: self.hidden_width,
            hidden_depth: self.hidden_depth,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "d_solver_kind")]
    pub kind: String,
    #[serde(default = "d_n_steps")]
    pub n_steps: usize,
    #[serde(default = "d_tol")]
    pub atol: f64,
    #[serde(default = "d_tol")]
    pub rtol: f64,
    #[serde(default = "d_h_init")]
    pub h_init: f64,
    #[serde(default = "d_max_steps")]
    pub max_steps: usize,
}

fn d_solver_kind() -> String {
    "euler".into()
}
fn d_n_steps() -> usize {
    8
}
fn d_tol() -> f64 {
    1e-5
}
fn d_h_init() -> f64 {
    0.05
}
fn d_max_steps() -> usize {
    100_000
}

impl Default for SolverSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl SolverSection {
    pub fn spec(&self) -> Result<SolverSpec, Error> {
        match self.kind.as_str() {
            "euler" => Ok(SolverSpec::Euler { n_steps: self.n_steps }),
            "rk4" => Ok(SolverSpec::Rk4 { n_steps: self.n_steps }),
            "dopri5" => Ok(SolverSpec::Dopri5 {
                atol: self.atol,
                rtol: self.rtol,
                h_init: self.h_init,
                max_steps: self.max_steps,
            }),
            other => Err(Error::Domain(format!(
                "unknown solver kind '{other}' (expected euler | rk4 | dopri5)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "d_n_per_condition")]
    pub n_per_condition: usize,
    /// "median" or a positive number.
    #[serde(default = "d_bandwidth")]
    pub bandwidth: toml::Value,
    #[serde(default)]
    pub use_test_split: bool,
    #[serde(default)]
    pub record_trajectories: bool,
}

fn d_n_per_condition() -> usize {
    200
}
fn d_bandwidth() -> toml::Value {
    toml::Value::String("median".into())
}

impl Default for EvalSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl EvalSection {
    pub fn mmd_config(&self) -> Result<MmdConfig, Error> {
        let bandwidth = match &self.bandwidth {
            toml::Value::String(s) if s == "median" => Bandwidth::Median,
            toml::Value::Float(f) if *f > 0.0 => Bandwidth::Fixed(*f),
            toml::Value::Integer(i) if *i > 0 => Bandwidth::Fixed(*i as f64),
            other => {
                return Err(Error::Domain(format!(
                    "eval.bandwidth must be \"median\" or a positive number, got {other}"
                )))
            }
        };
        Ok(MmdConfig { bandwidth })
    }

    pub fn eval_config(&self) -> Result<EvalConfig, Error> {
        Ok(EvalConfig {
            n_per_condition: self.n_per_condition,
            mmd: self.mmd_config()?,
            record_trajectories: self.record_trajectories,
        })
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        toml::from_str(&text).map_err(|e| Error::Format {
            path: path.display().to_string(),
            row: 0,
            detail: e.to_string(),
        })
    }

    /// SHA-256 over the canonical JSON form of the parsed config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        format!("{digest:x}")
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        Path::new(&self.out_dir).join(name)
    }
}

/// Record of one command run, written atomically at the end.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
    pub started: String,
    pub finished: String,
    pub produced_files: Vec<String>,
    pub version: String,
}

impl RunManifest {
    pub fn write(
        out_dir: &Path,
        command: &str,
        config_hash: &str,
        seed: u64,
        started: chrono::DateTime<chrono::Utc>,
        files: &[PathBuf],
    ) -> Result<(), Error> {
        let manifest = RunManifest {
            config_hash: config_hash.to_string(),
            seed,
            command: command.to_string(),
            started: started.to_rfc3339(),
            finished: chrono::Utc::now().to_rfc3339(),
            produced_files: files
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let path = out_dir.join(format!("manifest-{command}.json"));
        let tmp = out_dir.join(format!(".manifest-{command}.json.tmp"));
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Numerical(format!("manifest encode: {e}")))?;
        std::fs::write(&tmp, text).map_err(|e| Error::io(tmp.display().to_string(), e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }
}

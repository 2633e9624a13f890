//! Experiment configuration and derived seeds.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::many_body::{ModelVariant, SpinChainModel, DEFAULT_MAX_SPINS};
use crate::trainer::TrainConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    ModelI,
    ModelII,
    /// Trajectories generated by a stored generator model.
    #[serde(rename = "synthetic")]
    Synthetic,
}

fn one() -> f64 {
    1.0
}
fn default_n() -> usize {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: ModelKind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default = "one")]
    pub v: f64,
    #[serde(default)]
    pub v_prime: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    /// Learned-model file defining a synthetic source.
    #[serde(default)]
    pub generator_file: Option<PathBuf>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: ModelKind::ModelI,
            n: default_n(),
            omega: 1.0,
            v: 1.0,
            v_prime: 0.1,
            alpha: 0.0,
            beta: 0.0,
            generator_file: None,
        }
    }
}

impl ModelConfig {
    pub fn spin_chain(&self) -> Result<SpinChainModel> {
        match self.variant {
            ModelKind::ModelI => SpinChainModel::model_i(self.n, self.omega, self.v, self.v_prime, self.beta),
            ModelKind::ModelII => SpinChainModel::model_ii(self.n, self.omega, self.v, self.alpha, self.beta),
            ModelKind::Synthetic => Err(Error::invalid("synthetic source is not a spin chain")),
        }
    }

    /// Sets a scan axis by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "beta" => self.beta = value,
            "v_prime" | "V_prime" => self.v_prime = value,
            "v" | "V" => self.v = value,
            "alpha" => self.alpha = value,
            "omega" => self.omega = value,
            "n" | "N" => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::invalid(format!("chain length {value} is not an integer")));
                }
                self.n = value as usize
            }
            other => return Err(Error::invalid(format!("unknown scan axis `{other}`"))),
        }
        Ok(())
    }
}

impl From<&SpinChainModel> for ModelConfig {
    fn from(m: &SpinChainModel) -> Self {
        ModelConfig {
            variant: match m.variant {
                ModelVariant::ModelI => ModelKind::ModelI,
                ModelVariant::ModelII => ModelKind::ModelII,
            },
            n: m.n,
            omega: m.omega,
            v: m.v,
            v_prime: m.v_prime,
            alpha: m.alpha,
            beta: m.beta,
            generator_file: None,
        }
    }
}

fn default_dt() -> f64 {
    0.01
}
fn default_t_train() -> f64 {
    10.0
}
fn default_t_extrap() -> f64 {
    20.0
}
fn default_n_traj() -> usize {
    50
}
fn default_n_eval() -> usize {
    10
}
fn default_max_spins() -> usize {
    DEFAULT_MAX_SPINS
}

/// Times are in units of `1/Ω` when `Ω = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_train")]
    pub t_train: f64,
    #[serde(default = "default_t_extrap")]
    pub t_extrapolate: f64,
    #[serde(default = "default_n_traj")]
    pub n_trajectories: usize,
    #[serde(default = "default_n_eval")]
    pub n_eval_trajectories: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_spins")]
    pub max_spins: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: default_dt(),
            t_train: default_t_train(),
            t_extrapolate: default_t_extrap(),
            n_trajectories: default_n_traj(),
            n_eval_trajectories: default_n_eval(),
            seed: 0,
            max_spins: default_max_spins(),
        }
    }
}

fn steps_for(t: f64, dt: f64, what: &str) -> Result<usize> {
    let k = (t / dt).round();
    if (k * dt - t).abs() > 1e-12 * t.abs().max(1.0) || k < 1.0 {
        return Err(Error::invalid(format!("dt = {dt} does not divide {what} = {t}")));
    }
    Ok(k as usize)
}

impl SimulationConfig {
    pub fn train_steps(&self) -> Result<usize> {
        steps_for(self.t_train, self.dt, "t_train")
    }

    pub fn total_steps(&self) -> Result<usize> {
        steps_for(self.t_extrapolate, self.dt, "t_extrapolate")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        let a = self.train_steps()?;
        let b = self.total_steps()?;
        if b < a {
            return Err(Error::invalid("t_extrapolate must not be shorter than t_train"));
        }
        if self.n_trajectories == 0 {
            return Err(Error::invalid("need at least one training trajectory"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanAxis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub axis1: ScanAxis,
    pub axis2: ScanAxis,
}

fn default_a() -> f64 {
    5.0
}
fn default_b() -> f64 {
    10.0
}
fn default_window_samples() -> usize {
    4000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_n_eval")]
    pub n_initial_conditions: usize,
    /// Samples of the exact state across `[aτ, bτ]`.
    #[serde(default = "default_window_samples")]
    pub window_samples: usize,
    /// Skip the stationary analysis during `eval` and `scan`.
    #[serde(default)]
    pub skip_stationary: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            a: default_a(),
            b: default_b(),
            n_initial_conditions: default_n_eval(),
            window_samples: default_window_samples(),
            skip_stationary: false,
        }
    }
}

fn p_data() -> PathBuf {
    "data".into()
}
fn p_model() -> PathBuf {
    "models".into()
}
fn p_report() -> PathBuf {
    "reports".into()
}

/// Directories relative to the output root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    #[serde(default = "p_data")]
    pub data_dir: PathBuf,
    #[serde(default = "p_model")]
    pub model_dir: PathBuf,
    #[serde(default = "p_report")]
    pub report_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig { data_dir: p_data(), model_dir: p_model(), report_dir: p_report() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub paths: PathsConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
        // Relative generator paths are taken relative to the config file.
        if let (Some(g), Some(dir)) = (cfg.model.generator_file.as_mut(), path.parent()) {
            if g.is_relative() {
                *g = dir.join(&*g);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Uses one seed for simulation and training.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.simulation.seed = seed;
        self.training.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        self.training.validate()?;
        if self.model.variant != ModelKind::Synthetic {
            let m = self.model.spin_chain()?;
            if m.n > self.simulation.max_spins {
                return Err(Error::Capacity { n: m.n, max: self.simulation.max_spins });
            }
        } else if self.model.generator_file.is_none() {
            return Err(Error::invalid("synthetic source needs model.generator_file"));
        }
        if let Some(scan) = &self.scan {
            if scan.axis1.values.is_empty() || scan.axis2.values.is_empty() {
                return Err(Error::invalid("scan axes need at least one value"));
            }
        }
        if !(self.metrics.b > self.metrics.a && self.metrics.a >= 0.0) {
            return Err(Error::invalid("metrics window needs 0 ≤ a < b"));
        }
        if self.metrics.window_samples < 2 {
            return Err(Error::invalid("metrics.window_samples must be at least 2"));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `k`-th trajectory of a run.
pub fn trajectory_seed(base: u64, k: usize) -> u64 {
    splitmix64(base ^ splitmix64(k as u64 + 1))
}

/// `base ⊕ hash(axis values)`; depends only on the cell's own coordinates.
pub fn cell_seed(base: u64, a1: f64, a2: f64) -> u64 {
    base ^ splitmix64(a1.to_bits() ^ splitmix64(a2.to_bits()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!(c.simulation.train_steps().unwrap(), 1000);
        assert_eq!(c.simulation.total_steps().unwrap(), 2000);
        assert_eq!(c.simulation.n_trajectories + c.simulation.n_eval_trajectories, 60);
        assert_eq!(c.training.batch_size, 256);
        assert_eq!((c.metrics.a, c.metrics.b), (5.0, 10.0));
        c.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        let sparse: ExperimentConfig = serde_json::from_str(r#"{"model": {"variant": "ModelII", "n": 6}}"#).unwrap();
        assert_eq!(sparse.model.v, 1.0);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"modle": {}}"#).is_err());
    }

    #[test]
    fn grid_divisibility_and_capacity() {
        let mut c = ExperimentConfig::default();
        c.simulation.dt = 0.03;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.model.n = 13;
        assert!(matches!(c.validate(), Err(Error::Capacity { n: 13, max: 12 })));
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        let s: Vec<u64> = (0..100).map(|k| trajectory_seed(7, k)).collect();
        let mut u = s.clone();
        u.sort();
        u.dedup();
        assert_eq!(u.len(), 100);
        assert_eq!(cell_seed(1, 0.5, 0.1), cell_seed(1, 0.5, 0.1));
        assert_ne!(cell_seed(1, 0.5, 0.1), cell_seed(1, 0.1, 0.5));
    }
}

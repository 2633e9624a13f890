//! Exact data sources: a spin chain or a stored generator.

use std::path::Path;

use super::config::{ExperimentConfig, ModelKind};
use crate::generator::{assemble_generator, expm, precompute_dissipator_tensors, predict, GeneratorMatrix, LearnedModel};
use crate::many_body::{seeded_initial_state_dim, ChainSimulator};
use crate::metrics::uniform_mean;
use crate::spin_algebra::{rho_to_coherence, BasisSet, DensityMatrix};
use crate::trajectory::{Provenance, Trajectory};
use crate::{Error, RMatrix, RVector, Result};

pub enum DataSource {
    Chain(Box<ChainSimulator>),
    Synthetic { label: String, basis: BasisSet, generator: GeneratorMatrix },
}

impl DataSource {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        match cfg.model.variant {
            ModelKind::Synthetic => {
                let path = cfg.model.generator_file.as_deref().ok_or_else(|| Error::invalid("synthetic source needs model.generator_file"))?;
                Self::from_model_file(path)
            }
            _ => {
                let model = cfg.model.spin_chain()?;
                Ok(DataSource::Chain(Box::new(ChainSimulator::with_max_spins(&model, cfg.simulation.max_spins)?)))
            }
        }
    }

    pub fn from_model_file(path: &Path) -> Result<Self> {
        let m = LearnedModel::load(path)?;
        let label = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::from_model(&m, label)
    }

    pub fn from_model(m: &LearnedModel, label: String) -> Result<Self> {
        let basis = m.basis()?;
        let generator = assemble_generator(&m.params()?, &basis, &precompute_dissipator_tensors(&basis))?;
        Ok(DataSource::Synthetic { label, basis, generator })
    }

    /// Hilbert dimension of the subsystem.
    pub fn dim(&self) -> usize {
        match self {
            DataSource::Chain(_) => 4,
            DataSource::Synthetic { basis, .. } => basis.dim(),
        }
    }

    pub fn basis(&self) -> &BasisSet {
        match self {
            DataSource::Chain(sim) => sim.basis(),
            DataSource::Synthetic { basis, .. } => basis,
        }
    }

    pub fn initial_state(&self, seed: u64) -> DensityMatrix {
        seeded_initial_state_dim(seed, self.dim())
    }

    pub fn trajectory(&self, seed: u64, dt: f64, n_steps: usize) -> Result<Trajectory> {
        match self {
            DataSource::Chain(sim) => sim.simulate_seeded(seed, dt, n_steps),
            DataSource::Synthetic { label, basis, generator } => {
                if !(dt > 0.0) {
                    return Err(Error::invalid(format!("time step must be positive, got {dt}")));
                }
                let v0 = rho_to_coherence(&self.initial_state(seed), basis)?;
                let m = expm(&(&generator.l * dt));
                let snaps = predict(&m, &v0, n_steps);
                Trajectory::new(Provenance::Generator { label: label.clone() }, basis.dim(), dt, snaps, seed)
            }
        }
    }

    /// Exact coherence vectors at `t0 + k·h` for `k < samples`.
    pub fn sample_uniform(&self, seed: u64, t0: f64, h: f64, samples: usize) -> Result<Vec<RVector>> {
        let rho = self.initial_state(seed);
        match self {
            DataSource::Chain(sim) => {
                let times: Vec<f64> = (0..samples).map(|k| t0 + k as f64 * h).collect();
                Ok(sim.reduced_at_times(&rho, &times)?.into_iter().map(|v| v.as_vector().clone()).collect())
            }
            DataSource::Synthetic { basis, generator, .. } => {
                let v0 = rho_to_coherence(&rho, basis)?;
                Ok(sample_generator(&generator.l, v0.as_vector(), t0, h, samples))
            }
        }
    }

    /// Trapezoidal average of the exact coherence vector over `[t0, t1]`
    /// from `samples` equally spaced evaluations.
    pub fn window_average(&self, seed: u64, t0: f64, t1: f64, samples: usize) -> Result<RVector> {
        if !(t1 > t0) || samples < 2 {
            return Err(Error::invalid("window needs t1 > t0 and two samples"));
        }
        let h = (t1 - t0) / (samples - 1) as f64;
        uniform_mean(&self.sample_uniform(seed, t0, h, samples)?)
    }
}

/// `exp((t0 + k h) L) v0` for `k < samples`.
pub fn sample_generator(l: &RMatrix, v0: &RVector, t0: f64, h: f64, samples: usize) -> Vec<RVector> {
    let step = expm(&(l * h));
    let mut v = expm(&(l * t0)) * v0;
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        out.push(v.clone());
        v = &step * &v;
    }
    out
}

//! Fitting `θ = (ω, X, Y)` to one-step transitions with Adam.
//!
//! The loss is `(1/B) Σ ‖M[θ] v_in − v_out‖²` with `M[θ] = exp(dt·L[θ])`.
//! Gradients are exact: they run backwards through the same Taylor
//! recurrence the forward pass uses.

mod checkpoint;

pub use checkpoint::{write_loss_curves, Checkpoint};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::generator::{assemble_generator, precompute_dissipator_tensors, DissipatorTensors, ExpmTape, GeneratorParams};
use crate::parallel::{self, Exec};
use crate::spin_algebra::{build_pauli_basis, BasisSet, CoherenceVector};
use crate::trajectory::Trajectory;
use crate::{Error, RMatrix, Result};

/// Pairs per parallel work item when accumulating residuals.
const PAIR_CHUNK: usize = 64;

/// Consecutive snapshots `(v(t), v(t + dt))` of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub v_in: CoherenceVector,
    pub v_out: CoherenceVector,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<TrainingPair>,
    pub validation: Vec<TrainingPair>,
    pub dt: f64,
    pub d: usize,
    pub train_seeds: Vec<u64>,
    pub validation_seeds: Vec<u64>,
}

impl Dataset {
    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    pub fn n_validation(&self) -> usize {
        self.validation.len()
    }
}

fn pairs_of(t: &Trajectory) -> impl Iterator<Item = TrainingPair> + '_ {
    t.snapshots().windows(2).map(|w| TrainingPair { v_in: w[0].clone(), v_out: w[1].clone() })
}

/// Splits whole trajectories into training and validation sets.
pub fn build_dataset<R: Rng + ?Sized>(trajectories: &[Trajectory], split_fraction: f64, rng: &mut R) -> Result<Dataset> {
    let first = trajectories.first().ok_or_else(|| Error::invalid("no trajectories"))?;
    if !(split_fraction > 0.0 && split_fraction <= 1.0) {
        return Err(Error::invalid(format!("split fraction must lie in (0, 1], got {split_fraction}")));
    }
    let (dt, d) = (first.dt(), first.d());
    for t in trajectories {
        if (t.dt() - dt).abs() > 1e-12 * dt.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("time steps {} and {} differ", dt, t.dt())));
        }
        if t.d() != d {
            return Err(Error::invalid("trajectories have different subsystem dimensions"));
        }
        if t.len() < 2 {
            return Err(Error::invalid("a trajectory needs at least 2 snapshots"));
        }
    }
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    order.shuffle(rng);
    let n_train = ((split_fraction * trajectories.len() as f64).round() as usize).clamp(1, trajectories.len());
    let (tr, va) = order.split_at(n_train);
    let collect = |idx: &[usize]| -> Vec<TrainingPair> { idx.iter().flat_map(|&i| pairs_of(&trajectories[i])).collect() };
    Ok(Dataset {
        train: collect(tr),
        validation: collect(va),
        dt,
        d,
        train_seeds: tr.iter().map(|&i| trajectories[i].seed()).collect(),
        validation_seeds: va.iter().map(|&i| trajectories[i].seed()).collect(),
    })
}

/// Everything the loss needs besides `θ` and the data.
#[derive(Debug, Clone)]
pub struct Objective {
    basis: BasisSet,
    tensors: DissipatorTensors,
    dt: f64,
    exec: Exec,
}

impl Objective {
    pub fn new(num_spins: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        let basis = build_pauli_basis(num_spins)?;
        let tensors = precompute_dissipator_tensors(&basis);
        Ok(Objective { basis, tensors, dt, exec: Exec::default() })
    }

    pub fn for_dataset(dataset: &Dataset) -> Result<Self> {
        if !dataset.d.is_power_of_two() {
            return Err(Error::invalid("subsystem dimension is not a power of two"));
        }
        Self::new(dataset.d.trailing_zeros() as usize, dataset.dt)
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn tensors(&self) -> &DissipatorTensors {
        &self.tensors
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    fn tape(&self, params: &GeneratorParams) -> Result<ExpmTape> {
        let g = assemble_generator(params, &self.basis, &self.tensors)?;
        Ok(ExpmTape::new(&(&g.l * self.dt)))
    }

    /// `exp(dt·L[θ])`.
    pub fn propagator(&self, params: &GeneratorParams) -> Result<RMatrix> {
        Ok(self.tape(params)?.into_result())
    }

    /// Per-chunk `(Σ‖r‖², Σ r v_inᵀ)` in chunk order, with
    /// `r = (M − 𝟙)v_in + (v_in − v_out)`.
    fn residuals(&self, m_minus_id: &RMatrix, batch: &[TrainingPair], want_grad: bool) -> (f64, Option<RMatrix>) {
        let dim = m_minus_id.nrows();
        let parts = parallel::map_chunks(self.exec, batch, PAIR_CHUNK, |chunk| {
            let mut sq = 0.0;
            let mut g = if want_grad { Some(RMatrix::zeros(dim, dim)) } else { None };
            for p in chunk {
                let r = m_minus_id * p.v_in.as_vector() + (p.v_in.as_vector() - p.v_out.as_vector());
                sq += r.norm_squared();
                if let Some(g) = g.as_mut() {
                    g.ger(1.0, &r, p.v_in.as_vector(), 1.0);
                }
            }
            (sq, g)
        });
        let mut total = 0.0;
        let mut grad = if want_grad { Some(RMatrix::zeros(dim, dim)) } else { None };
        for (sq, g) in parts {
            total += sq;
            if let (Some(acc), Some(g)) = (grad.as_mut(), g) {
                *acc += g;
            }
        }
        (total, grad)
    }

    pub fn loss(&self, params: &GeneratorParams, batch: &[TrainingPair]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let tape = self.tape(params)?;
        Ok(self.residuals(tape.minus_identity(), batch, false).0 / batch.len() as f64)
    }

    /// Loss and its exact gradient with respect to `θ`.
    pub fn loss_and_gradient(&self, params: &GeneratorParams, batch: &[TrainingPair]) -> Result<(f64, GeneratorParams)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let tape = self.tape(params)?;
        let b = batch.len() as f64;
        let (sq, g) = self.residuals(tape.minus_identity(), batch, true);
        let grad_m = g.expect("gradient requested") * (2.0 / b);
        let grad_l = tape.backward(&grad_m) * self.dt;
        Ok((sq / b, self.tensors.pullback(params, &grad_l)))
    }
}

/// Mean squared one-step error.
pub fn loss(objective: &Objective, params: &GeneratorParams, batch: &[TrainingPair]) -> Result<f64> {
    objective.loss(params, batch)
}

/// Gradient of [`loss`].
pub fn gradient(objective: &Objective, params: &GeneratorParams, batch: &[TrainingPair]) -> Result<GeneratorParams> {
    Ok(objective.loss_and_gradient(params, batch)?.1)
}

fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_epochs() -> usize {
    20
}
fn default_batch() -> usize {
    256
}
fn default_batches() -> usize {
    512
}
fn default_trajectories() -> usize {
    50
}
fn default_init_scale() -> f64 {
    0.1
}
fn default_split() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_batches")]
    pub batches_per_epoch: usize,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of the initial `ω`, `X`, `Y` entries.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
            epochs: default_epochs(),
            batch_size: default_batch(),
            batches_per_epoch: default_batches(),
            n_trajectories: default_trajectories(),
            seed: 0,
            init_scale: default_init_scale(),
            split_fraction: default_split(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("learning_rate", self.learning_rate >= 0.0),
            ("beta1", (0.0..1.0).contains(&self.beta1)),
            ("beta2", (0.0..1.0).contains(&self.beta2)),
            ("epsilon", self.epsilon > 0.0),
            ("batch_size", self.batch_size > 0),
            ("batches_per_epoch", self.batches_per_epoch > 0),
            ("init_scale", self.init_scale >= 0.0),
            ("split_fraction", self.split_fraction > 0.0 && self.split_fraction <= 1.0),
        ];
        for (name, ok) in pos {
            if !ok {
                return Err(Error::invalid(format!("training option {name} is out of range")));
            }
        }
        Ok(())
    }
}

/// Adam moments over the flattened parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(state: &mut AdamState, params: &mut GeneratorParams, grads: &GeneratorParams, config: &TrainConfig) -> Result<()> {
    let g = grads.flatten();
    let mut p = params.flatten();
    if g.len() != p.len() || state.m.len() != p.len() {
        return Err(Error::ShapeMismatch { expected: format!("{} values", p.len()), got: g.len().to_string() });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for i in 0..p.len() {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g[i] * g[i];
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        p[i] -= config.learning_rate * mh / (vh.sqrt() + config.epsilon);
    }
    *params = GeneratorParams::from_flat(params.n(), &p)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: GeneratorParams,
    pub adam: AdamState,
    /// Full training-set loss before the first epoch.
    pub initial_train_loss: f64,
    /// Full training-set loss after each epoch.
    pub train_loss: Vec<f64>,
    /// Validation loss after each epoch; NaN when there is no validation set.
    pub val_loss: Vec<f64>,
    /// Parameters at up to five evenly spaced epochs.
    pub snapshots: Vec<(usize, GeneratorParams)>,
}

/// Initial parameters drawn from the config seed.
pub fn initial_params(config: &TrainConfig, n: usize) -> GeneratorParams {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    GeneratorParams::random(&mut rng, n, config.init_scale)
}

fn epoch_rng(seed: u64) -> ChaCha8Rng {
    // Keeps batch draws independent of the initialisation stream.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Trains from the seeded initialisation.
pub fn train(config: &TrainConfig, dataset: &Dataset, objective: &Objective) -> Result<TrainOutcome> {
    let init = initial_params(config, objective.basis().n_traceless());
    train_from(config, dataset, objective, init)
}

/// Trains from explicit starting parameters.
pub fn train_from(config: &TrainConfig, dataset: &Dataset, objective: &Objective, init: GeneratorParams) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if (dataset.dt - objective.dt()).abs() > 1e-12 * dataset.dt {
        return Err(Error::GridMismatch("objective and dataset time steps differ".into()));
    }
    let mut params = init;
    let mut adam = AdamState::new(params.len());
    let mut rng = epoch_rng(config.seed);
    let full = |p: &GeneratorParams, set: &[TrainingPair]| -> Result<f64> {
        if set.is_empty() {
            Ok(f64::NAN)
        } else {
            objective.loss(p, set)
        }
    };
    let initial_train_loss = full(&params, &dataset.train)?;
    let snapshot_epochs: Vec<usize> = if config.epochs == 0 {
        Vec::new()
    } else {
        let k = config.epochs.min(5);
        (1..=k).map(|i| (i * config.epochs).div_ceil(k)).collect()
    };
    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut val_loss = Vec::with_capacity(config.epochs);
    let mut snapshots = Vec::new();
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        for b in 0..config.batches_per_epoch {
            batch.clear();
            batch.extend((0..config.batch_size).map(|_| dataset.train[rng.random_range(0..dataset.train.len())].clone()));
            let (l, g) = objective.loss_and_gradient(&params, &batch)?;
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b, value: l });
            }
            adam_step(&mut adam, &mut params, &g, config)?;
        }
        let tl = full(&params, &dataset.train)?;
        if !tl.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: config.batches_per_epoch, value: tl });
        }
        train_loss.push(tl);
        val_loss.push(full(&params, &dataset.validation)?);
        if snapshot_epochs.contains(&(epoch + 1)) {
            snapshots.push((epoch + 1, params.clone()));
        }
    }
    Ok(TrainOutcome { params, adam, initial_train_loss, train_loss, val_loss, snapshots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_algebra::build_pauli_basis;
    use crate::trajectory::Provenance;
    use crate::RVector;

    fn synthetic(n_traj: usize, len: usize) -> Vec<Trajectory> {
        let basis = build_pauli_basis(1).unwrap();
        (0..n_traj)
            .map(|s| {
                let snaps = (0..len)
                    .map(|k| {
                        let x = (s as f64 + 1.0) * 0.1 * (k as f64 * 0.05).cos();
                        CoherenceVector::from_traceless(&[x, 0.0, 0.1], &basis).unwrap()
                    })
                    .collect();
                Trajectory::new(Provenance::Generator { label: "t".into() }, 2, 0.01, snaps, s as u64).unwrap()
            })
            .collect()
    }

    #[test]
    fn dataset_split_counts_and_determinism() {
        let trajs = synthetic(50, 1001);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ds = build_dataset(&trajs, 0.8, &mut rng).unwrap();
        assert_eq!((ds.n_train(), ds.n_validation()), (40_000, 10_000));
        assert_eq!(ds.train_seeds.len(), 40);
        assert!(ds.train_seeds.iter().all(|s| !ds.validation_seeds.contains(s)));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let again = build_dataset(&trajs, 0.8, &mut rng).unwrap();
        assert_eq!(again.train_seeds, ds.train_seeds);

        let one = synthetic(1, 2);
        let ds = build_dataset(&one, 0.8, &mut rng).unwrap();
        assert_eq!(ds.n_train() + ds.n_validation(), 1);
    }

    #[test]
    fn dataset_rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut trajs = synthetic(2, 5);
        let t = &trajs[0];
        trajs.push(Trajectory::new(t.provenance().clone(), 2, 0.02, t.snapshots().to_vec(), 9).unwrap());
        assert!(matches!(build_dataset(&trajs, 0.8, &mut rng), Err(Error::GridMismatch(_))));
        let short = synthetic(1, 1);
        assert!(build_dataset(&short, 0.8, &mut rng).is_err());
        assert!(build_dataset(&[], 0.8, &mut rng).is_err());
    }

    fn pair(v_in: RVector, v_out: RVector) -> TrainingPair {
        TrainingPair { v_in: CoherenceVector::pinned(v_in, 2), v_out: CoherenceVector::pinned(v_out, 2) }
    }

    #[test]
    fn exact_pairs_give_zero_loss_and_gradient() {
        let obj = Objective::new(1, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = GeneratorParams::random(&mut rng, 3, 0.5);
        let m = obj.propagator(&p).unwrap();
        let batch: Vec<TrainingPair> = (0..10)
            .map(|k| {
                let v = RVector::from_vec(vec![0.1 * k as f64, -0.2, 0.3, 0.0]);
                let v = CoherenceVector::pinned(v, 2).into_vector();
                pair(v.clone(), &m * &v)
            })
            .collect();
        let (l, g) = obj.loss_and_gradient(&p, &batch).unwrap();
        assert!(l < 1e-30);
        assert!(g.flatten().iter().all(|x| x.abs() < 1e-14));

        let zero = GeneratorParams::zeros(3);
        let still: Vec<TrainingPair> = batch.iter().map(|p| pair(p.v_in.as_vector().clone(), p.v_in.as_vector().clone())).collect();
        assert_eq!(obj.loss(&zero, &still).unwrap(), 0.0);
    }

    #[test]
    fn adam_examples() {
        let cfg = TrainConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p0 = GeneratorParams::random(&mut rng, 3, 1.0);
        let mut p = p0.clone();
        let mut st = AdamState::new(p.len());
        adam_step(&mut st, &mut p, &GeneratorParams::zeros(3), &cfg).unwrap();
        assert_eq!(p, p0);
        assert_eq!(st.step, 1);

        let g = GeneratorParams::random(&mut rng, 3, 1.0);
        let mut p = p0.clone();
        let mut st = AdamState::new(p.len());
        adam_step(&mut st, &mut p, &g, &cfg).unwrap();
        for ((a, b), gi) in p.flatten().iter().zip(p0.flatten()).zip(g.flatten()) {
            assert!(((a - b) + cfg.learning_rate * gi.signum()).abs() < 1e-9);
        }
        adam_step(&mut st, &mut p, &g, &cfg).unwrap();
        for (vi, gi) in st.v.iter().zip(g.flatten()) {
            let expected = (1.0 - cfg.beta2) * gi * gi * (cfg.beta2 + 1.0);
            assert!((vi - expected).abs() < 1e-15 * (1.0 + expected));
        }
    }

    #[test]
    fn zero_learning_rate_freezes_parameters() {
        let trajs = synthetic(3, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = build_dataset(&trajs, 0.67, &mut rng).unwrap();
        let obj = Objective::for_dataset(&ds).unwrap();
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 3, batches_per_epoch: 4, batch_size: 8, ..Default::default() };
        let out = train(&cfg, &ds, &obj).unwrap();
        assert_eq!(out.params, initial_params(&cfg, 3));
        assert!(out.train_loss.iter().all(|&l| l == out.initial_train_loss));

        let cfg0 = TrainConfig { epochs: 0, ..cfg };
        let out = train(&cfg0, &ds, &obj).unwrap();
        assert_eq!(out.params, initial_params(&cfg0, 3));
        assert!(out.train_loss.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let trajs = synthetic(4, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = build_dataset(&trajs, 0.75, &mut rng).unwrap();
        let obj = Objective::for_dataset(&ds).unwrap();
        let cfg = TrainConfig { epochs: 3, batches_per_epoch: 50, batch_size: 32, learning_rate: 1e-2, ..Default::default() };
        let a = train(&cfg, &ds, &obj).unwrap();
        let b = train(&cfg, &ds, &obj.clone().with_exec(Exec::Sequential)).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.train_loss, b.train_loss);
        assert!(a.train_loss.last().unwrap() < &a.initial_train_loss);
        assert_eq!(a.snapshots.len(), 3);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let trajs = synthetic(2, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ds = build_dataset(&trajs, 1.0, &mut rng).unwrap();
        let obj = Objective::for_dataset(&ds).unwrap();
        let cfg = TrainConfig { epochs: 1, batches_per_epoch: 2, batch_size: 4, ..Default::default() };
        let mut init = GeneratorParams::zeros(3);
        init.x[(0, 0)] = f64::NAN;
        assert!(train_from(&cfg, &ds, &obj, init).is_err());
        let mut init = GeneratorParams::zeros(3);
        init.x[(0, 0)] = 1e200;
        assert!(matches!(train_from(&cfg, &ds, &obj, init), Err(Error::NonFiniteLoss { epoch: 0, batch: 0, .. })));
    }
}

//! Generate, train, evaluate and analyse, with everything on disk.
//!
//! Layout below the output root (directory names come from
//! [`PathsConfig`]):
//!
//! ```text
//! data/manifest.json, data/traj_000.csv, ...
//! models/model.json, models/checkpoint.json, models/loss.csv
//! reports/error_report.{csv,json}, reports/timeseries.csv, ...
//! cells/<i>_<j>/...            one sub-tree per scan cell
//! ```

mod config;
mod source;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{
    cell_seed, trajectory_seed, ExperimentConfig, MetricsConfig, ModelConfig, ModelKind, PathsConfig, ScanAxis, ScanConfig,
    SimulationConfig,
};
pub use source::{sample_generator, DataSource};

use crate::generator::{
    assemble_generator, expm, extract_hamiltonian, jump_decomposition, precompute_dissipator_tensors, predict, stationary_state,
    GeneratorMatrix, LearnedModel, SpectralInfo,
};
use crate::metrics::{fvu_window, i_err, stationary_error_from_averages, ErrorReport};
use crate::parallel::{self, Exec};
use crate::spin_algebra::{coherence_to_matrix, BasisSet, CONVENTION_ID};
use crate::trainer::{build_dataset, train, write_loss_curves, Checkpoint, Objective};
use crate::trajectory::{Provenance, Trajectory};
use crate::{CMatrix, Error, RMatrix, RVector, Result, C64};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MODEL_FILE: &str = "model.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Resolved output directories.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
    pub data: PathBuf,
    pub models: PathBuf,
    pub reports: PathBuf,
}

impl Layout {
    pub fn new(root: &Path, paths: &PathsConfig) -> Self {
        Layout {
            root: root.to_path_buf(),
            data: root.join(&paths.data_dir),
            models: root.join(&paths.model_dir),
            reports: root.join(&paths.report_dir),
        }
    }

    pub fn model_file(&self) -> PathBuf {
        self.models.join(MODEL_FILE)
    }

    pub fn manifest_file(&self) -> PathBuf {
        self.data.join(MANIFEST_FILE)
    }
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_file(p: &Path, contents: &str) -> Result<()> {
    std::fs::write(p, contents).map_err(|e| Error::io(p, e))
}

fn write_json<T: Serialize>(p: &Path, value: &T) -> Result<()> {
    write_file(p, &serde_json::to_string_pretty(value)?)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest's directory.
    pub file: String,
    pub seed: u64,
}

/// Index of generated trajectories; contains nothing run-dependent beyond
/// the configuration, so reruns reproduce it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub convention_id: String,
    pub source: ModelConfig,
    pub d: usize,
    pub dt: f64,
    pub n_steps: usize,
    pub time_unit: String,
    pub train: Vec<ManifestEntry>,
    pub eval: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::invalid(format!("manifest {} not found; run gen-data first", path.display())));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.convention_id != CONVENTION_ID {
            return Err(Error::parse("manifest", format!("basis convention `{}` differs from `{CONVENTION_ID}`", m.convention_id)));
        }
        Ok(m)
    }

    /// Loads the listed trajectories, checking them against the header.
    pub fn read(&self, dir: &Path, entries: &[ManifestEntry]) -> Result<Vec<Trajectory>> {
        entries
            .iter()
            .map(|e| {
                let t = Trajectory::read_from(&dir.join(&e.file))?;
                if t.d() != self.d || (t.dt() - self.dt).abs() > 1e-15 * self.dt || t.seed() != e.seed {
                    return Err(Error::GridMismatch(format!("{} disagrees with the manifest", e.file)));
                }
                Ok(t)
            })
            .collect()
    }
}

/// Writes `n_trajectories + n_eval_trajectories` trajectories covering
/// `[0, t_extrapolate]` and their manifest.
pub fn gen_data(cfg: &ExperimentConfig, layout: &Layout) -> Result<Manifest> {
    cfg.validate()?;
    let source = DataSource::from_config(cfg)?;
    let sim = &cfg.simulation;
    let n_steps = sim.total_steps()?;
    let total = sim.n_trajectories + sim.n_eval_trajectories;
    create_dir(&layout.data)?;
    let entries: Vec<ManifestEntry> = (0..total)
        .map(|k| ManifestEntry { file: format!("traj_{k:03}.csv"), seed: trajectory_seed(sim.seed, k) })
        .collect();
    let written = parallel::map(Exec::Parallel, &entries, |e| -> Result<()> {
        let t = source.trajectory(e.seed, sim.dt, n_steps)?;
        t.write_to(&layout.data.join(&e.file))
    });
    written.into_iter().collect::<Result<Vec<()>>>()?;
    let (train, eval) = entries.split_at(sim.n_trajectories);
    let manifest = Manifest {
        convention_id: CONVENTION_ID.to_string(),
        source: cfg.model.clone(),
        d: source.dim(),
        dt: sim.dt,
        n_steps,
        time_unit: "1/Omega".into(),
        train: train.to_vec(),
        eval: eval.to_vec(),
    };
    write_json(&layout.manifest_file(), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub checkpoint: Checkpoint,
    pub model_path: PathBuf,
    pub final_train_loss: f64,
}

/// Fits a generator to the training trajectories restricted to `t ≤ t_train`.
pub fn train_model(cfg: &ExperimentConfig, layout: &Layout) -> Result<TrainOutput> {
    cfg.validate()?;
    let manifest = Manifest::load(&layout.manifest_file())?;
    let keep = cfg.simulation.train_steps()? + 1;
    let trajs = manifest
        .read(&layout.data, &manifest.train)?
        .iter()
        .map(|t| t.truncated(keep.min(t.len())))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.training.seed);
    rng.set_stream(2);
    let dataset = build_dataset(&trajs, cfg.training.split_fraction, &mut rng)?;
    let objective = Objective::for_dataset(&dataset)?;
    let outcome = train(&cfg.training, &dataset, &objective)?;
    let checkpoint = Checkpoint::from_outcome(&outcome, &cfg.training, manifest.d, manifest.dt)?;
    create_dir(&layout.models)?;
    let model_path = layout.model_file();
    checkpoint.model.save(&model_path)?;
    checkpoint.save(&layout.models.join(CHECKPOINT_FILE))?;
    write_loss_curves(&layout.models.join("loss.csv"), outcome.initial_train_loss, &outcome.train_loss, &outcome.val_loss)?;
    let final_train_loss = outcome.train_loss.last().copied().unwrap_or(outcome.initial_train_loss);
    Ok(TrainOutput { checkpoint, model_path, final_train_loss })
}

/// A stored generator with its basis and assembled matrix.
pub struct LoadedModel {
    pub model: LearnedModel,
    pub basis: BasisSet,
    pub generator: GeneratorMatrix,
}

impl LoadedModel {
    pub fn load(path: &Path) -> Result<Self> {
        Self::new(LearnedModel::load(path)?)
    }

    pub fn new(model: LearnedModel) -> Result<Self> {
        let basis = model.basis()?;
        let generator = assemble_generator(&model.params()?, &basis, &precompute_dissipator_tensors(&basis))?;
        Ok(LoadedModel { model, basis, generator })
    }

    /// Learned trajectory on the grid of `exact`, from its first snapshot.
    pub fn predict_like(&self, exact: &Trajectory) -> Result<Trajectory> {
        if exact.d() != self.basis.dim() {
            return Err(Error::ShapeMismatch { expected: format!("d = {}", self.basis.dim()), got: format!("d = {}", exact.d()) });
        }
        let m = expm(&(&self.generator.l * exact.dt()));
        let snaps = predict(&m, &exact.snapshots()[0], exact.n_steps());
        Trajectory::new(Provenance::Generator { label: "learned".into() }, exact.d(), exact.dt(), snaps, exact.seed())
    }

    pub fn spectral(&self) -> Result<SpectralInfo> {
        stationary_state(&self.generator, &self.basis)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub report: ErrorReport,
    /// Set when the evaluation data does not reach `t_extrapolate`.
    pub interpolation_only: bool,
    /// Components left out of FVU because their exact variance vanishes.
    pub fvu_excluded: Vec<usize>,
    /// Why `epsilon_stationary` is missing, if it is.
    pub stationary_note: Option<String>,
}

/// Error metrics of the learned model against the evaluation trajectories.
/// Per-trajectory values are averaged.
pub fn evaluate(cfg: &ExperimentConfig, layout: &Layout, model_path: &Path, write_series: bool) -> Result<EvalOutput> {
    cfg.validate()?;
    let manifest = Manifest::load(&layout.manifest_file())?;
    if manifest.eval.is_empty() {
        return Err(Error::invalid("manifest lists no evaluation trajectories"));
    }
    let learned = LoadedModel::load(model_path)?;
    let exact = manifest.read(&layout.data, &manifest.eval)?;
    let predicted = exact.iter().map(|t| learned.predict_like(t)).collect::<Result<Vec<_>>>()?;
    let sim = &cfg.simulation;
    let t_train = sim.t_train;
    let span = exact.iter().map(|t| t.n_steps() as f64 * t.dt()).fold(f64::INFINITY, f64::min);
    let interpolation_only = sim.t_extrapolate <= t_train || span < sim.t_extrapolate * (1.0 - 1e-12);
    let basis = &learned.basis;

    let pairs: Vec<(&Trajectory, &Trajectory)> = exact.iter().zip(&predicted).collect();
    let per_traj = parallel::map(Exec::Parallel, &pairs, |(e, p)| -> Result<(f64, Option<f64>, Option<crate::metrics::Fvu>, Option<crate::metrics::Fvu>)> {
        let ii = i_err(e, p, basis, 0.0, t_train)?;
        let fi = fvu_window(e, p, 0.0, t_train).ok();
        let (ie, fe) = if interpolation_only {
            (None, None)
        } else {
            (Some(i_err(e, p, basis, t_train, sim.t_extrapolate)?), fvu_window(e, p, t_train, sim.t_extrapolate).ok())
        };
        Ok((ii, ie, fi, fe))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let i_interp: Vec<f64> = per_traj.iter().map(|r| r.0).collect();
    let avg_opt = |xs: Vec<Option<f64>>| -> Option<f64> { xs.iter().copied().collect::<Option<Vec<f64>>>().map(|v| mean(&v)) };
    let i_extrap = avg_opt(per_traj.iter().map(|r| r.1).collect());
    let fvu_interp = avg_opt(per_traj.iter().map(|r| r.2.as_ref().map(|f| f.value)).collect());
    let fvu_extrap = avg_opt(per_traj.iter().map(|r| r.3.as_ref().map(|f| f.value)).collect());
    let mut fvu_excluded: Vec<usize> = per_traj.iter().filter_map(|r| r.2.as_ref()).flat_map(|f| f.excluded.iter().copied()).collect();
    fvu_excluded.sort_unstable();
    fvu_excluded.dedup();

    let (tau, epsilon, stationary_note) = if cfg.metrics.skip_stationary {
        (None, None, Some("skipped".to_string()))
    } else {
        let source = DataSource::from_config(cfg)?;
        let seeds: Vec<u64> = manifest.eval.iter().map(|e| e.seed).collect();
        match stationary_epsilon(&learned, &source, &seeds, &cfg.metrics) {
            Ok(s) => (s.spectral.tau, s.epsilon, s.note),
            Err(e) => (None, None, Some(e.to_string())),
        }
    };

    let report = ErrorReport {
        i_err_interp: mean(&i_interp),
        i_err_extrap: i_extrap,
        fvu_interp,
        fvu_extrap,
        epsilon_stationary: epsilon,
        interp_window: (0.0, t_train),
        extrap_window: (!interpolation_only).then_some((t_train, sim.t_extrapolate)),
        a: cfg.metrics.a,
        b: cfg.metrics.b,
        tau,
        n_initial_conditions: cfg.metrics.n_initial_conditions.min(manifest.eval.len()),
    };
    let out = EvalOutput { report, interpolation_only, fvu_excluded, stationary_note };
    create_dir(&layout.reports)?;
    write_json(&layout.reports.join("error_report.json"), &out)?;
    write_file(&layout.reports.join("error_report.csv"), &error_report_csv(&out))?;
    if write_series {
        write_file(&layout.reports.join("timeseries.csv"), &timeseries_csv(&exact, &predicted))?;
    }
    Ok(out)
}

fn error_report_csv(o: &EvalOutput) -> String {
    let r = &o.report;
    let (e0, e1) = r.extrap_window.map_or((None, None), |(a, b)| (Some(a), Some(b)));
    let mut s = String::from(
        "interp_t0[1/Omega],interp_t1[1/Omega],extrap_t0[1/Omega],extrap_t1[1/Omega],i_err_interp,i_err_extrap,fvu_interp,fvu_extrap,epsilon,a,b,tau[1/Omega],n_initial_conditions,interpolation_only\n",
    );
    let _ = writeln!(
        s,
        "{},{},{},{},{:.16e},{},{},{},{},{},{},{},{},{}",
        r.interp_window.0,
        r.interp_window.1,
        opt(e0),
        opt(e1),
        r.i_err_interp,
        opt(r.i_err_extrap),
        opt(r.fvu_interp),
        opt(r.fvu_extrap),
        opt(r.epsilon_stationary),
        r.a,
        r.b,
        opt(r.tau),
        r.n_initial_conditions,
        o.interpolation_only
    );
    s
}

/// Exact and learned coherence components of every evaluation trajectory.
fn timeseries_csv(exact: &[Trajectory], predicted: &[Trajectory]) -> String {
    let n = exact.first().map_or(0, |t| t.d() * t.d() - 1);
    let mut s = String::from("seed,t[1/Omega]");
    for i in 1..=n {
        let _ = write!(s, ",exact_{i}");
    }
    for i in 1..=n {
        let _ = write!(s, ",learned_{i}");
    }
    s.push('\n');
    for (e, p) in exact.iter().zip(predicted) {
        for k in 0..e.len() {
            let _ = write!(s, "{},{}", e.seed(), k as f64 * e.dt());
            for v in e.vector(k).iter().take(n).chain(p.vector(k).iter().take(n)) {
                let _ = write!(s, ",{v:.12e}");
            }
            s.push('\n');
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct StationaryOutcome {
    pub spectral: SpectralInfo,
    pub epsilon: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub note: Option<String>,
}

/// `ε` over `[aτ, bτ]` using exact window averages from `source` for the
/// first `n_initial_conditions` seeds.
pub fn stationary_epsilon(learned: &LoadedModel, source: &DataSource, seeds: &[u64], m: &MetricsConfig) -> Result<StationaryOutcome> {
    let spectral = learned.spectral()?;
    if spectral.non_unique {
        return Ok(StationaryOutcome { spectral, epsilon: None, window: None, note: Some("stationary state is not unique".into()) });
    }
    let Some(tau) = spectral.tau else {
        let note = format!("no spectral gap (E_gap = {:e})", spectral.e_gap);
        return Ok(StationaryOutcome { spectral, epsilon: None, window: None, note: Some(note) });
    };
    if source.dim() != learned.basis.dim() {
        return Err(Error::ShapeMismatch { expected: format!("d = {}", learned.basis.dim()), got: format!("d = {}", source.dim()) });
    }
    let n = m.n_initial_conditions.min(seeds.len());
    if n == 0 {
        return Err(Error::invalid("no initial conditions for the stationary analysis"));
    }
    let (t0, t1) = (m.a * tau, m.b * tau);
    let avgs = parallel::map(Exec::Parallel, &seeds[..n], |&s| source.window_average(s, t0, t1, m.window_samples))
        .into_iter()
        .collect::<Result<Vec<RVector>>>()?;
    let eps = stationary_error_from_averages(&avgs, &spectral.v_st, &learned.basis)?;
    Ok(StationaryOutcome { spectral, epsilon: Some(eps), window: Some((t0, t1)), note: None })
}

fn rows_re(m: &CMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().map(|z| z.re).collect()).collect()
}

fn rows_im(m: &CMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().map(|z| z.im).collect()).collect()
}

fn rows_real(m: &RMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub status: String,
    pub v_st: Vec<f64>,
    pub rho_st_real: Vec<Vec<f64>>,
    pub rho_st_imag: Vec<Vec<f64>>,
    pub rho_st_min_eigenvalue: f64,
    pub e_gap: f64,
    pub tau: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub a: f64,
    pub b: f64,
    pub epsilon: Option<f64>,
    pub n_initial_conditions: usize,
    pub non_unique: bool,
    /// `[re, im]`, ascending by modulus.
    pub eigenvalues: Vec<[f64; 2]>,
    pub residual: f64,
    pub time_unit: String,
}

/// Stationary analysis plus a long-time series `0..bτ` of the first
/// initial condition, exact against learned, with the stationary level.
pub fn stationary_analysis(cfg: &ExperimentConfig, layout: &Layout, model_path: &Path) -> Result<StationaryReport> {
    cfg.validate()?;
    let learned = LoadedModel::load(model_path)?;
    let source = DataSource::from_config(cfg)?;
    let n_ic = cfg.metrics.n_initial_conditions;
    let seeds: Vec<u64> = match Manifest::load(&layout.manifest_file()) {
        Ok(m) => m.eval.iter().map(|e| e.seed).collect(),
        Err(_) => (0..n_ic).map(|k| trajectory_seed(cfg.simulation.seed, cfg.simulation.n_trajectories + k)).collect(),
    };
    let out = stationary_epsilon(&learned, &source, &seeds, &cfg.metrics)?;
    let sp = &out.spectral;
    let rho = coherence_to_matrix(sp.v_st.as_slice(), &learned.basis);
    let status = if sp.non_unique {
        "non_unique"
    } else if sp.tau.is_none() {
        "no_gap"
    } else {
        "ok"
    };
    let report = StationaryReport {
        status: status.into(),
        v_st: sp.v_st.as_slice().to_vec(),
        rho_st_real: rows_re(&rho),
        rho_st_imag: rows_im(&rho),
        rho_st_min_eigenvalue: sp.rho_min_eigenvalue,
        e_gap: sp.e_gap,
        tau: sp.tau,
        window: out.window,
        a: cfg.metrics.a,
        b: cfg.metrics.b,
        epsilon: out.epsilon,
        n_initial_conditions: n_ic.min(seeds.len()),
        non_unique: sp.non_unique,
        eigenvalues: sp.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
        residual: sp.residual,
        time_unit: "1/Omega".into(),
    };
    create_dir(&layout.reports)?;
    write_json(&layout.reports.join("stationary.json"), &report)?;
    if let (Some(tau), Some(&seed)) = (sp.tau, seeds.first()) {
        let samples = 1001;
        let h = cfg.metrics.b * tau / (samples - 1) as f64;
        let exact = source.sample_uniform(seed, 0.0, h, samples)?;
        let v0 = source.sample_uniform(seed, 0.0, h, 1)?.remove(0);
        let learned_series = sample_generator(&learned.generator.l, &v0, 0.0, h, samples);
        let n = learned.basis.n_traceless();
        let mut s = String::from("t[1/Omega]");
        for pre in ["exact", "learned", "stationary"] {
            for i in 1..=n {
                let _ = write!(s, ",{pre}_{i}");
            }
        }
        s.push('\n');
        for k in 0..samples {
            let _ = write!(s, "{}", k as f64 * h);
            for v in exact[k].iter().take(n).chain(learned_series[k].iter().take(n)).chain(sp.v_st.as_slice().iter().take(n)) {
                let _ = write!(s, ",{v:.12e}");
            }
            s.push('\n');
        }
        write_file(&layout.reports.join("stationary_series.csv"), &s)?;
    }
    Ok(report)
}

/// Traceless part of the subsystem Hamiltonian of a chain model.
pub fn reference_hamiltonian(model: &ModelConfig) -> Result<CMatrix> {
    let chain = model.spin_chain()?;
    let h = chain.hamiltonian_terms().restricted(&chain.subsystem()).dense();
    let d = h.nrows() as f64;
    let tr = h.trace() / d;
    Ok(h.map(|x| C64::new(x, 0.0)) - CMatrix::identity(h.nrows(), h.ncols()) * C64::new(tr, 0.0))
}

/// Basis indices (0-based) of `σz⊗𝟙` and `𝟙⊗σz`.
pub const ZZ_DIRECTION: [usize; 2] = [11, 14];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEntry {
    pub rate: f64,
    /// `[re, im]` coefficients over the traceless basis.
    pub coefficients: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretReport {
    pub omega: Vec<f64>,
    pub hamiltonian_real: Vec<Vec<f64>>,
    pub hamiltonian_imag: Vec<Vec<f64>>,
    pub delta_real: Option<Vec<Vec<f64>>>,
    pub delta_imag: Option<Vec<Vec<f64>>>,
    /// `‖ΔH‖_HS`.
    pub delta_norm: Option<f64>,
    /// `|⟨P, ΔH⟩| / (‖P‖‖ΔH‖)` with `P = σz⊗𝟙 + 𝟙⊗σz`.
    pub delta_zz_fraction: Option<f64>,
    pub c_real: Vec<Vec<f64>>,
    pub c_imag: Vec<Vec<f64>>,
    /// Descending rates.
    pub jumps: Vec<JumpEntry>,
    /// `|⟨u, h_0⟩|²` with `u = (e_σz⊗𝟙 + e_𝟙⊗σz)/√2`.
    pub dominant_zz_overlap2: Option<f64>,
}

/// Hamiltonian, Kossakowski matrix and jump operators of a learned model.
pub fn interpret(model: &LearnedModel, reference: Option<&CMatrix>) -> Result<InterpretReport> {
    let basis = model.basis()?;
    let params = model.params()?;
    let h = extract_hamiltonian(&params, &basis);
    let c = params.kossakowski();
    let jd = jump_decomposition(&c, &basis)?;
    let two_qubit = basis.dim() == 4;
    let (delta_real, delta_imag, delta_norm, delta_zz_fraction) = match reference {
        Some(r) => {
            if r.shape() != h.shape() {
                return Err(Error::ShapeMismatch { expected: format!("{0}x{0}", basis.dim()), got: format!("{}x{}", r.nrows(), r.ncols()) });
            }
            let dh = &h - r;
            let coeffs = basis.project_complex(&dh);
            let norm = coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let frac = if two_qubit && norm > 0.0 {
                let u = (coeffs[ZZ_DIRECTION[0]] + coeffs[ZZ_DIRECTION[1]]) / 2f64.sqrt();
                Some(u.norm() / norm)
            } else {
                None
            };
            (Some(rows_re(&dh)), Some(rows_im(&dh)), Some(norm), frac)
        }
        None => (None, None, None, None),
    };
    let dominant_zz_overlap2 = (two_qubit && !jd.rates.is_empty()).then(|| {
        let h0 = jd.coefficients(0);
        ((h0[ZZ_DIRECTION[0]] + h0[ZZ_DIRECTION[1]]) / 2f64.sqrt()).norm_sqr()
    });
    Ok(InterpretReport {
        omega: params.omega.iter().copied().collect(),
        hamiltonian_real: rows_re(&h),
        hamiltonian_imag: rows_im(&h),
        delta_real,
        delta_imag,
        delta_norm,
        delta_zz_fraction,
        c_real: rows_real(&c.real()),
        c_imag: rows_real(&c.imag()),
        jumps: jd
            .rates
            .iter()
            .enumerate()
            .map(|(k, &rate)| JumpEntry { rate, coefficients: jd.coefficients(k).iter().map(|z| [z.re, z.im]).collect() })
            .collect(),
        dominant_zz_overlap2,
    })
}

/// Writes the report as JSON plus CSV matrices for plotting.
pub fn write_interpret_report(report: &InterpretReport, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    write_json(&dir.join("interpret.json"), report)?;
    let mat = |m: &[Vec<f64>]| -> String {
        let mut s = String::new();
        for r in m {
            let line: Vec<String> = r.iter().map(|x| format!("{x:.12e}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    };
    write_file(&dir.join("hamiltonian_real.csv"), &mat(&report.hamiltonian_real))?;
    write_file(&dir.join("hamiltonian_imag.csv"), &mat(&report.hamiltonian_imag))?;
    write_file(&dir.join("kossakowski_real.csv"), &mat(&report.c_real))?;
    write_file(&dir.join("kossakowski_imag.csv"), &mat(&report.c_imag))?;
    if let (Some(re), Some(im)) = (&report.delta_real, &report.delta_imag) {
        write_file(&dir.join("delta_h_real.csv"), &mat(re))?;
        write_file(&dir.join("delta_h_imag.csv"), &mat(im))?;
    }
    let mut s = String::from("k,rate");
    if let Some(j) = report.jumps.first() {
        for i in 1..=j.coefficients.len() {
            let _ = write!(s, ",re_{i},im_{i}");
        }
    }
    s.push('\n');
    for (k, j) in report.jumps.iter().enumerate() {
        let _ = write!(s, "{},{:.12e}", k + 1, j.rate);
        for c in &j.coefficients {
            let _ = write!(s, ",{:.12e},{:.12e}", c[0], c[1]);
        }
        s.push('\n');
    }
    write_file(&dir.join("jumps.csv"), &s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub axis1: f64,
    pub axis2: f64,
    pub status: String,
    pub report: Option<ErrorReport>,
    pub model_file: Option<PathBuf>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub axis1: String,
    pub axis2: String,
    /// Row-major over `(axis1, axis2)`.
    pub cells: Vec<ScanCell>,
}

impl ScanResult {
    pub fn cell(&self, a1: f64, a2: f64) -> Option<&ScanCell> {
        self.cells.iter().find(|c| c.axis1 == a1 && c.axis2 == a2)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "axis1[{}],axis2[{}],i_err_interp,i_err_extrap,fvu_interp,fvu_extrap,epsilon,status,model_file,error\n",
            self.axis1, self.axis2
        );
        for c in &self.cells {
            let r = c.report.as_ref();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                c.axis1,
                c.axis2,
                opt(r.map(|r| r.i_err_interp)),
                opt(r.and_then(|r| r.i_err_extrap)),
                opt(r.and_then(|r| r.fvu_interp)),
                opt(r.and_then(|r| r.fvu_extrap)),
                opt(r.and_then(|r| r.epsilon_stationary)),
                c.status,
                c.model_file.as_ref().map(|p| csv_text(&p.display().to_string())).unwrap_or_default(),
                c.error.as_deref().map(csv_text).unwrap_or_default()
            );
        }
        s
    }
}

/// Configuration of one scan cell, with seeds derived from its coordinates.
pub fn cell_config(cfg: &ExperimentConfig, a1: f64, a2: f64) -> Result<ExperimentConfig> {
    let scan = cfg.scan.as_ref().ok_or_else(|| Error::invalid("config has no scan block"))?;
    let mut c = cfg.clone();
    c.scan = None;
    c.model.set(&scan.axis1.name, a1)?;
    c.model.set(&scan.axis2.name, a2)?;
    c.simulation.seed = cell_seed(cfg.simulation.seed, a1, a2);
    c.training.seed = cell_seed(cfg.training.seed, a1, a2);
    Ok(c)
}

/// gen-data, train and eval for every grid cell. Cells run concurrently in
/// private directories; failures become rows with `status = failed`.
pub fn scan(cfg: &ExperimentConfig, root: &Path) -> Result<ScanResult> {
    cfg.validate()?;
    let scan = cfg.scan.as_ref().ok_or_else(|| Error::invalid("config has no scan block"))?;
    if cfg.model.variant == ModelKind::Synthetic {
        return Err(Error::invalid("scans need a spin-chain model"));
    }
    let coords: Vec<(usize, usize)> =
        (0..scan.axis1.values.len()).flat_map(|i| (0..scan.axis2.values.len()).map(move |j| (i, j))).collect();
    let cells = parallel::map(Exec::Parallel, &coords, |&(i, j)| {
        let (a1, a2) = (scan.axis1.values[i], scan.axis2.values[j]);
        let run = || -> Result<(ErrorReport, PathBuf)> {
            let c = cell_config(cfg, a1, a2)?;
            let layout = Layout::new(&root.join("cells").join(format!("{i}_{j}")), &c.paths);
            gen_data(&c, &layout)?;
            let t = train_model(&c, &layout)?;
            let e = evaluate(&c, &layout, &t.model_path, false)?;
            Ok((e.report, t.model_path))
        };
        match run() {
            Ok((report, model)) => ScanCell {
                axis1: a1,
                axis2: a2,
                status: "ok".into(),
                report: Some(report),
                model_file: model.strip_prefix(root).map(Path::to_path_buf).ok().or(Some(model)),
                error: None,
            },
            Err(e) => ScanCell {
                axis1: a1,
                axis2: a2,
                status: "failed".into(),
                report: None,
                model_file: None,
                error: Some(format!("{}: {e}", e.kind())),
            },
        }
    });
    let result = ScanResult { axis1: scan.axis1.name.clone(), axis2: scan.axis2.name.clone(), cells };
    let layout = Layout::new(root, &cfg.paths);
    create_dir(&layout.reports)?;
    write_file(&layout.reports.join("scan.csv"), &result.to_csv())?;
    write_json(&layout.reports.join("scan.json"), &result)?;
    Ok(result)
}

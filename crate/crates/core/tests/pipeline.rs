use std::path::Path;

use lindblad_core::generator::{GeneratorParams, LearnedModel};
use lindblad_core::many_body::ChainSimulator;
use lindblad_core::pipeline::{
    self, ExperimentConfig, Layout, ModelConfig, ModelKind, ScanAxis, ScanConfig,
};
use lindblad_core::trainer::{initial_params, Checkpoint};
use lindblad_core::trajectory::Trajectory;
use lindblad_core::{Error, RMatrix};

fn single_qubit_truth() -> GeneratorParams {
    let mut p = GeneratorParams::zeros(3);
    p.omega[0] = 0.5f64.sqrt();
    p.omega[2] = 0.3;
    p.x = RMatrix::from_row_slice(3, 3, &[0.3, 0.05, 0.0, 0.0, 0.2, 0.1, 0.0, 0.0, 0.25]);
    p.y[(0, 1)] = 0.08;
    p
}

fn synthetic_config(dir: &Path, params: &GeneratorParams, d: usize) -> ExperimentConfig {
    let file = dir.join("truth.json");
    LearnedModel::from_params(params, d, 0.01).unwrap().save(&file).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.model = ModelConfig { variant: ModelKind::Synthetic, generator_file: Some(file), ..ModelConfig::default() };
    cfg
}

#[test]
fn default_data_generation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.model.v_prime = 0.3;
    let layout = Layout::new(dir.path(), &cfg.paths);
    let m = pipeline::gen_data(&cfg, &layout).unwrap();
    assert_eq!(m.train.len() + m.eval.len(), 60);
    let first = std::fs::read(layout.manifest_file()).unwrap();
    let files = std::fs::read_dir(&layout.data).unwrap().count();
    assert_eq!(files, 61);
    let t = Trajectory::read_from(&layout.data.join(&m.eval[3].file)).unwrap();
    assert_eq!(t.len(), 2001);

    pipeline::gen_data(&cfg, &layout).unwrap();
    assert_eq!(std::fs::read(layout.manifest_file()).unwrap(), first);

    let sim = ChainSimulator::new(&cfg.model.spin_chain().unwrap()).unwrap();
    let fresh = sim.simulate_seeded(m.eval[3].seed, 0.01, 2000).unwrap();
    for k in 0..t.len() {
        assert!((t.vector(k) - fresh.vector(k)).amax() < 1e-15);
    }
}

#[test]
fn oversized_chain_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.model.n = 13;
    let err = pipeline::gen_data(&cfg, &Layout::new(dir.path(), &cfg.paths)).unwrap_err();
    assert!(matches!(err, Error::Capacity { n: 13, max: 12 }), "{err}");
}

#[test]
fn training_without_manifest_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::default();
    let err = pipeline::train_model(&cfg, &Layout::new(dir.path(), &cfg.paths)).unwrap_err();
    assert!(err.to_string().contains("manifest"), "{err}");
}

#[test]
fn single_qubit_synthetic_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let truth = single_qubit_truth();
    let cfg = synthetic_config(dir.path(), &truth, 2);
    let layout = Layout::new(&dir.path().join("run"), &cfg.paths);
    let manifest = pipeline::gen_data(&cfg, &layout).unwrap();
    assert_eq!(manifest.d, 2);

    let trained = pipeline::train_model(&cfg, &layout).unwrap();
    assert!(trained.final_train_loss < 1e-12, "final loss {:e}", trained.final_train_loss);
    let loss_csv = std::fs::read_to_string(layout.models.join("loss.csv")).unwrap();
    assert_eq!(loss_csv.lines().count(), 22);
    assert!(loss_csv.starts_with("epoch,train_loss,val_loss\n0,"));

    // The generator evaluated against its own data.
    let truth_file = cfg.model.generator_file.clone().unwrap();
    let own = pipeline::evaluate(&cfg, &layout, &truth_file, true).unwrap();
    assert!(own.report.i_err_interp < 1e-8);
    assert!(own.report.i_err_extrap.unwrap() < 1e-8);
    assert_eq!(own.report.interp_window, (0.0, 10.0));
    assert_eq!(own.report.extrap_window, Some((10.0, 20.0)));
    let csv = std::fs::read_to_string(layout.reports.join("error_report.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..4], &["0", "10", "1.0000000000000000e1", "2.0000000000000000e1"]);
    let series = std::fs::read_to_string(layout.reports.join("timeseries.csv")).unwrap();
    assert!(series.starts_with("seed,t[1/Omega],exact_1,exact_2,exact_3,learned_1,learned_2,learned_3\n"));
    assert_eq!(series.lines().count(), 1 + 10 * 2001);

    let learned = pipeline::evaluate(&cfg, &layout, &trained.model_path, false).unwrap();
    assert!(learned.report.i_err_extrap.unwrap() < 1e-4);

    let report = pipeline::interpret(&LearnedModel::load(&trained.model_path).unwrap(), None).unwrap();
    let basis = lindblad_core::spin_algebra::build_pauli_basis(1).unwrap();
    let h_true = lindblad_core::generator::extract_hamiltonian(&truth, &basis);
    for i in 0..2 {
        for j in 0..2 {
            assert!((report.hamiltonian_real[i][j] - h_true[(i, j)].re).abs() < 1e-6);
            assert!((report.hamiltonian_imag[i][j] - h_true[(i, j)].im).abs() < 1e-6);
        }
    }
    assert_eq!(report.jumps.len(), 3);
    assert!(report.jumps.windows(2).all(|w| w[0].rate >= w[1].rate));
}

#[test]
fn zero_epochs_keep_the_initialisation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = synthetic_config(dir.path(), &single_qubit_truth(), 2);
    cfg.training.epochs = 0;
    cfg.simulation.n_trajectories = 3;
    cfg.simulation.n_eval_trajectories = 1;
    let layout = Layout::new(&dir.path().join("run"), &cfg.paths);
    pipeline::gen_data(&cfg, &layout).unwrap();
    let out = pipeline::train_model(&cfg, &layout).unwrap();
    let stored = out.checkpoint.model.params().unwrap();
    assert_eq!(stored, initial_params(&cfg.training, 3));
    assert_eq!(out.checkpoint.adam.step, 0);
}

#[test]
fn short_evaluation_data_gives_interpolation_only_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = synthetic_config(dir.path(), &single_qubit_truth(), 2);
    cfg.simulation.t_extrapolate = 10.0;
    cfg.simulation.n_trajectories = 2;
    cfg.simulation.n_eval_trajectories = 2;
    let layout = Layout::new(&dir.path().join("run"), &cfg.paths);
    pipeline::gen_data(&cfg, &layout).unwrap();
    cfg.simulation.t_extrapolate = 20.0;
    let truth = cfg.model.generator_file.clone().unwrap();
    let out = pipeline::evaluate(&cfg, &layout, &truth, false).unwrap();
    assert!(out.interpolation_only);
    assert_eq!(out.report.i_err_extrap, None);
    assert_eq!(out.report.extrap_window, None);
    let csv = std::fs::read_to_string(layout.reports.join("error_report.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",true"));
}

#[test]
fn null_generator_reports_non_unique_stationary_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(dir.path(), &GeneratorParams::zeros(15), 4);
    let layout = Layout::new(&dir.path().join("run"), &cfg.paths);
    let model = cfg.model.generator_file.clone().unwrap();
    let st = pipeline::stationary_analysis(&cfg, &layout, &model).unwrap();
    assert_eq!(st.status, "non_unique");
    assert!(st.non_unique);
    assert_eq!(st.epsilon, None);

    let report = pipeline::interpret(&LearnedModel::load(&model).unwrap(), None).unwrap();
    assert!(report.hamiltonian_real.iter().chain(&report.hamiltonian_imag).flatten().all(|&x| x == 0.0));
    assert!(report.jumps.iter().all(|j| j.rate.abs() < 1e-15));
}

fn small_scan_config(axis2: Vec<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.model.n = 4;
    cfg.simulation.n_trajectories = 4;
    cfg.simulation.n_eval_trajectories = 2;
    cfg.simulation.t_extrapolate = 12.0;
    cfg.training.epochs = 2;
    cfg.training.batches_per_epoch = 20;
    cfg.training.batch_size = 32;
    cfg.metrics.skip_stationary = true;
    cfg.scan = Some(ScanConfig {
        axis1: ScanAxis { name: "beta".into(), values: vec![0.0, 0.5] },
        axis2: ScanAxis { name: "v_prime".into(), values: axis2 },
    });
    cfg
}

#[test]
fn scan_grid_is_complete_and_reproducible() {
    let cfg = small_scan_config(vec![0.1, 0.5]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = pipeline::scan(&cfg, a.path()).unwrap();
    assert_eq!(ra.cells.len(), 4);
    assert!(ra.cells.iter().all(|c| c.status == "ok"));
    for c in &ra.cells {
        assert!(a.path().join(c.model_file.as_ref().unwrap()).exists());
    }
    let csv = std::fs::read_to_string(a.path().join("reports/scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("axis1[beta],axis2[v_prime],i_err_interp,i_err_extrap,fvu_interp,fvu_extrap,epsilon,status"));
    pipeline::scan(&cfg, b.path()).unwrap();
    assert_eq!(csv, std::fs::read_to_string(b.path().join("reports/scan.csv")).unwrap());

    // A cell's seeds depend only on its own coordinates.
    let mut wider = cfg.clone();
    wider.scan.as_mut().unwrap().axis2.values.push(0.9);
    let c = pipeline::cell_config(&wider, 0.5, 0.1).unwrap();
    assert_eq!(c.simulation.seed, pipeline::cell_config(&cfg, 0.5, 0.1).unwrap().simulation.seed);
}

#[test]
fn failing_scan_cells_are_recorded() {
    let mut cfg = small_scan_config(vec![0.1]);
    cfg.scan.as_mut().unwrap().axis1 = ScanAxis { name: "n".into(), values: vec![4.0, 13.0] };
    let dir = tempfile::tempdir().unwrap();
    let r = pipeline::scan(&cfg, dir.path()).unwrap();
    assert_eq!(r.cells.len(), 2);
    assert_eq!(r.cell(4.0, 0.1).unwrap().status, "ok");
    let bad = r.cell(13.0, 0.1).unwrap();
    assert_eq!(bad.status, "failed");
    assert!(bad.error.as_ref().unwrap().starts_with("capacity"));
    let csv = std::fs::read_to_string(dir.path().join("reports/scan.csv")).unwrap();
    assert!(csv.lines().nth(2).unwrap().contains(",failed,,capacity"));
}

#[test]
fn model_i_scan_is_best_in_the_weak_coupling_corner() {
    let mut cfg = ExperimentConfig::default();
    cfg.metrics.skip_stationary = true;
    cfg.scan = Some(ScanConfig {
        axis1: ScanAxis { name: "beta".into(), values: vec![0.0, 0.5, 1.0] },
        axis2: ScanAxis { name: "v_prime".into(), values: vec![0.1, 0.5, 1.0] },
    });
    let dir = tempfile::tempdir().unwrap();
    let r = pipeline::scan(&cfg, dir.path()).unwrap();
    assert!(r.cells.iter().all(|c| c.status == "ok"));
    let best = r
        .cells
        .iter()
        .min_by(|a, b| a.report.as_ref().unwrap().i_err_interp.total_cmp(&b.report.as_ref().unwrap().i_err_interp))
        .unwrap();
    assert_eq!((best.axis1, best.axis2), (0.0, 0.1));

    // Markovian corner: no overfitting.
    let ck = Checkpoint::load(&dir.path().join(best.model_file.as_ref().unwrap()).with_file_name("checkpoint.json")).unwrap();
    let train = *ck.train_loss.last().unwrap();
    let val = ck.val_loss.last().unwrap().unwrap();
    assert!(val < 2.0 * train, "validation {val:e}, training {train:e}");
}

/// Stationary error of the exact model on `[aτ, bτ]` in closed form:
/// `∫ e^{tL}(v0 − v_st) dt = L⁻¹(e^{t1 L} − e^{t0 L})(v0 − v_st)` on the
/// traceless block.
fn closed_form_epsilon(truth: &GeneratorParams, seeds: &[u64], a: f64, b: f64) -> f64 {
    use lindblad_core::generator::{assemble_generator, expm, precompute_dissipator_tensors, stationary_state};
    use lindblad_core::spin_algebra::{build_pauli_basis, coherence_to_matrix, rho_to_coherence};
    let basis = build_pauli_basis(1).unwrap();
    let g = assemble_generator(truth, &basis, &precompute_dissipator_tensors(&basis)).unwrap();
    let info = stationary_state(&g, &basis).unwrap();
    let tau = info.tau.unwrap();
    let lt = g.l.view((0, 0), (3, 3)).into_owned();
    let lt_inv = lt.clone().try_inverse().unwrap();
    let (t0, t1) = (a * tau, b * tau);
    let mut total = 0.0;
    for &s in seeds {
        let v0 = rho_to_coherence(&lindblad_core::many_body::seeded_initial_state_dim(s, 2), &basis).unwrap();
        let dev = (v0.as_vector() - info.v_st.as_vector()).rows(0, 3).into_owned();
        let avg = &lt_inv * (expm(&(&lt * t1)) - expm(&(&lt * t0))) * dev / (t1 - t0);
        let sigma = coherence_to_matrix(&[avg[0], avg[1], avg[2], 0.0], &basis)
            - coherence_to_matrix(&[0.0, 0.0, 0.0, 0.0], &basis);
        total += lindblad_core::metrics::trace_norm(&sigma);
    }
    total / seeds.len() as f64
}

fn exact_stationary_run() -> (GeneratorParams, ExperimentConfig, pipeline::StationaryReport, Vec<u64>) {
    let dir = tempfile::tempdir().unwrap();
    let truth = single_qubit_truth();
    let cfg = synthetic_config(dir.path(), &truth, 2);
    let layout = Layout::new(&dir.path().join("run"), &cfg.paths);
    let manifest = pipeline::gen_data(&cfg, &layout).unwrap();
    let seeds: Vec<u64> = manifest.eval.iter().map(|e| e.seed).collect();
    let st = pipeline::stationary_analysis(&cfg, &layout, cfg.model.generator_file.as_ref().unwrap()).unwrap();
    (truth, cfg, st, seeds)
}

#[test]
fn stationary_error_of_exact_model_is_the_window_bias() {
    let (truth, cfg, st, seeds) = exact_stationary_run();
    let tau = st.tau.unwrap();
    assert_eq!(st.status, "ok");
    assert_eq!(st.window, Some((5.0 * tau, 10.0 * tau)));
    assert_eq!(st.n_initial_conditions, 10);
    let want = closed_form_epsilon(&truth, &seeds[..10], cfg.metrics.a, cfg.metrics.b);
    let got = st.epsilon.unwrap();
    assert!((got - want).abs() < 1e-6 * want, "{got:e} vs closed form {want:e}");
}

/// The target holds only if slow modes are negligible over `[5τ, 10τ]`;
/// every qubit generator keeps a real mode decaying at most at `2/τ`, which
/// leaves a bias of order `1e-6` or more for typical initial states.
#[test]
#[ignore = "intrinsic window bias of the [5τ, 10τ] average exceeds 1e-6 for qubit generators"]
fn stationary_error_of_exact_single_qubit_model_below_1e_6() {
    let (_, _, st, _) = exact_stationary_run();
    assert!(st.epsilon.unwrap() < 1e-6, "epsilon {:e}", st.epsilon.unwrap());
}

#[test]
fn long_range_chain_dissipator_sits_on_local_sz() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.model = ModelConfig { variant: ModelKind::ModelII, n: 6, v: 0.1, alpha: 0.3, ..ModelConfig::default() };
    let layout = Layout::new(dir.path(), &cfg.paths);
    pipeline::gen_data(&cfg, &layout).unwrap();
    let trained = pipeline::train_model(&cfg, &layout).unwrap();
    let report = pipeline::interpret(&LearnedModel::load(&trained.model_path).unwrap(), None).unwrap();
    let c = &report.c_real;
    let block = [11, 14];
    let inside: Vec<f64> = block.iter().flat_map(|&i| block.iter().map(move |&j| c[i][j].abs())).collect();
    let outside = (0..15)
        .flat_map(|i| (0..15).map(move |j| (i, j)))
        .filter(|(i, j)| !(block.contains(i) && block.contains(j)))
        .map(|(i, j)| c[i][j].abs())
        .fold(0.0f64, f64::max);
    let smallest_inside = inside.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(smallest_inside > outside, "block {inside:?} vs outside max {outside:e}");
    let (a, b) = (c[11][11], c[14][14]);
    assert!((a - b).abs() < 0.05 * a.max(b), "diagonal weights {a:e} and {b:e}");
}

//! Exact dynamics of the spin chain and reduced subsystem trajectories.
//!
//! Sites are numbered from 1. Site 1 is the most significant bit of a
//! computational-basis index, and bit value 0 is spin up (the `+1`
//! eigenstate of σz), so `n_i = (1 + σz_i)/2` is 1 when bit `i` is clear.

use nalgebra::SymmetricEigen;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::spin_algebra::{build_pauli_basis, rho_to_coherence, BasisSet, CoherenceVector, DensityMatrix, Pauli};
use crate::trajectory::{Provenance, Trajectory};
use crate::{CMatrix, Error, RMatrix, Result, C64};

/// Largest chain simulated unless the caller raises the cap.
pub const DEFAULT_MAX_SPINS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelVariant {
    /// Ring with nearest-neighbour interactions and a tunable
    /// subsystem coupling `V'`.
    ModelI,
    /// Open chain with power-law interactions.
    ModelII,
}

impl ModelVariant {
    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::ModelI => "ModelI",
            ModelVariant::ModelII => "ModelII",
        }
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ModelI" | "I" | "model_i" | "model-i" => Ok(ModelVariant::ModelI),
            "ModelII" | "II" | "model_ii" | "model-ii" => Ok(ModelVariant::ModelII),
            other => Err(Error::parse("model variant", other)),
        }
    }
}

/// Parameters of one spin-chain instance. Energies are in units of `Ω`
/// when `omega = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinChainModel {
    pub variant: ModelVariant,
    pub n: usize,
    pub omega: f64,
    pub v: f64,
    /// Subsystem coupling, Model I only.
    pub v_prime: f64,
    /// Power-law exponent, Model II only.
    pub alpha: f64,
    /// Inverse bath temperature.
    pub beta: f64,
    /// 1-based sites carrying the subsystem.
    pub subsystem_sites: (usize, usize),
}

impl SpinChainModel {
    pub fn model_i(n: usize, omega: f64, v: f64, v_prime: f64, beta: f64) -> Result<Self> {
        let m = SpinChainModel {
            variant: ModelVariant::ModelI,
            n,
            omega,
            v,
            v_prime,
            alpha: 0.0,
            beta,
            subsystem_sites: (1, 2),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn model_ii(n: usize, omega: f64, v: f64, alpha: f64, beta: f64) -> Result<Self> {
        let m = SpinChainModel {
            variant: ModelVariant::ModelII,
            n,
            omega,
            v,
            v_prime: 0.0,
            alpha,
            beta,
            subsystem_sites: (n / 2, n / 2 + 1),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid(format!("chain needs at least 3 spins, got {}", self.n)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be non-negative, got {}", self.beta)));
        }
        for (name, x) in [("omega", self.omega), ("v", self.v), ("v_prime", self.v_prime), ("alpha", self.alpha)] {
            if !x.is_finite() {
                return Err(Error::invalid(format!("{name} is not finite")));
            }
        }
        match self.variant {
            ModelVariant::ModelI => {
                if self.n < 4 {
                    return Err(Error::invalid("Model I needs at least 4 spins"));
                }
                if self.subsystem_sites != (1, 2) {
                    return Err(Error::invalid("Model I subsystem must be sites (1, 2)"));
                }
            }
            ModelVariant::ModelII => {
                if self.n % 2 != 0 {
                    return Err(Error::invalid("Model II needs an even number of spins"));
                }
                if self.alpha < 0.0 {
                    return Err(Error::invalid("alpha must be non-negative"));
                }
                if self.subsystem_sites != (self.n / 2, self.n / 2 + 1) {
                    return Err(Error::invalid("Model II subsystem must be the central pair"));
                }
            }
        }
        Ok(())
    }

    pub fn subsystem(&self) -> [usize; 2] {
        [self.subsystem_sites.0, self.subsystem_sites.1]
    }

    /// Bath sites in increasing order.
    pub fn bath_sites(&self) -> Vec<usize> {
        let sub = self.subsystem();
        (1..=self.n).filter(|s| !sub.contains(s)).collect()
    }

    pub fn hamiltonian_terms(&self) -> SpinHamiltonian {
        match self.variant {
            ModelVariant::ModelI => terms_model_i(self.n, self.omega, self.v, self.v_prime),
            ModelVariant::ModelII => terms_model_ii(self.n, self.omega, self.v, self.alpha),
        }
    }
}

/// Transverse field plus density-density couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinHamiltonian {
    n: usize,
    /// `(Ω/2)` coefficient of `σx` on every site.
    half_omega: f64,
    /// `(i, j, J)` for the term `J n_i n_j`, 1-based sites.
    couplings: Vec<(usize, usize, f64)>,
}

impl SpinHamiltonian {
    pub fn num_spins(&self) -> usize {
        self.n
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    /// Terms acting only on `sites`, re-indexed to `1..=sites.len()` in the
    /// given order.
    pub fn restricted(&self, sites: &[usize]) -> SpinHamiltonian {
        let pos = |s: usize| sites.iter().position(|&x| x == s).map(|p| p + 1);
        let couplings = self
            .couplings
            .iter()
            .filter_map(|&(i, j, c)| Some((pos(i)?, pos(j)?, c)))
            .collect();
        SpinHamiltonian { n: sites.len(), half_omega: self.half_omega, couplings }
    }

    /// Diagonal (interaction) energy of a basis state.
    pub fn diagonal(&self, index: usize) -> f64 {
        let up = |site: usize| ((index >> (self.n - site)) & 1) == 0;
        self.couplings
            .iter()
            .filter(|&&(i, j, _)| up(i) && up(j))
            .map(|&(_, _, c)| c)
            .sum()
    }

    /// Dense real symmetric matrix of dimension `2^n`.
    pub fn dense(&self) -> RMatrix {
        let m = 1usize << self.n;
        let mut h = RMatrix::zeros(m, m);
        for x in 0..m {
            h[(x, x)] = self.diagonal(x);
            if self.half_omega != 0.0 {
                for bit in 0..self.n {
                    h[(x ^ (1 << bit), x)] += self.half_omega;
                }
            }
        }
        h
    }
}

fn terms_model_i(n: usize, omega: f64, v: f64, v_prime: f64) -> SpinHamiltonian {
    let mut couplings = Vec::new();
    for i in 3..n {
        couplings.push((i, i + 1, v));
    }
    couplings.push((n, 1, v_prime));
    couplings.push((1, 2, v_prime));
    couplings.push((2, 3, v_prime));
    SpinHamiltonian { n, half_omega: omega / 2.0, couplings }
}

fn terms_model_ii(n: usize, omega: f64, v: f64, alpha: f64) -> SpinHamiltonian {
    let mut couplings = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            couplings.push((i, j, v / ((j - i) as f64).powf(alpha)));
        }
    }
    SpinHamiltonian { n, half_omega: omega / 2.0, couplings }
}

/// `H_I = (Ω/2)Σσx + V Σ_{i=3}^{N−1} n_i n_{i+1} + V'(n_N n_1 + n_1 n_2 + n_2 n_3)`.
pub fn build_hamiltonian_i(n: usize, omega: f64, v: f64, v_prime: f64) -> Result<RMatrix> {
    if n < 4 {
        return Err(Error::invalid(format!("Model I needs at least 4 spins, got {n}")));
    }
    check_capacity(n, DEFAULT_MAX_SPINS)?;
    Ok(terms_model_i(n, omega, v, v_prime).dense())
}

/// `H_II = (Ω/2)Σσx + V Σ_{i<j} n_i n_j / |i−j|^α` with open boundaries.
pub fn build_hamiltonian_ii(n: usize, omega: f64, v: f64, alpha: f64) -> Result<RMatrix> {
    if n < 2 {
        return Err(Error::invalid(format!("Model II needs at least 2 spins, got {n}")));
    }
    if alpha < 0.0 {
        return Err(Error::invalid("alpha must be non-negative"));
    }
    check_capacity(n, DEFAULT_MAX_SPINS)?;
    Ok(terms_model_ii(n, omega, v, alpha).dense())
}

fn check_capacity(n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::Capacity { n, max });
    }
    Ok(())
}

/// Bath Hamiltonian: every term touching a subsystem site removed.
pub fn bath_hamiltonian(model: &SpinChainModel) -> SpinHamiltonian {
    model.hamiltonian_terms().restricted(&model.bath_sites())
}

/// `ρ_B ∝ exp(−β H_bath)` on the bath sites, in increasing site order.
pub fn bath_thermal_state(model: &SpinChainModel) -> Result<DensityMatrix> {
    model.validate()?;
    let h = bath_hamiltonian(model);
    let m = 1usize << h.num_spins();
    if model.beta == 0.0 {
        return Ok(DensityMatrix::maximally_mixed(m));
    }
    Ok(thermal_state(&h.dense(), model.beta))
}

/// Normalised Gibbs state of a real symmetric Hamiltonian.
pub fn thermal_state(h: &RMatrix, beta: f64) -> DensityMatrix {
    let eig = SymmetricEigen::new(h.clone());
    let e_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|e| (-beta * (e - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let m = h.nrows();
    let mut rho = RMatrix::zeros(m, m);
    for (k, w) in weights.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        rho.ger(*w / z, &col, &col, 1.0);
    }
    DensityMatrix::new_unchecked(rho.map(|x| C64::new(x, 0.0)))
}

/// `(M+iN)†(M+iN) / Tr[...]` for the given real factors.
pub fn density_from_factors(m: &RMatrix, n: &RMatrix) -> Result<DensityMatrix> {
    let z = CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], n[(i, j)]));
    let g = z.adjoint() * &z;
    let tr = g.trace().re;
    if !(tr > 1e-300) {
        return Err(Error::invalid("factor matrices are zero"));
    }
    let mut rho = g.map(|x| x / tr);
    // Exact Hermiticity.
    let adj = rho.adjoint();
    rho = (&rho + adj).map(|x| x * 0.5);
    Ok(DensityMatrix::new_unchecked(rho))
}

/// Random subsystem state with i.i.d. standard-normal factor entries.
pub fn random_initial_subsystem_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityMatrix {
    loop {
        let m = RMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal));
        let n = RMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal));
        if let Ok(rho) = density_from_factors(&m, &n) {
            return rho;
        }
    }
}

/// Full-chain state, pure or mixed.
#[derive(Debug, Clone)]
pub enum FullState {
    Pure(nalgebra::DVector<C64>),
    Mixed(CMatrix),
}

impl FullState {
    pub fn dim(&self) -> usize {
        match self {
            FullState::Pure(v) => v.len(),
            FullState::Mixed(m) => m.nrows(),
        }
    }
}

/// Maps between full indices and (kept, rest) index pairs.
#[derive(Debug, Clone)]
pub struct SiteLayout {
    n: usize,
    keep: Vec<usize>,
    rest: Vec<usize>,
}

impl SiteLayout {
    /// `keep` are 1-based, distinct and within `1..=n`.
    pub fn new(n: usize, keep: &[usize]) -> Result<Self> {
        for (i, &s) in keep.iter().enumerate() {
            if s == 0 || s > n {
                return Err(Error::invalid(format!("site {s} outside 1..={n}")));
            }
            if keep[..i].contains(&s) {
                return Err(Error::invalid(format!("site {s} listed twice")));
            }
        }
        let rest = (1..=n).filter(|s| !keep.contains(s)).collect();
        Ok(SiteLayout { n, keep: keep.to_vec(), rest })
    }

    fn bit(&self, site: usize) -> usize {
        self.n - site
    }

    /// Full index for kept-part index `a` and rest-part index `b`, each with
    /// its first listed site most significant.
    pub fn join(&self, a: usize, b: usize) -> usize {
        let mut x = 0usize;
        let k = self.keep.len();
        for (p, &s) in self.keep.iter().enumerate() {
            if (a >> (k - 1 - p)) & 1 == 1 {
                x |= 1 << self.bit(s);
            }
        }
        let r = self.rest.len();
        for (p, &s) in self.rest.iter().enumerate() {
            if (b >> (r - 1 - p)) & 1 == 1 {
                x |= 1 << self.bit(s);
            }
        }
        x
    }

    pub fn kept_dim(&self) -> usize {
        1 << self.keep.len()
    }

    pub fn rest_dim(&self) -> usize {
        1 << self.rest.len()
    }

    fn join_table(&self) -> Vec<Vec<usize>> {
        (0..self.kept_dim())
            .map(|a| (0..self.rest_dim()).map(|b| self.join(a, b)).collect())
            .collect()
    }

    /// Full density matrix of `ρ_keep ⊗ ρ_rest` placed on the layout's sites.
    pub fn embed_product(&self, keep: &CMatrix, rest: &CMatrix) -> CMatrix {
        let m = 1usize << self.n;
        let table = self.join_table();
        let mut out = CMatrix::zeros(m, m);
        for a in 0..self.kept_dim() {
            for a2 in 0..self.kept_dim() {
                let ka = keep[(a, a2)];
                if ka == C64::new(0.0, 0.0) {
                    continue;
                }
                for b in 0..self.rest_dim() {
                    let x = table[a][b];
                    for b2 in 0..self.rest_dim() {
                        out[(x, table[a2][b2])] = ka * rest[(b, b2)];
                    }
                }
            }
        }
        out
    }
}

fn log2_exact(m: usize) -> Result<usize> {
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::invalid(format!("dimension {m} is not a power of two")));
    }
    Ok(m.trailing_zeros() as usize)
}

/// Reduced density matrix on `keep_sites` (1-based), in the listed order.
pub fn partial_trace(rho_full: &FullState, keep_sites: &[usize]) -> Result<DensityMatrix> {
    let n = log2_exact(rho_full.dim())?;
    let layout = SiteLayout::new(n, keep_sites)?;
    let table = layout.join_table();
    let k = layout.kept_dim();
    let mut out = CMatrix::zeros(k, k);
    match rho_full {
        FullState::Mixed(rho) => {
            if !rho.is_square() {
                return Err(Error::invalid("full density matrix is not square"));
            }
            for a in 0..k {
                for a2 in 0..k {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..layout.rest_dim() {
                        acc += rho[(table[a][b], table[a2][b])];
                    }
                    out[(a, a2)] = acc;
                }
            }
        }
        FullState::Pure(psi) => {
            for a in 0..k {
                for a2 in 0..k {
                    let mut acc = C64::new(0.0, 0.0);
                    for b in 0..layout.rest_dim() {
                        acc += psi[table[a][b]] * psi[table[a2][b]].conj();
                    }
                    out[(a, a2)] = acc;
                }
            }
        }
    }
    Ok(DensityMatrix::new_unchecked(out))
}

/// Heisenberg-picture subsystem observable in the energy eigenbasis:
/// `Vᵀ (P ⊗ 𝟙_B) V = phase · real`.
struct EigenObservable {
    phase: C64,
    real: RMatrix,
}

/// Exact propagator of one chain instance, shared read-only between
/// trajectories.
pub struct ChainSimulator {
    model: SpinChainModel,
    basis: BasisSet,
    layout: SiteLayout,
    energies: Vec<f64>,
    eigenvectors: RMatrix,
    bath_state: CMatrix,
    observables: Vec<EigenObservable>,
    hamiltonian: RMatrix,
}

/// Number of time samples evaluated per dense block.
const TIME_BLOCK: usize = 512;

impl ChainSimulator {
    pub fn new(model: &SpinChainModel) -> Result<Self> {
        Self::with_max_spins(model, DEFAULT_MAX_SPINS)
    }

    pub fn with_max_spins(model: &SpinChainModel, max_spins: usize) -> Result<Self> {
        model.validate()?;
        check_capacity(model.n, max_spins)?;
        let basis = build_pauli_basis(2)?;
        let layout = SiteLayout::new(model.n, &model.subsystem())?;
        let hamiltonian = model.hamiltonian_terms().dense();
        let eig = SymmetricEigen::new(hamiltonian.clone());
        let energies: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let eigenvectors = eig.eigenvectors;
        let bath_state = bath_thermal_state(model)?.into_matrix();

        let m = 1usize << model.n;
        let mut observables = Vec::with_capacity(basis.n_traceless());
        for k in 0..basis.n_traceless() {
            let paulis = basis.pauli_string(k);
            // (P V)[y, :] = phase(x) V[x, :] with x = flip(y).
            let mut pv = RMatrix::zeros(m, m);
            let mut phase0 = None;
            for x in 0..m {
                let mut y = x;
                let mut ph = C64::new(1.0, 0.0);
                for (p, &site) in paulis.iter().zip(&layout.keep) {
                    let bitpos = model.n - site;
                    let bit = ((x >> bitpos) & 1) as u8;
                    let (nb, f) = p.act(bit);
                    ph *= f;
                    y = (y & !(1 << bitpos)) | ((nb as usize) << bitpos);
                }
                let base = *phase0.get_or_insert(if ph.re.abs() > 0.5 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 1.0)
                });
                let sign = (ph / base).re;
                for c in 0..m {
                    pv[(y, c)] = sign * eigenvectors[(x, c)];
                }
            }
            let real = eigenvectors.transpose() * pv;
            observables.push(EigenObservable { phase: phase0.unwrap(), real });
        }
        Ok(ChainSimulator {
            model: model.clone(),
            basis,
            layout,
            energies,
            eigenvectors,
            bath_state,
            observables,
            hamiltonian,
        })
    }

    pub fn model(&self) -> &SpinChainModel {
        &self.model
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn hamiltonian(&self) -> &RMatrix {
        &self.hamiltonian
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn bath_state(&self) -> &CMatrix {
        &self.bath_state
    }

    /// `ρ(0) = ρ_S ⊗ ρ_B` with `ρ_S` on the subsystem sites.
    pub fn initial_full_state(&self, rho_s0: &DensityMatrix) -> Result<CMatrix> {
        if rho_s0.dim() != 4 {
            return Err(Error::ShapeMismatch { expected: "4x4".into(), got: format!("{0}x{0}", rho_s0.dim()) });
        }
        Ok(self.layout.embed_product(rho_s0.matrix(), &self.bath_state))
    }

    /// `Vᵀ ρ V` split into real and imaginary parts.
    fn to_eigenbasis(&self, rho: &CMatrix) -> (RMatrix, RMatrix) {
        let v = &self.eigenvectors;
        let vt = v.transpose();
        let re = rho.map(|z| z.re);
        let im = rho.map(|z| z.im);
        (&vt * re * v, &vt * im * v)
    }

    /// Full state `U_t ρ(0) U_t†`.
    pub fn full_state_at(&self, rho_s0: &DensityMatrix, t: f64) -> Result<CMatrix> {
        let rho0 = self.initial_full_state(rho_s0)?;
        let (re, im) = self.to_eigenbasis(&rho0);
        let m = self.energies.len();
        let mut rt = CMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                let ph = C64::from_polar(1.0, -(self.energies[a] - self.energies[b]) * t);
                rt[(a, b)] = C64::new(re[(a, b)], im[(a, b)]) * ph;
            }
        }
        let v = self.eigenvectors.map(|x| C64::new(x, 0.0));
        Ok(&v * rt * v.transpose())
    }

    /// Reduced coherence vectors at `t = 0, dt, …, n_steps·dt`.
    pub fn evolve_and_reduce(
        &self,
        rho_s0: &DensityMatrix,
        dt: f64,
        n_steps: usize,
        seed: u64,
    ) -> Result<Trajectory> {
        let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        let mut snapshots = self.reduced_at_times(rho_s0, &times)?;
        snapshots[0] = rho_to_coherence(rho_s0, &self.basis)?;
        Trajectory::new(Provenance::SpinChain(self.model.clone()), 4, dt, snapshots, seed)
    }

    /// Trajectory from the seeded random initial subsystem state.
    pub fn simulate_seeded(&self, seed: u64, dt: f64, n_steps: usize) -> Result<Trajectory> {
        let rho = seeded_initial_state(seed);
        self.evolve_and_reduce(&rho, dt, n_steps, seed)
    }

    /// Reduced coherence vectors at arbitrary times.
    pub fn reduced_at_times(&self, rho_s0: &DensityMatrix, times: &[f64]) -> Result<Vec<CoherenceVector>> {
        let rho0 = self.initial_full_state(rho_s0)?;
        let (rho_re, rho_im) = self.to_eigenbasis(&rho0);
        let m = self.energies.len();
        let nk = self.observables.len();
        let norm = 0.5; // F_k = P_k / 2 for two spins.
        let mut out = vec![vec![0.0; nk]; times.len()];

        let mut w_re = RMatrix::zeros(m, m);
        let mut w_im = RMatrix::zeros(m, m);
        for (k, obs) in self.observables.iter().enumerate() {
            // W[a,b] = Õ[b,a] ρ̃0[a,b], a Hermitian matrix.
            for a in 0..m {
                for b in 0..m {
                    let o = obs.phase * obs.real[(b, a)];
                    let r = C64::new(rho_re[(a, b)], rho_im[(a, b)]);
                    let w = o * r;
                    w_re[(a, b)] = w.re;
                    w_im[(a, b)] = w.im;
                }
            }
            for (block, chunk) in times.chunks(TIME_BLOCK).enumerate() {
                let nt = chunk.len();
                // q[b, t] = exp(i E_b t)
                let q_re = RMatrix::from_fn(m, nt, |b, j| (self.energies[b] * chunk[j]).cos());
                let q_im = RMatrix::from_fn(m, nt, |b, j| (self.energies[b] * chunk[j]).sin());
                // y = W q
                let y_re = &w_re * &q_re - &w_im * &q_im;
                let y_im = &w_re * &q_im + &w_im * &q_re;
                // v(t) = Re Σ_a conj(q[a,t]) y[a,t]
                for j in 0..nt {
                    let mut acc = 0.0;
                    for a in 0..m {
                        acc += q_re[(a, j)] * y_re[(a, j)] + q_im[(a, j)] * y_im[(a, j)];
                    }
                    out[block * TIME_BLOCK + j][k] = norm * acc;
                }
            }
        }
        out.iter()
            .map(|comps| CoherenceVector::from_traceless(comps, &self.basis))
            .collect()
    }

    /// `⟨H_{S+B}⟩` of a full state.
    pub fn energy(&self, rho_full: &CMatrix) -> f64 {
        let h = self.hamiltonian.map(|x| C64::new(x, 0.0));
        crate::spin_algebra::trace_product(&h, rho_full).re
    }
}

/// Two-spin initial state drawn from the RNG seeded with `seed`.
pub fn seeded_initial_state(seed: u64) -> DensityMatrix {
    seeded_initial_state_dim(seed, 4)
}

/// [`seeded_initial_state`] for a `d`-level subsystem.
pub fn seeded_initial_state_dim(seed: u64, d: usize) -> DensityMatrix {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    random_initial_subsystem_state(&mut rng, d)
}

/// Dimension-agnostic Pauli helper used by tests: `σ_{p}` on `site` of `n`.
pub fn site_operator(n: usize, site: usize, p: Pauli) -> CMatrix {
    let mut m = CMatrix::identity(1, 1);
    for s in 1..=n {
        let f = if s == site { p.matrix() } else { Pauli::I.matrix() };
        m = m.kronecker(&f);
    }
    m
}

//! Constrained Lindblad generators acting on coherence vectors.
//!
//! A generator is parametrized by `θ = (ω, X, Y)`. The Hamiltonian is
//! `H = Σ ω_l F_l` and the Kossakowski matrix is `c = Z†Z` with `Z = X + iY`,
//! so every parameter value yields a completely positive, trace-preserving
//! semigroup. The real matrix `L` satisfies `dv/dt = L v`.

mod expm;
mod model_file;
mod spectral;

pub use expm::{expm, propagate, ExpmTape};
pub use model_file::LearnedModel;
pub use spectral::{jump_decomposition, stationary_state, JumpDecomposition, SpectralInfo};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::spin_algebra::{min_eigenvalue, BasisSet, CoherenceVector, StructureConstants};
use crate::{CMatrix, Error, RMatrix, RVector, Result, C64};

/// Variational parameters `θ = (ω, X, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub omega: RVector,
    pub x: RMatrix,
    pub y: RMatrix,
}

impl GeneratorParams {
    pub fn zeros(n: usize) -> Self {
        GeneratorParams { omega: RVector::zeros(n), x: RMatrix::zeros(n, n), y: RMatrix::zeros(n, n) }
    }

    /// I.i.d. normal entries with standard deviation `scale`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Self {
        let mut g = || scale * rng.sample::<f64, _>(StandardNormal);
        let omega = RVector::from_fn(n, |_, _| g());
        let x = RMatrix::from_fn(n, n, |_, _| g());
        let y = RMatrix::from_fn(n, n, |_, _| g());
        GeneratorParams { omega, x, y }
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.x.shape() != (n, n) || self.y.shape() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: format!("{n}x{n} factors"),
                got: format!("{:?} and {:?}", self.x.shape(), self.y.shape()),
            });
        }
        if self.flatten().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameters contain non-finite entries"));
        }
        Ok(())
    }

    /// Number of scalar parameters, `n + 2n²`.
    pub fn len(&self) -> usize {
        let n = self.n();
        n + 2 * n * n
    }

    pub fn is_empty(&self) -> bool {
        self.n() == 0
    }

    /// `[ω, X (column-major), Y (column-major)]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(self.omega.as_slice());
        v.extend_from_slice(self.x.as_slice());
        v.extend_from_slice(self.y.as_slice());
        v
    }

    pub fn from_flat(n: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != n + 2 * n * n {
            return Err(Error::ShapeMismatch { expected: format!("{} values", n + 2 * n * n), got: flat.len().to_string() });
        }
        let omega = RVector::from_column_slice(&flat[..n]);
        let x = RMatrix::from_column_slice(n, n, &flat[n..n + n * n]);
        let y = RMatrix::from_column_slice(n, n, &flat[n + n * n..]);
        Ok(GeneratorParams { omega, x, y })
    }

    pub fn kossakowski(&self) -> KossakowskiMatrix {
        kossakowski_from_factors(&self.x, &self.y)
    }

    /// Applies a real orthogonal `q` to both factors; `c` is unchanged.
    pub fn gauge_rotated(&self, q: &RMatrix) -> Self {
        GeneratorParams { omega: self.omega.clone(), x: q * &self.x, y: q * &self.y }
    }
}

/// Positive semi-definite Hermitian dissipation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KossakowskiMatrix(CMatrix);

impl KossakowskiMatrix {
    /// Wraps a Hermitian PSD matrix after checking it.
    pub fn new(c: CMatrix) -> Result<Self> {
        if !c.is_square() {
            return Err(Error::invalid("Kossakowski matrix must be square"));
        }
        if crate::spin_algebra::hermiticity_defect(&c) > 1e-12 {
            return Err(Error::invalid("Kossakowski matrix must be Hermitian"));
        }
        let m = min_eigenvalue(&c);
        if m < -crate::spin_algebra::PSD_TOL {
            return Err(Error::invalid(format!("Kossakowski matrix has eigenvalue {m:e}")));
        }
        Ok(KossakowskiMatrix(c))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn real(&self) -> RMatrix {
        self.0.map(|z| z.re)
    }

    pub fn imag(&self) -> RMatrix {
        self.0.map(|z| z.im)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }
}

/// `c = (X − iY)ᵀ(X + iY)`: `Re c = XᵀX + YᵀY`, `Im c = XᵀY − YᵀX`.
pub fn kossakowski_from_factors(x: &RMatrix, y: &RMatrix) -> KossakowskiMatrix {
    let xt = x.transpose();
    let yt = y.transpose();
    let re = &xt * x + &yt * y;
    let im = &xt * y - &yt * x;
    let n = re.nrows();
    KossakowskiMatrix(CMatrix::from_fn(n, n, |i, j| C64::new(re[(i, j)], im[(i, j)])))
}

/// Real generator `L = H + D` on coherence vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    pub l: RMatrix,
    pub h_part: RMatrix,
    pub d_part: RMatrix,
}

impl GeneratorMatrix {
    pub fn from_parts(h_part: RMatrix, d_part: RMatrix) -> Self {
        GeneratorMatrix { l: &h_part + &d_part, h_part, d_part }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_parts(RMatrix::zeros(dim, dim), RMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }
}

/// Basis-dependent linear maps from `(ω, Re c, Im c)` to `L`, stored as
/// columns of flattened `d² × d²` matrices.
#[derive(Debug, Clone)]
pub struct DissipatorTensors {
    n: usize,
    dim: usize,
    /// `G^(l)`, one column per Hamiltonian coefficient.
    ham: RMatrix,
    /// `A^(ij)`, `i ≤ j`, row-major upper-triangle order.
    sym: RMatrix,
    /// `B^(ij)`, `i < j`, row-major strict-upper order.
    anti: RMatrix,
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    // Entries before row i: n + (n-1) + … + (n-i+1).
    i * n - i * (i.saturating_sub(1)) / 2 + (j - i)
}

fn strict_upper_index(n: usize, i: usize, j: usize) -> usize {
    i * (n - 1) - i * (i.saturating_sub(1)) / 2 + (j - i - 1)
}

/// Projects superoperator action `S[F_k]` onto the basis: column `k` of the
/// returned matrix is `(Tr(F_h S[F_k]))_h`.
fn superoperator_matrix(basis: &BasisSet, mut apply: impl FnMut(&CMatrix) -> CMatrix) -> CMatrix {
    let m = basis.len();
    let mut out = CMatrix::zeros(m, m);
    for k in 0..m {
        let col = basis.project_complex(&apply(basis.element(k)));
        for (h, v) in col.into_iter().enumerate() {
            out[(h, k)] = v;
        }
    }
    out
}

/// Projected dissipator term `ρ ↦ F_i ρ F_j − ½{F_j F_i, ρ}`.
fn dissipator_term(basis: &BasisSet, i: usize, j: usize) -> CMatrix {
    let fi = basis.element(i);
    let fj = basis.element(j);
    let fji = fj * fi;
    superoperator_matrix(basis, |rho| {
        let anti = &fji * rho + rho * &fji;
        fi * rho * fj - anti.map(|z| z * 0.5)
    })
}

/// Projected commutator `ρ ↦ −i[F_l, ρ]`.
fn hamiltonian_term(basis: &BasisSet, l: usize) -> RMatrix {
    let fl = basis.element(l);
    let mi = C64::new(0.0, -1.0);
    superoperator_matrix(basis, |rho| (fl * rho - rho * fl).map(|z| z * mi)).map(|z| z.re)
}

/// Computes the Hamiltonian and dissipator tensors by direct projection.
pub fn precompute_dissipator_tensors(basis: &BasisSet) -> DissipatorTensors {
    let n = basis.n_traceless();
    let dim = basis.len();
    let dd = dim * dim;
    let mut ham = RMatrix::zeros(dd, n);
    for l in 0..n {
        ham.column_mut(l).copy_from_slice(hamiltonian_term(basis, l).as_slice());
    }
    let terms: Vec<Vec<CMatrix>> = (0..n).map(|i| (0..n).map(|j| dissipator_term(basis, i, j)).collect()).collect();
    let mut sym = RMatrix::zeros(dd, n * (n + 1) / 2);
    let mut anti = RMatrix::zeros(dd, n * (n - 1) / 2);
    for i in 0..n {
        for j in i..n {
            let a = if i == j {
                terms[i][i].map(|z| z.re)
            } else {
                (&terms[i][j] + &terms[j][i]).map(|z| z.re)
            };
            sym.column_mut(upper_index(n, i, j)).copy_from_slice(a.as_slice());
            if i < j {
                let b = (&terms[i][j] - &terms[j][i]).map(|z| -z.im);
                anti.column_mut(strict_upper_index(n, i, j)).copy_from_slice(b.as_slice());
            }
        }
    }
    DissipatorTensors { n, dim, ham, sym, anti }
}

impl DissipatorTensors {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn unflatten(&self, col: nalgebra::DVectorView<'_, f64>) -> RMatrix {
        RMatrix::from_column_slice(self.dim, self.dim, col.as_slice())
    }

    /// `A^(ij)` for `i ≤ j` (zero-based).
    pub fn sym(&self, i: usize, j: usize) -> RMatrix {
        let (i, j) = (i.min(j), i.max(j));
        self.unflatten(self.sym.column(upper_index(self.n, i, j)))
    }

    /// `B^(ij)` for `i < j` (zero-based).
    pub fn anti(&self, i: usize, j: usize) -> RMatrix {
        assert!(i < j, "antisymmetric tensors need i < j");
        self.unflatten(self.anti.column(strict_upper_index(self.n, i, j)))
    }

    /// `G^(l)`, the projected commutator with `F_l`.
    pub fn ham(&self, l: usize) -> RMatrix {
        self.unflatten(self.ham.column(l))
    }

    /// `Σ ω_l G^(l)`.
    pub fn hamiltonian_part(&self, omega: &RVector) -> RMatrix {
        let v = &self.ham * omega;
        RMatrix::from_column_slice(self.dim, self.dim, v.as_slice())
    }

    /// `Σ_{i≤j} Re c_ij A^(ij) + Σ_{i<j} Im c_ij B^(ij)`.
    pub fn dissipative_part(&self, c: &KossakowskiMatrix) -> RMatrix {
        let (re, im) = (c.real(), c.imag());
        let n = self.n;
        let mut r = RVector::zeros(self.sym.ncols());
        let mut s = RVector::zeros(self.anti.ncols());
        for i in 0..n {
            for j in i..n {
                r[upper_index(n, i, j)] = re[(i, j)];
                if i < j {
                    s[strict_upper_index(n, i, j)] = im[(i, j)];
                }
            }
        }
        let v = &self.sym * r + &self.anti * s;
        RMatrix::from_column_slice(self.dim, self.dim, v.as_slice())
    }

    /// Pulls a gradient with respect to `L` back to `(ω, X, Y)`.
    pub fn pullback(&self, params: &GeneratorParams, grad_l: &RMatrix) -> GeneratorParams {
        let n = self.n;
        let gl = RVector::from_column_slice(grad_l.as_slice());
        let d_omega = self.ham.tr_mul(&gl);
        let dr_flat = self.sym.tr_mul(&gl);
        let di_flat = self.anti.tr_mul(&gl);
        let mut dr = RMatrix::zeros(n, n);
        let mut di = RMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                dr[(i, j)] = dr_flat[upper_index(n, i, j)];
                if i < j {
                    di[(i, j)] = di_flat[strict_upper_index(n, i, j)];
                }
            }
        }
        let dr_sym = &dr + dr.transpose();
        let di_anti = &di - di.transpose();
        let dx = &params.x * &dr_sym - &params.y * &di_anti;
        let dy = &params.y * &dr_sym + &params.x * &di_anti;
        GeneratorParams { omega: d_omega, x: dx, y: dy }
    }
}

/// Assembles `L = H + D` from `θ` using the projected tensors.
pub fn assemble_generator(params: &GeneratorParams, basis: &BasisSet, tensors: &DissipatorTensors) -> Result<GeneratorMatrix> {
    params.validate()?;
    if params.n() != basis.n_traceless() || tensors.n() != basis.n_traceless() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} traceless components", basis.n_traceless()),
            got: params.n().to_string(),
        });
    }
    let h = tensors.hamiltonian_part(&params.omega);
    let d = tensors.dissipative_part(&params.kossakowski());
    Ok(GeneratorMatrix::from_parts(h, d))
}

/// Same generator from structure constants:
///
/// `H_mn = −Σ_l f_mnl ω_l`,
/// `D_mn = −½ Σ_ijk (f_mik f_njk Re c_ij + f_mik d_njk Im c_ij)`,
/// `D_{m,d²} = −(1/√d) Σ_ij f_ijm Im c_ij`.
pub fn assemble_generator_fast(params: &GeneratorParams, sc: &StructureConstants) -> Result<GeneratorMatrix> {
    params.validate()?;
    let n = sc.n();
    if params.n() != n {
        return Err(Error::ShapeMismatch { expected: format!("{n} traceless components"), got: params.n().to_string() });
    }
    let dim = n + 1;
    let sqrt_d = (dim as f64).sqrt().sqrt();
    let c = params.kossakowski();
    let (re, im) = (c.real(), c.imag());
    let mut h = RMatrix::zeros(dim, dim);
    let mut d = RMatrix::zeros(dim, dim);
    for m in 0..n {
        for k in 0..n {
            h[(m, k)] = -(0..n).map(|l| sc.f(m, k, l) * params.omega[l]).sum::<f64>();
        }
    }
    // t_re[m][j][k] = Σ_i f_mik Re c_ij, t_im likewise.
    let mut t_re = vec![0.0; n * n * n];
    let mut t_im = vec![0.0; n * n * n];
    for m in 0..n {
        for i in 0..n {
            for k in 0..n {
                let f = sc.f(m, i, k);
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    t_re[(m * n + j) * n + k] += f * re[(i, j)];
                    t_im[(m * n + j) * n + k] += f * im[(i, j)];
                }
            }
        }
    }
    for m in 0..n {
        for nn in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                for k in 0..n {
                    let tr = t_re[(m * n + j) * n + k];
                    let ti = t_im[(m * n + j) * n + k];
                    if tr != 0.0 {
                        acc += tr * sc.f(nn, j, k);
                    }
                    if ti != 0.0 {
                        acc += ti * sc.d(nn, j, k);
                    }
                }
            }
            d[(m, nn)] = -0.5 * acc;
        }
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += sc.f(i, j, m) * im[(i, j)];
            }
        }
        d[(m, n)] = -acc / sqrt_d;
    }
    Ok(GeneratorMatrix::from_parts(h, d))
}

/// `v_k = M^k v_0` for `k = 0..=n_steps`.
pub fn predict(propagator: &RMatrix, v0: &CoherenceVector, n_steps: usize) -> Vec<CoherenceVector> {
    let d = (v0.len() as f64).sqrt().round() as usize;
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut v = v0.as_vector().clone();
    out.push(v0.clone());
    for _ in 0..n_steps {
        v = propagator * &v;
        out.push(CoherenceVector::pinned(v.clone(), d));
    }
    out
}

/// `H = Σ ω_l F_l`.
pub fn extract_hamiltonian(params: &GeneratorParams, basis: &BasisSet) -> CMatrix {
    let coeffs: Vec<C64> = params.omega.iter().map(|&w| C64::new(w, 0.0)).collect();
    basis.combine(&coeffs)
}

/// Projects `𝒟[ρ] = Σ c_ij (F_i ρ F_j − ½{F_j F_i, ρ})` onto the basis
/// without any precomputed tensors.
pub fn project_dissipator(c: &CMatrix, basis: &BasisSet) -> RMatrix {
    let n = basis.n_traceless();
    superoperator_matrix(basis, |rho| {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for i in 0..n {
            for j in 0..n {
                let cij = c[(i, j)];
                if cij == C64::new(0.0, 0.0) {
                    continue;
                }
                let fi = basis.element(i);
                let fj = basis.element(j);
                let fji = fj * fi;
                let term = fi * rho * fj - (&fji * rho + rho * &fji).map(|z| z * 0.5);
                out += term.map(|z| z * cij);
            }
        }
        out
    })
    .map(|z| z.re)
}

/// Projects `ρ ↦ −i[H, ρ]` onto the basis.
pub fn project_hamiltonian(h: &CMatrix, basis: &BasisSet) -> RMatrix {
    let mi = C64::new(0.0, -1.0);
    superoperator_matrix(basis, |rho| (h * rho - rho * h).map(|z| z * mi)).map(|z| z.re)
}

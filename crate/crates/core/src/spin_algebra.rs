//! Pauli operator bases, structure constants and the coherence-vector map.
//!
//! The basis for `k` spins is the tensor product of
//! `{σx, σy, σz, 𝟙}/√2` per site in lexicographic order, first site most
//! significant, so element `4a + b` of the two-spin basis is
//! `P_a ⊗ P_b / 2` and the last element is `𝟙/√d`.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, Error, RVector, Result, C64};

/// Identifier stored in every persisted artifact that depends on the basis
/// ordering and normalisation.
pub const CONVENTION_ID: &str = "pauli-lex-xyzI-site1-msb-v1";

/// Eigenvalues above `-PSD_TOL` count as non-negative.
pub const PSD_TOL: f64 = 1e-10;

/// Hermiticity / unit-trace tolerance for density matrices.
pub const STATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
    I,
}

impl Pauli {
    pub const ORDER: [Pauli; 4] = [Pauli::X, Pauli::Y, Pauli::Z, Pauli::I];

    pub fn matrix(self) -> CMatrix {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::X => CMatrix::from_row_slice(2, 2, &[o, l, l, o]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
            Pauli::I => CMatrix::identity(2, 2),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::X => 'x',
            Pauli::Y => 'y',
            Pauli::Z => 'z',
            Pauli::I => '1',
        }
    }

    /// Action on a computational basis bit: `P|b⟩ = phase · |b'⟩`.
    pub fn act(self, bit: u8) -> (u8, C64) {
        match (self, bit) {
            (Pauli::I, b) => (b, C64::new(1.0, 0.0)),
            (Pauli::X, b) => (1 - b, C64::new(1.0, 0.0)),
            // σy|0⟩ = i|1⟩, σy|1⟩ = −i|0⟩ with |0⟩ the +1 eigenstate of σz.
            (Pauli::Y, 0) => (1, C64::new(0.0, 1.0)),
            (Pauli::Y, _) => (0, C64::new(0.0, -1.0)),
            (Pauli::Z, 0) => (0, C64::new(1.0, 0.0)),
            (Pauli::Z, _) => (1, C64::new(-1.0, 0.0)),
        }
    }
}

/// Kronecker product of complex matrices.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Hermitian orthonormal operator basis of the subsystem algebra.
#[derive(Debug, Clone)]
pub struct BasisSet {
    num_spins: usize,
    dim: usize,
    elements: Vec<CMatrix>,
    strings: Vec<Vec<Pauli>>,
    convention_id: String,
}

/// Tensor-product Pauli basis for `num_spins` spins.
pub fn build_pauli_basis(num_spins: usize) -> Result<BasisSet> {
    if num_spins == 0 {
        return Err(Error::invalid("basis needs at least one spin"));
    }
    if num_spins > 6 {
        return Err(Error::invalid(format!("{num_spins}-spin basis is too large")));
    }
    let dim = 1usize << num_spins;
    let count = dim * dim;
    let norm = (dim as f64).sqrt().recip();
    let mut elements = Vec::with_capacity(count);
    let mut strings = Vec::with_capacity(count);
    for index in 0..count {
        let mut paulis = Vec::with_capacity(num_spins);
        for site in 0..num_spins {
            let digit = (index >> (2 * (num_spins - 1 - site))) & 3;
            paulis.push(Pauli::ORDER[digit]);
        }
        let mut m = paulis[0].matrix();
        for p in &paulis[1..] {
            m = kron(&m, &p.matrix());
        }
        elements.push(m.map(|z| z * norm));
        strings.push(paulis);
    }
    Ok(BasisSet {
        num_spins,
        dim,
        elements,
        strings,
        convention_id: CONVENTION_ID.to_string(),
    })
}

impl BasisSet {
    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    /// Number of basis elements, `d²`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Number of traceless elements, `d² − 1`.
    pub fn n_traceless(&self) -> usize {
        self.elements.len() - 1
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &CMatrix {
        &self.elements[i]
    }

    /// Pauli string of element `i`, one entry per site.
    pub fn pauli_string(&self, i: usize) -> &[Pauli] {
        &self.strings[i]
    }

    /// Compact label such as `"z1"` for `σz ⊗ 𝟙 / 2`.
    pub fn label(&self, i: usize) -> String {
        self.strings[i].iter().map(|p| p.symbol()).collect()
    }

    /// Index of the element with the given Pauli string.
    pub fn index_of(&self, paulis: &[Pauli]) -> Option<usize> {
        self.strings.iter().position(|s| s.as_slice() == paulis)
    }

    pub fn convention_id(&self) -> &str {
        &self.convention_id
    }

    /// The fixed last component `1/√d` of every coherence vector.
    pub fn identity_component(&self) -> f64 {
        (self.dim as f64).sqrt().recip()
    }

    /// Expands `Σ coeffs_i F_i` over the first `coeffs.len()` elements.
    pub fn combine(&self, coeffs: &[C64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (c, f) in coeffs.iter().zip(&self.elements) {
            if *c != C64::new(0.0, 0.0) {
                out += f.map(|z| z * c);
            }
        }
        out
    }

    /// Real expansion coefficients `Tr(F_i A)` of a Hermitian matrix.
    pub fn project(&self, a: &CMatrix) -> RVector {
        RVector::from_iterator(self.len(), self.elements.iter().map(|f| trace_product(f, a).re))
    }

    /// Complex expansion coefficients of an arbitrary matrix.
    pub fn project_complex(&self, a: &CMatrix) -> Vec<C64> {
        self.elements.iter().map(|f| trace_product(f, a)).collect()
    }
}

/// Real antisymmetric (`f`) and symmetric (`d`) structure constants for the
/// traceless part of a basis:
///
/// `[F_i, F_j] = i Σ_k f_ijk F_k`, `{F_i, F_j} = (2δ_ij/d) 𝟙 + Σ_k d_ijk F_k`.
#[derive(Debug, Clone)]
pub struct StructureConstants {
    n: usize,
    f: Vec<f64>,
    d: Vec<f64>,
}

impl StructureConstants {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    /// `f_ijk`, zero-based indices into the traceless elements.
    #[inline]
    pub fn f(&self, i: usize, j: usize, k: usize) -> f64 {
        self.f[self.idx(i, j, k)]
    }

    /// `d_ijk`, zero-based indices into the traceless elements.
    #[inline]
    pub fn d(&self, i: usize, j: usize, k: usize) -> f64 {
        self.d[self.idx(i, j, k)]
    }
}

/// Evaluates `f_ijk = −i Tr([F_i,F_j] F_k)` and `d_ijk = Tr({F_i,F_j} F_k)`.
pub fn compute_structure_constants(basis: &BasisSet) -> StructureConstants {
    let n = basis.n_traceless();
    let mut f = vec![0.0; n * n * n];
    let mut d = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let fi = basis.element(i);
            let fj = basis.element(j);
            let prod = fi * fj;
            let rev = fj * fi;
            let comm = &prod - &rev;
            let anti = &prod + &rev;
            for k in 0..n {
                let fk = basis.element(k);
                let c = trace_product(&comm, fk);
                let a = trace_product(&anti, fk);
                f[(i * n + j) * n + k] = (C64::new(0.0, -1.0) * c).re;
                d[(i * n + j) * n + k] = a.re;
            }
        }
    }
    StructureConstants { n, f, d }
}

/// Density matrix of a `d`-level system.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        let herm = hermiticity_defect(&m);
        if herm > STATE_TOL {
            return Err(Error::invalid(format!("matrix is not Hermitian (defect {herm:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::invalid(format!("trace is {tr}, expected 1")));
        }
        let min = min_eigenvalue(&m);
        if min < -PSD_TOL {
            return Err(Error::invalid(format!("minimum eigenvalue {min:e} is negative")));
        }
        Ok(DensityMatrix(m))
    }

    /// Wraps a matrix without any checks.
    pub fn new_unchecked(m: CMatrix) -> Self {
        DensityMatrix(m)
    }

    /// Pure state `|ψ⟩⟨ψ|` of a normalised vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("state vector has norm {norm}")));
        }
        Ok(DensityMatrix(&v * v.adjoint()))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix(CMatrix::identity(d, d).map(|z| z / d as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.0, &self.0).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }
}

/// Max-norm of `A − A†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let diff = m - m.adjoint();
    diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()).map(|z| z * 0.5);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Real coherence vector `v_i = Tr(F_i ρ)`; the last component is pinned to
/// `1/√d`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceVector(RVector);

impl CoherenceVector {
    /// Builds a vector from its `d² − 1` free components.
    pub fn from_traceless(components: &[f64], basis: &BasisSet) -> Result<Self> {
        if components.len() != basis.n_traceless() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} components", basis.n_traceless()),
                got: components.len().to_string(),
            });
        }
        let mut v = RVector::zeros(basis.len());
        v.rows_mut(0, components.len()).copy_from_slice(components);
        v[basis.len() - 1] = basis.identity_component();
        Ok(CoherenceVector(v))
    }

    /// Accepts a full `d²` vector whose last entry must be `1/√d` to 1e-12;
    /// it is then set exactly.
    pub fn from_full(v: RVector, d: usize) -> Result<Self> {
        if v.len() != d * d {
            return Err(Error::ShapeMismatch {
                expected: format!("{} components", d * d),
                got: v.len().to_string(),
            });
        }
        let id = (d as f64).sqrt().recip();
        let last = v[v.len() - 1];
        if (last - id).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "identity component is {last}, expected {id}"
            )));
        }
        Ok(Self::pinned(v, d))
    }

    /// Overwrites the last component with `1/√d` and wraps.
    pub fn pinned(mut v: RVector, d: usize) -> Self {
        let n = v.len();
        v[n - 1] = (d as f64).sqrt().recip();
        CoherenceVector(v)
    }

    pub fn as_vector(&self) -> &RVector {
        &self.0
    }

    pub fn into_vector(self) -> RVector {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `v_i = Tr(F_i ρ)` for a density matrix.
pub fn rho_to_coherence(rho: &DensityMatrix, basis: &BasisSet) -> Result<CoherenceVector> {
    matrix_to_coherence(rho.matrix(), basis)
}

/// Same as [`rho_to_coherence`] for any square matrix of the right size.
pub fn matrix_to_coherence(m: &CMatrix, basis: &BasisSet) -> Result<CoherenceVector> {
    if m.nrows() != basis.dim() || m.ncols() != basis.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", basis.dim()),
            got: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(CoherenceVector::pinned(basis.project(m), basis.dim()))
}

/// Matrix rebuilt from a coherence vector, with its smallest eigenvalue.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub matrix: CMatrix,
    pub min_eigenvalue: f64,
}

impl Reconstruction {
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= -PSD_TOL
    }

    pub fn into_density(self) -> Result<DensityMatrix> {
        if !self.is_psd() {
            return Err(Error::invalid(format!(
                "reconstructed matrix has eigenvalue {:e}",
                self.min_eigenvalue
            )));
        }
        Ok(DensityMatrix::new_unchecked(self.matrix))
    }
}

/// `ρ = 𝟙/d + Σ_{i<d²} v_i F_i`.
pub fn coherence_to_rho(v: &CoherenceVector, basis: &BasisSet) -> Reconstruction {
    let matrix = coherence_to_matrix(v.as_slice(), basis);
    let min_eigenvalue = min_eigenvalue(&matrix);
    Reconstruction { matrix, min_eigenvalue }
}

/// Matrix of a coherence vector without the eigenvalue check.
pub fn coherence_to_matrix(v: &[f64], basis: &BasisSet) -> CMatrix {
    let d = basis.dim();
    let mut m = CMatrix::identity(d, d).map(|z| z / d as f64);
    for (vi, f) in v.iter().zip(basis.elements()).take(basis.n_traceless()) {
        if *vi != 0.0 {
            m += f.map(|z| z * *vi);
        }
    }
    m
}

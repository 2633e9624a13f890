//! Spectrum, stationary state and jump-operator decomposition.

use nalgebra::SymmetricEigen;

use super::{GeneratorMatrix, KossakowskiMatrix};
use crate::spin_algebra::{coherence_to_rho, BasisSet, CoherenceVector};
use crate::{CMatrix, Error, RMatrix, Result, C64};

/// Second-smallest eigenvalue modulus below which the null space counts as
/// degenerate.
pub const NULL_TOL: f64 = 1e-10;
/// Gaps below this are reported as absent.
pub const GAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SpectralInfo {
    /// Eigenvalues of `L`, ascending by modulus.
    pub eigenvalues: Vec<C64>,
    pub v_st: CoherenceVector,
    /// Smallest `|Re λ|` over the non-stationary eigenvalues.
    pub e_gap: f64,
    /// `1/E_gap`, absent when there is no gap.
    pub tau: Option<f64>,
    /// Set when more than one eigenvalue is numerically zero.
    pub non_unique: bool,
    /// `max |L v_st|`.
    pub residual: f64,
    /// Minimum eigenvalue of the stationary density matrix.
    pub rho_min_eigenvalue: f64,
}

impl SpectralInfo {
    pub fn has_gap(&self) -> bool {
        self.tau.is_some()
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `τ`, or an error naming why it is undefined.
    pub fn require_tau(&self) -> Result<f64> {
        if self.non_unique {
            return Err(Error::Undefined("stationary state is not unique".into()));
        }
        self.tau.ok_or_else(|| Error::Undefined(format!("no spectral gap (E_gap = {:e})", self.e_gap)))
    }
}

/// Null vector of `L` with the identity component fixed, plus the spectral
/// gap and relaxation time.
pub fn stationary_state(generator: &GeneratorMatrix, basis: &BasisSet) -> Result<SpectralInfo> {
    let l = &generator.l;
    let dim = l.nrows();
    if dim != basis.len() || !l.is_square() {
        return Err(Error::ShapeMismatch { expected: format!("{0}x{0}", basis.len()), got: format!("{}x{}", l.nrows(), l.ncols()) });
    }
    if l.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("generator has non-finite entries"));
    }
    let n = dim - 1;
    let mut eigenvalues: Vec<C64> = l.clone().complex_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let non_unique = eigenvalues.len() > 1 && eigenvalues[1].norm() < NULL_TOL;
    let e_gap = eigenvalues[1..].iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let tau = if e_gap < GAP_TOL || !e_gap.is_finite() { None } else { Some(1.0 / e_gap) };

    // L_n v' = −L[:n, d²] / √d on the traceless block.
    let id = basis.identity_component();
    let block = l.view((0, 0), (n, n)).into_owned();
    let rhs = -l.view((0, n), (n, 1)).column(0).into_owned() * id;
    let svd = block.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-13 * svd.singular_values.max().max(1.0))
        .map_err(|e| Error::invalid(format!("stationary solve failed: {e}")))?;
    let v_st = CoherenceVector::from_traceless(sol.as_slice(), basis)?;
    let residual = (l * v_st.as_vector()).amax();
    let rho_min_eigenvalue = coherence_to_rho(&v_st, basis).min_eigenvalue;
    Ok(SpectralInfo { eigenvalues, v_st, e_gap, tau, non_unique, residual, rho_min_eigenvalue })
}

/// Diagonal form `𝒟[ρ] = Σ_k γ_k (J_k ρ J_k† − ½{J_k†J_k, ρ})`.
#[derive(Debug, Clone)]
pub struct JumpDecomposition {
    /// Descending.
    pub rates: Vec<f64>,
    pub jumps: Vec<CMatrix>,
    /// Columns are eigenvectors of `c`: `h† c h = diag(γ)`.
    pub h: CMatrix,
}

impl JumpDecomposition {
    /// Coefficients of `J_k` over the traceless basis, i.e. column `k` of `h`.
    pub fn coefficients(&self, k: usize) -> Vec<C64> {
        self.h.column(k).iter().copied().collect()
    }

    /// Projected dissipator rebuilt from rates and jump operators.
    pub fn dissipator(&self, basis: &BasisSet) -> RMatrix {
        let m = basis.len();
        let mut out = RMatrix::zeros(m, m);
        for k in 0..m {
            let rho = basis.element(k);
            let mut acc = CMatrix::zeros(rho.nrows(), rho.ncols());
            for (g, j) in self.rates.iter().zip(&self.jumps) {
                let jd = j.adjoint();
                let jdj = &jd * j;
                let term = j * rho * &jd - (&jdj * rho + rho * &jdj).map(|z| z * 0.5);
                acc += term.map(|z| z * *g);
            }
            out.set_column(k, &basis.project(&acc));
        }
        out
    }
}

/// Eigendecomposes `c` and forms `J_k = Σ_i h_ik F_i`.
pub fn jump_decomposition(c: &KossakowskiMatrix, basis: &BasisSet) -> Result<JumpDecomposition> {
    let n = basis.n_traceless();
    if c.matrix().shape() != (n, n) {
        return Err(Error::ShapeMismatch { expected: format!("{n}x{n}"), got: format!("{:?}", c.matrix().shape()) });
    }
    let herm = (c.matrix() + c.matrix().adjoint()).map(|z| z * 0.5);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut h = CMatrix::zeros(n, n);
    let mut rates = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        h.set_column(dst, &eig.eigenvectors.column(src));
        rates.push(eig.eigenvalues[src]);
    }
    let jumps = (0..n)
        .map(|k| {
            let coeffs: Vec<C64> = h.column(k).iter().copied().collect();
            basis.combine(&coeffs)
        })
        .collect();
    Ok(JumpDecomposition { rates, jumps, h })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::spin_algebra::build_pauli_basis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dephased_rabi(om: f64, gamma: f64) -> (BasisSet, GeneratorMatrix) {
        let basis = build_pauli_basis(1).unwrap();
        let t = precompute_dissipator_tensors(&basis);
        let mut p = GeneratorParams::zeros(3);
        p.omega[0] = om / 2f64.sqrt();
        p.x[(2, 2)] = gamma.sqrt();
        let g = assemble_generator(&p, &basis, &t).unwrap();
        (basis, g)
    }

    #[test]
    fn dephased_rabi_relaxes_to_maximally_mixed() {
        let (basis, g) = dephased_rabi(1.0, 0.3);
        let info = stationary_state(&g, &basis).unwrap();
        let target = [0.0, 0.0, 0.0, 2f64.sqrt().recip()];
        for (a, b) in info.v_st.as_slice().iter().zip(target) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(!info.non_unique);
        assert!(info.has_gap());
        assert!(info.residual < 1e-10);
    }

    #[test]
    fn null_generator_is_flagged() {
        let basis = build_pauli_basis(2).unwrap();
        let info = stationary_state(&GeneratorMatrix::zeros(16), &basis).unwrap();
        assert!(info.non_unique);
        assert!(info.tau.is_none());
        assert!(info.require_tau().is_err());
        assert!((info.v_st.as_slice()[..15]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn dissipativity_over_random_params() {
        let basis = build_pauli_basis(2).unwrap();
        let t = precompute_dissipator_tensors(&basis);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = GeneratorParams::random(&mut rng, 15, 0.5);
            let g = assemble_generator(&p, &basis, &t).unwrap();
            let info = stationary_state(&g, &basis).unwrap();
            assert!(info.max_real_part() <= 1e-10);
            assert!(info.residual < 1e-10);
            assert!(info.rho_min_eigenvalue > -1e-8);
        }
    }

    #[test]
    fn jump_examples() {
        let basis = build_pauli_basis(2).unwrap();
        let t = precompute_dissipator_tensors(&basis);
        let mut c = CMatrix::zeros(15, 15);
        c[(0, 0)] = C64::new(0.7, 0.0);
        let j = jump_decomposition(&KossakowskiMatrix::new(c).unwrap(), &basis).unwrap();
        assert!((j.rates[0] - 0.7).abs() < 1e-14);
        let j0 = &j.jumps[0];
        let e0 = basis.element(0);
        let (pos, _) = e0.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm())).unwrap();
        let phase = j0.as_slice()[pos] / e0.as_slice()[pos];
        assert!((j0 - e0.map(|z| z * phase)).norm() < 1e-14);
        assert!((phase.norm() - 1.0).abs() < 1e-14);

        let c = KossakowskiMatrix::new(CMatrix::identity(15, 15).map(|z| z * 0.4)).unwrap();
        let j = jump_decomposition(&c, &basis).unwrap();
        assert!(j.rates.iter().all(|g| (g - 0.4).abs() < 1e-13));
        let d = t.dissipative_part(&c);
        assert!((j.dissipator(&basis) - d).abs().max() < 1e-10);
    }

    #[test]
    fn jump_reconstruction_matches_dissipator() {
        let basis = build_pauli_basis(2).unwrap();
        let t = precompute_dissipator_tensors(&basis);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let p = GeneratorParams::random(&mut rng, 15, 0.5);
            let c = p.kossakowski();
            let j = jump_decomposition(&c, &basis).unwrap();
            assert!(j.rates.iter().all(|&g| g > -1e-12));
            assert!(j.rates.windows(2).all(|w| w[0] >= w[1]));
            let hh = j.h.adjoint() * &j.h;
            assert!((hh - CMatrix::identity(15, 15)).norm() < 1e-12);
            assert!((j.dissipator(&basis) - t.dissipative_part(&c)).abs().max() < 1e-10);
        }
    }
}

//! Matrix exponential by Taylor series with scaling and squaring, and its
//! reverse-mode derivative through the same recurrence.

use super::GeneratorMatrix;
use crate::{Error, RMatrix, Result};

const REL_TOL: f64 = 1e-16;
const MAX_TERMS: usize = 64;

/// Forward pass intermediates of `exp(A)`. The series and the squarings
/// carry `E = exp(A) − 𝟙`, which keeps the small propagator offsets
/// accurate to working precision relative to `‖E‖`.
#[derive(Debug, Clone)]
pub struct ExpmTape {
    scale_pow: u32,
    scaled: RMatrix,
    /// `P_k = B^k / k!`, `k = 0..=K`.
    terms: Vec<RMatrix>,
    /// Inputs of each squaring `E ↦ 2E + E²`, starting from `Σ_{k≥1} P_k`.
    squares: Vec<RMatrix>,
    minus_identity: RMatrix,
    result: RMatrix,
}

fn max_abs(m: &RMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

fn one_norm(m: &RMatrix) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

impl ExpmTape {
    pub fn new(a: &RMatrix) -> Self {
        assert!(a.is_square(), "exponential of a non-square matrix");
        let k = a.nrows();
        let norm = one_norm(a);
        if !norm.is_finite() {
            let nan = RMatrix::from_element(k, k, f64::NAN);
            return ExpmTape {
                scale_pow: 0,
                scaled: nan.clone(),
                terms: vec![nan.clone()],
                squares: Vec::new(),
                minus_identity: nan.clone(),
                result: nan,
            };
        }
        let scale_pow = if norm > 1.0 { norm.log2().ceil() as u32 } else { 0 };
        let scaled = a / 2f64.powi(scale_pow as i32);
        let mut terms = vec![RMatrix::identity(k, k)];
        let mut sum = RMatrix::zeros(k, k);
        for j in 1..MAX_TERMS {
            let next = (&terms[j - 1] * &scaled) / j as f64;
            sum += &next;
            let size = max_abs(&next);
            let small = size == 0.0 || size < REL_TOL * max_abs(&sum);
            terms.push(next);
            if small {
                break;
            }
        }
        let mut squares = Vec::with_capacity(scale_pow as usize);
        let mut e = sum;
        for _ in 0..scale_pow {
            let next = &e * 2.0 + &e * &e;
            squares.push(e);
            e = next;
        }
        let result = &e + RMatrix::identity(k, k);
        ExpmTape { scale_pow, scaled, terms, squares, minus_identity: e, result }
    }

    pub fn result(&self) -> &RMatrix {
        &self.result
    }

    pub fn into_result(self) -> RMatrix {
        self.result
    }

    /// `exp(A) − 𝟙` without the cancellation of forming it from the result.
    pub fn minus_identity(&self) -> &RMatrix {
        &self.minus_identity
    }

    /// Number of Taylor terms beyond the identity.
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn squarings(&self) -> u32 {
        self.scale_pow
    }

    /// Given `∂ℓ/∂exp(A)`, returns `∂ℓ/∂A`.
    pub fn backward(&self, grad_out: &RMatrix) -> RMatrix {
        let mut g = grad_out.clone();
        for e in self.squares.iter().rev() {
            g = &g * 2.0 + &g * e.transpose() + e.transpose() * &g;
        }
        // Every term receives the sum's adjoint plus the chain from its successor.
        let kmax = self.terms.len() - 1;
        let bt = self.scaled.transpose();
        let mut grad_b = RMatrix::zeros(bt.nrows(), bt.ncols());
        let mut pbar = g.clone();
        for k in (1..=kmax).rev() {
            grad_b += self.terms[k - 1].transpose() * &pbar / k as f64;
            pbar = &g + (&pbar * &bt) / k as f64;
        }
        grad_b / 2f64.powi(self.scale_pow as i32)
    }
}

/// `exp(A)`.
pub fn expm(a: &RMatrix) -> RMatrix {
    ExpmTape::new(a).into_result()
}

/// `M = exp(dt·L)`.
pub fn propagate(generator: &GeneratorMatrix, dt: f64) -> Result<RMatrix> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("time step must be non-negative, got {dt}")));
    }
    Ok(expm(&(&generator.l * dt)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{CMatrix, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eig_expm(a: &RMatrix) -> RMatrix {
        // Oracle: A = V Λ V⁻¹ over the complex field.
        let ac = a.map(|x| C64::new(x, 0.0));
        let eig = a.clone().complex_eigenvalues();
        let n = a.nrows();
        let mut v = CMatrix::zeros(n, n);
        for (k, lam) in eig.iter().enumerate() {
            let shifted = &ac - CMatrix::identity(n, n).map(|z| z * lam);
            let svd = shifted.svd(true, true);
            let vt = svd.v_t.unwrap();
            let (imin, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            let col = vt.row(imin).adjoint();
            v.set_column(k, &col);
        }
        let d = CMatrix::from_diagonal(&eig.map(|l| l.exp()));
        let vinv = v.clone().try_inverse().unwrap();
        (v * d * vinv).map(|z| z.re)
    }

    #[test]
    fn trivial_exponentials() {
        let g = GeneratorMatrix::zeros(4);
        assert_eq!(propagate(&g, 0.7).unwrap(), RMatrix::identity(4, 4));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = RMatrix::from_fn(4, 4, |_, _| rng.random::<f64>());
        let g = GeneratorMatrix::from_parts(l, RMatrix::zeros(4, 4));
        assert_eq!(propagate(&g, 0.0).unwrap(), RMatrix::identity(4, 4));
        assert!(propagate(&g, -1.0).is_err());
    }

    #[test]
    fn matches_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let l = RMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let a = &l * 0.3;
            assert!((expm(&a) - eig_expm(&a)).abs().max() < 1e-12);
            let big = &l * 5.0;
            let e = expm(&big);
            assert!((&e - eig_expm(&big)).abs().max() < 1e-10 * max_abs(&e));
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for scale in [0.2, 3.0] {
            let a = RMatrix::from_fn(4, 4, |_, _| scale * (rng.random::<f64>() - 0.5));
            let w = RMatrix::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
            let tape = ExpmTape::new(&a);
            let g = tape.backward(&w);
            let h = 1e-6;
            for i in 0..4 {
                for j in 0..4 {
                    let mut ap = a.clone();
                    ap[(i, j)] += h;
                    let mut am = a.clone();
                    am[(i, j)] -= h;
                    let fd = ((expm(&ap) - expm(&am)).component_mul(&w)).sum() / (2.0 * h);
                    assert!((fd - g[(i, j)]).abs() < 1e-7 * (1.0 + fd.abs()), "{fd} vs {}", g[(i, j)]);
                }
            }
        }
    }
}

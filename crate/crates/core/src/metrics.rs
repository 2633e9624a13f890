//! Fidelity measures between exact and learned reduced dynamics.
//!
//! Time integrals use the trapezoidal rule on the sampling grid. A window
//! edge that falls between samples is handled by linear interpolation of
//! the integrand.

use serde::{Deserialize, Serialize};

use crate::spin_algebra::{coherence_to_matrix, BasisSet, CoherenceVector};
use crate::trajectory::Trajectory;
use crate::{CMatrix, Error, RVector, Result};

/// Components whose exact signal variance falls below this are skipped by
/// [`fvu`].
pub const FVU_VARIANCE_FLOOR: f64 = 1e-14;

/// `Tr √(σ†σ)`, the sum of singular values.
pub fn trace_norm(sigma: &CMatrix) -> f64 {
    sigma.clone().svd(false, false).singular_values.sum()
}

fn check_grids(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if (a.dt() - b.dt()).abs() > 1e-12 * a.dt() {
        return Err(Error::GridMismatch(format!("time steps {} and {}", a.dt(), b.dt())));
    }
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} and {} snapshots", a.len(), b.len())));
    }
    if a.d() != b.d() {
        return Err(Error::GridMismatch("different subsystem dimensions".into()));
    }
    Ok(())
}

/// Snapshot indices `lo..=hi` whose span covers `[t0, t1]`.
fn window_indices(dt: f64, len: usize, t0: f64, t1: f64) -> Result<(usize, usize)> {
    let t_end = (len - 1) as f64 * dt;
    let slack = 1e-9 * dt;
    if !(t1 > t0) || t0 < -slack || t1 > t_end + slack {
        return Err(Error::GridMismatch(format!("window [{t0}, {t1}] not inside the sampled span [0, {t_end}]")));
    }
    let lo = ((t0 / dt) + 1e-9).floor().max(0.0) as usize;
    let hi = (((t1 / dt) - 1e-9).ceil() as usize).min(len - 1);
    Ok((lo, hi.max(lo + 1)))
}

/// Mean of the piecewise-linear interpolant of `values` (sampled every `dt`
/// from zero) over `[t0, t1]`.
pub fn window_mean(values: &[f64], dt: f64, t0: f64, t1: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let (lo, hi) = window_indices(dt, values.len(), t0, t1)?;
    let t0 = t0.max(0.0);
    let t1 = t1.min((values.len() - 1) as f64 * dt);
    let at = |t: f64, k: usize| {
        let s = ((t - k as f64 * dt) / dt).clamp(0.0, 1.0);
        values[k] + s * (values[k + 1] - values[k])
    };
    let mut acc = 0.0;
    for k in lo..hi {
        let a = (k as f64 * dt).max(t0);
        let b = ((k + 1) as f64 * dt).min(t1);
        if b <= a {
            continue;
        }
        acc += 0.5 * (at(a, k) + at(b, k)) * (b - a);
    }
    Ok(acc / (t1 - t0))
}

/// Window mean of a trajectory's coherence vectors.
pub fn window_mean_vector(t: &Trajectory, t0: f64, t1: f64) -> Result<RVector> {
    let dim = t.d() * t.d();
    let mut out = RVector::zeros(dim);
    for i in 0..dim {
        out[i] = window_mean(&t.component(i), t.dt(), t0, t1)?;
    }
    Ok(out)
}

/// `(1/(T_fin − T_in)) ∫ ‖ρ_exact − ρ_pred‖₁ dt`.
pub fn i_err(exact: &Trajectory, predicted: &Trajectory, basis: &BasisSet, t_in: f64, t_fin: f64) -> Result<f64> {
    check_grids(exact, predicted)?;
    let (lo, hi) = window_indices(exact.dt(), exact.len(), t_in, t_fin)?;
    let mut vals = vec![0.0; exact.len()];
    for (k, v) in vals.iter_mut().enumerate().take(hi + 1).skip(lo) {
        let diff = coherence_to_matrix(exact.vector(k).as_slice(), basis) - coherence_to_matrix(predicted.vector(k).as_slice(), basis);
        *v = trace_norm(&diff);
    }
    window_mean(&vals, exact.dt(), t_in, t_fin)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fvu {
    pub value: f64,
    /// Components skipped for near-constant exact signals.
    pub excluded: Vec<usize>,
}

fn population_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// `(1/(d²−1)) Σ_i √(Var(v_i^exact − v_i^pred) / Var(v_i^exact))` over all
/// snapshots, averaging only over components with non-negligible signal
/// variance.
pub fn fvu(exact: &Trajectory, predicted: &Trajectory) -> Result<Fvu> {
    check_grids(exact, predicted)?;
    fvu_range(exact, predicted, 0, exact.len() - 1)
}

/// [`fvu`] restricted to snapshots within `[t0, t1]`.
pub fn fvu_window(exact: &Trajectory, predicted: &Trajectory, t0: f64, t1: f64) -> Result<Fvu> {
    check_grids(exact, predicted)?;
    let dt = exact.dt();
    let lo = ((t0 / dt) - 1e-9).ceil().max(0.0) as usize;
    let hi = (((t1 / dt) + 1e-9).floor() as usize).min(exact.len() - 1);
    if hi <= lo || t0 < -1e-9 * dt || t1 > (exact.len() - 1) as f64 * dt * (1.0 + 1e-12) {
        return Err(Error::GridMismatch(format!("window [{t0}, {t1}] does not fit the grid")));
    }
    fvu_range(exact, predicted, lo, hi)
}

fn fvu_range(exact: &Trajectory, predicted: &Trajectory, lo: usize, hi: usize) -> Result<Fvu> {
    let n = exact.d() * exact.d() - 1;
    let mut excluded = Vec::new();
    let mut acc = 0.0;
    for i in 0..n {
        let e: Vec<f64> = (lo..=hi).map(|k| exact.vector(k)[i]).collect();
        let var_e = population_variance(&e);
        if var_e < FVU_VARIANCE_FLOOR {
            excluded.push(i);
            continue;
        }
        let r: Vec<f64> = (lo..=hi).map(|k| exact.vector(k)[i] - predicted.vector(k)[i]).collect();
        acc += (population_variance(&r) / var_e).sqrt();
    }
    let used = n - excluded.len();
    if used == 0 {
        return Err(Error::Undefined("every exact component is constant".into()));
    }
    Ok(Fvu { value: acc / used as f64, excluded })
}

/// Mean over trajectories of `‖ρ*_exact − ρ_st‖₁`, where `ρ*_exact` averages
/// the exact state over `[aτ, bτ]`.
pub fn stationary_error(exact: &[Trajectory], v_st: &CoherenceVector, tau: Option<f64>, a: f64, b: f64, basis: &BasisSet) -> Result<f64> {
    let tau = tau.ok_or_else(|| Error::Undefined("no spectral gap, τ undefined".into()))?;
    if exact.is_empty() {
        return Err(Error::invalid("no trajectories"));
    }
    if !(b > a && a >= 0.0) {
        return Err(Error::invalid(format!("window factors must satisfy 0 ≤ a < b, got {a}, {b}")));
    }
    let mut means = Vec::with_capacity(exact.len());
    for t in exact {
        let span = t.n_steps() as f64 * t.dt();
        if span < b * tau * (1.0 - 1e-12) {
            return Err(Error::GridMismatch(format!("trajectory spans {span}, shorter than b·τ = {}", b * tau)));
        }
        means.push(window_mean_vector(t, a * tau, b * tau)?);
    }
    stationary_error_from_averages(&means, v_st, basis)
}

/// Mean of `‖ρ(v̄) − ρ_st‖₁` over precomputed window averages `v̄`.
pub fn stationary_error_from_averages(averages: &[RVector], v_st: &CoherenceVector, basis: &BasisSet) -> Result<f64> {
    if averages.is_empty() {
        return Err(Error::invalid("no trajectories"));
    }
    let rho_st = coherence_to_matrix(v_st.as_slice(), basis);
    let total: f64 = averages
        .iter()
        .map(|m| trace_norm(&(coherence_to_matrix(m.as_slice(), basis) - &rho_st)))
        .sum();
    Ok(total / averages.len() as f64)
}

/// Trapezoidal mean of samples taken uniformly over a window, endpoints
/// included.
pub fn uniform_mean(samples: &[RVector]) -> Result<RVector> {
    if samples.len() < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let n = samples.len() - 1;
    let mut acc = (&samples[0] + &samples[n]) * 0.5;
    for s in &samples[1..n] {
        acc += s;
    }
    Ok(acc / n as f64)
}

/// Summary of one evaluation; times in units of `1/Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub i_err_interp: f64,
    pub i_err_extrap: Option<f64>,
    pub fvu_interp: Option<f64>,
    pub fvu_extrap: Option<f64>,
    pub epsilon_stationary: Option<f64>,
    pub interp_window: (f64, f64),
    pub extrap_window: Option<(f64, f64)>,
    pub a: f64,
    pub b: f64,
    pub tau: Option<f64>,
    pub n_initial_conditions: usize,
}

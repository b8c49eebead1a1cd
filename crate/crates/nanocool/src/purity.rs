//! State purity of the cooled ensemble.
//!
//! For a Gaussian state, purity is fixed by the covariance determinant:
//! `P = 1 / (2 sqrt(Vx Vp - Cov^2))` in natural units. Feedback steers
//! the conditional mean but leaves the conditional covariances alone, so
//! the ensemble covariances split into the conditional part plus the
//! classical spread of the means; residual mean fluctuations are what
//! separates each method's purity from the detection-limited ceiling
//! `sqrt(eta)`.

use crate::control::{
    bp_is_stable, bp_system, lpf_masked_moments, lqg_conditioned_covariances,
};
use crate::error::{Error, Result};
use crate::moments::stationary_second_moments;
use crate::real::Real;
use crate::sim::{delayed_moments, MomentEstimate, SimConfig};
use crate::state::{stationary_squeeze, wavefunction_covariances, CovarianceTriple};

/// Purity of a Gaussian state, `1 / (2 sqrt(det))`.
///
/// The input must satisfy the uncertainty bound, so the result lies in
/// `(0, 1]` up to a `1e-9` rounding allowance.
pub fn purity_from_covariances<T: Real>(cov: &CovarianceTriple<T>) -> Result<T> {
    let det = cov.det();
    if det < T::lit(0.25) - T::lit(1e-9) {
        return Err(Error::Domain(format!(
            "covariances violate the uncertainty bound: det = {det}"
        )));
    }
    Ok(T::lit(0.5) / det.sqrt())
}

/// Ensemble covariances: conditional part plus second moments of the
/// state means.
fn ensemble_purity(cond: &CovarianceTriple<f64>, mx2: f64, mp2: f64, mxp: f64) -> Result<f64> {
    let total = CovarianceTriple {
        vx: cond.vx + mx2,
        vp: cond.vp + mp2,
        cov: cond.cov + mxp,
    };
    purity_from_covariances(&total)
}

/// Ensemble purity of the low-pass feedback loop.
///
/// The conditional state is the squeezed wavefunction; the mean spread is
/// carried by the stationary pair (relative coordinate, momentum), the
/// functionals untouched by the loop's marginal common mode.
pub fn lpf_purity(gamma_tilde: f64, eta: f64, s_tilde: f64) -> Result<f64> {
    let (r, d) = stationary_squeeze(gamma_tilde)?;
    let cond = wavefunction_covariances(r, d)?;
    let (u2, up, p2) = lpf_masked_moments(gamma_tilde, eta, s_tilde)?;
    ensemble_purity(&cond, u2, p2, up)
}

/// Ensemble purity of the band-pass cold-damping loop.
pub fn bp_purity(gamma_tilde: f64, eta: f64, s_tilde: f64, g_tilde: f64) -> Result<f64> {
    if !bp_is_stable(s_tilde, g_tilde) {
        let worst = crate::control::bp_eigenvalues(s_tilde, g_tilde)
            .into_iter()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .expect("four eigenvalues");
        return Err(Error::Unstable { eigenvalue: worst });
    }
    let (r, d) = stationary_squeeze(gamma_tilde)?;
    let cond = wavefunction_covariances(r, d)?;
    let sys = bp_system(gamma_tilde, eta, s_tilde, g_tilde)?;
    let s = stationary_second_moments(&sys, None)?;
    ensemble_purity(&cond, s.entry_re(0, 0), s.entry_re(1, 1), s.entry_re(0, 1))
}

/// Purity reached by the optimal-control method: exactly `sqrt(eta)`.
///
/// The regulator cancels the mean spread in the infinite-gain limit, so
/// only the conditional covariances remain and their determinant is
/// `1 / (4 eta)`.
pub fn lqg_purity<T: Real>(eta: T) -> Result<T> {
    if !eta.is_finite() || eta <= T::zero() || eta > T::one() {
        return Err(Error::Domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(eta.sqrt())
}

/// Monte Carlo ensemble purity of the delayed cold-damping loop, with a
/// delta-method standard error over the batch means.
pub fn delayed_purity(
    gamma_tilde: f64,
    eta: f64,
    g_tilde: f64,
    cfg: &SimConfig,
) -> Result<MomentEstimate> {
    let dm = delayed_moments(gamma_tilde, eta, g_tilde, cfg, None)?;
    let cond = lqg_conditioned_covariances(gamma_tilde, eta)?;
    dm.purity_estimate(&cond)
}

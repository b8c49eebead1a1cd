//! Closed-form stationary energies of the feedback methods.
//!
//! Four ways of converting the measurement record into a cooling force are
//! covered:
//!
//! * **`lpf`** feeds the low-pass filtered photocurrent back as a force.
//!   The loop has a marginal common mode (particle and filter reference
//!   drift together), so stationary quantities live in the relative
//!   coordinate `U = X - X_f` and the momentum.
//! * **`cd-bandpass`** estimates velocity by band-pass filtering the
//!   photocurrent around the trap frequency and damps with it (cold
//!   damping). The filter pair is tracked as one complex coordinate and
//!   its mirror, which keeps the loop linear with constant coefficients.
//! * **`cd-delayed`** damps with the photocurrent delayed by a quarter
//!   period; it has no closed-form energy and is simulated in [`crate::sim`].
//! * **`lqg`** applies the optimal linear-quadratic-Gaussian controller on
//!   top of the Kalman conditional state.
//!
//! Energies are totals in units of `hbar omega`; subtract `1/2` for the
//! phonon occupation.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::moments::{stationary_second_moments, LinearSdeSystem, ZeroModeMask};
use crate::real::Real;
use crate::state::{stationary_squeeze, zero_point_energy, CovarianceTriple, EnergyReport};

/// The four feedback strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    Lpf,
    CdBandpass,
    CdDelayed,
    Lqg,
}

impl MethodId {
    pub const ALL: [MethodId; 4] = [
        MethodId::Lpf,
        MethodId::CdBandpass,
        MethodId::CdDelayed,
        MethodId::Lqg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodId::Lpf => "lpf",
            MethodId::CdBandpass => "cd-bandpass",
            MethodId::CdDelayed => "cd-delayed",
            MethodId::Lqg => "lqg",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lpf" => Ok(MethodId::Lpf),
            "cd-bandpass" => Ok(MethodId::CdBandpass),
            "cd-delayed" => Ok(MethodId::CdDelayed),
            "lqg" => Ok(MethodId::Lqg),
            other => Err(Error::InvalidInput(format!(
                "unknown method '{other}' (expected lpf, cd-bandpass, cd-delayed or lqg)"
            ))),
        }
    }
}

/// Controller parameters at which a reported energy was reached.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OptimalParams {
    pub s_tilde: Option<f64>,
    pub g_tilde: Option<f64>,
}

/// Stationary performance of one method at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: MethodId,
    pub energy: EnergyReport<f64>,
    pub optimal: OptimalParams,
    pub purity: f64,
    /// Standard error of the total energy for Monte Carlo results; `None`
    /// for closed forms.
    pub stderr: Option<f64>,
}

/// Occupation floor `(1/sqrt(eta) - 1) / 2` that no linear feedback can
/// beat at a given detection efficiency.
pub fn fundamental_bound<T: Real>(eta: T) -> Result<T> {
    if !eta.is_finite() || eta <= T::zero() || eta > T::one() {
        return Err(Error::Domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok((T::one() / eta.sqrt() - T::one()) * T::lit(0.5))
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn validate_strength<T: Real>(gamma_tilde: T, eta: T) -> Result<()> {
    if !gamma_tilde.is_finite() || gamma_tilde <= T::zero() {
        return Err(Error::Domain(format!(
            "gamma_tilde must be finite and > 0, got {gamma_tilde}"
        )));
    }
    if !eta.is_finite() || eta <= T::zero() || eta > T::one() {
        return Err(Error::Domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

/// Measurement noise amplitudes entering the conditional dynamics: the
/// detected channel (rate `eta gamma_tilde`) and the lost channel.
/// Conditional-dynamics noise amplitudes `(x, p)` for the detected and
/// lost measurement channels. The position kick carries the full
/// back-action; the momentum kick is scaled by the squeeze cross term.
pub fn conditional_noise(gamma_tilde: f64, eta: f64) -> ((f64, f64), (f64, f64)) {
    let (r, d) = stationary_squeeze(gamma_tilde).expect("validated gamma_tilde");
    let det = (eta * gamma_tilde / (2.0 * r * r)).sqrt();
    let lost = ((1.0 - eta) * gamma_tilde / (2.0 * r * r)).sqrt();
    ((det, det * d), (lost, lost * d))
}

// ---------------------------------------------------------------------------
// Low-pass filtered position feedback
// ---------------------------------------------------------------------------

/// Closed loop of particle `(X, P)` and low-pass filter output `X_f` with
/// cutoff `s_tilde`:
///
/// ```text
/// dX  = P dt + (back-action noise)
/// dP  = (-X + X_f) dt + (back-action noise)
/// dXf = s_tilde (X - X_f) dt + s_tilde * (shot noise on the photocurrent)
/// ```
pub fn lpf_system(gamma_tilde: f64, eta: f64, s_tilde: f64) -> Result<LinearSdeSystem> {
    validate_strength(gamma_tilde, eta)?;
    if !s_tilde.is_finite() || s_tilde <= 0.0 {
        return Err(Error::Domain(format!(
            "filter cutoff s_tilde must be > 0, got {s_tilde}"
        )));
    }
    let ((b11, b12), (b21, b22)) = conditional_noise(gamma_tilde, eta);
    let drift = DMatrix::from_row_slice(
        3,
        3,
        &[
            c(0.0), c(1.0), c(0.0),
            c(-1.0), c(0.0), c(1.0),
            c(s_tilde), c(0.0), c(-s_tilde),
        ],
    );
    let shot = s_tilde / (2.0 * gamma_tilde * eta).sqrt();
    let b1 = DVector::from_row_slice(&[c(b11), c(b12), c(shot)]);
    let b2 = DVector::from_row_slice(&[c(b21), c(b22), c(0.0)]);
    LinearSdeSystem::new(
        drift,
        vec![b1, b2],
        vec!["X".into(), "P".into(), "Xf".into()],
    )
}

/// Marginal mode of the low-pass loop: `X` and `X_f` drift together
/// (right vector), while `s_tilde P + X_f` diffuses freely (left vector).
pub fn lpf_mask(s_tilde: f64) -> Result<ZeroModeMask> {
    if !s_tilde.is_finite() || s_tilde <= 0.0 {
        return Err(Error::Domain(format!(
            "filter cutoff s_tilde must be > 0, got {s_tilde}"
        )));
    }
    ZeroModeMask::new(
        DVector::from_row_slice(&[c(1.0), c(0.0), c(1.0)]),
        DVector::from_row_slice(&[c(0.0), c(s_tilde), c(1.0)]),
    )
}

/// Observables of the low-pass loop whose second moments carry the
/// energy: the relative coordinate `U = X - X_f` and the momentum.
pub fn lpf_observables() -> Vec<DVector<Complex64>> {
    vec![
        DVector::from_row_slice(&[c(1.0), c(0.0), c(-1.0)]),
        DVector::from_row_slice(&[c(0.0), c(1.0), c(0.0)]),
    ]
}

/// Stationary moments `(E[U^2], E[U P], E[P^2])` of the relative
/// coordinate `U = X - X_f` and the momentum.
pub fn lpf_masked_moments(gamma_tilde: f64, eta: f64, s_tilde: f64) -> Result<(f64, f64, f64)> {
    let sys = lpf_system(gamma_tilde, eta, s_tilde)?;
    let mask = lpf_mask(s_tilde)?;
    let s = stationary_second_moments(&sys, Some(&mask))?;
    let obs = lpf_observables();
    let (u, p) = (&obs[0], &obs[1]);
    let quad = |a: &DVector<Complex64>, b: &DVector<Complex64>| -> f64 {
        (a.transpose() * &s.values * b)[(0, 0)].re
    };
    Ok((quad(u, u), quad(u, p), quad(p, p)))
}

/// Total stationary energy of the low-pass loop,
///
/// ```text
/// E = (1/8) [ s_tilde (2 / (gamma_tilde eta) + gamma_tilde)
///             + 2 gamma_tilde / s_tilde ].
/// ```
///
/// Equals the masked fluctuation energy plus the squeezed zero-point
/// term; the agreement is checked numerically in the test suite.
pub fn lpf_energy<T: Real>(gamma_tilde: T, eta: T, s_tilde: T) -> Result<T> {
    validate_strength(gamma_tilde, eta)?;
    if !s_tilde.is_finite() || s_tilde <= T::zero() {
        return Err(Error::Domain(format!(
            "filter cutoff s_tilde must be > 0, got {s_tilde}"
        )));
    }
    let two = T::lit(2.0);
    let eighth = T::lit(0.125);
    Ok(eighth
        * (s_tilde * (two / (gamma_tilde * eta) + gamma_tilde) + two * gamma_tilde / s_tilde))
}

/// Cutoff minimizing [`lpf_energy`],
/// `s* = gamma_tilde / sqrt(1/eta + gamma_tilde^2 / 2)`. Always below
/// `sqrt(2)`.
pub fn lpf_optimal_s<T: Real>(gamma_tilde: T, eta: T) -> Result<T> {
    validate_strength(gamma_tilde, eta)?;
    Ok(gamma_tilde / (T::one() / eta + gamma_tilde * gamma_tilde * T::lit(0.5)).sqrt())
}

/// Occupation at the optimal cutoff,
/// `n = (sqrt(1/eta + gamma_tilde^2 / 2) - 1) / 2`.
pub fn lpf_min_occupation<T: Real>(gamma_tilde: T, eta: T) -> Result<T> {
    validate_strength(gamma_tilde, eta)?;
    Ok(((T::one() / eta + gamma_tilde * gamma_tilde * T::lit(0.5)).sqrt() - T::one())
        * T::lit(0.5))
}

// ---------------------------------------------------------------------------
// Cold damping with a band-pass filter
// ---------------------------------------------------------------------------

/// Closed loop of particle `(X, P)` and the complex band-pass coordinate
/// `Y` (plus its mirror `Y*`), filter width `s_tilde`, gain `g_tilde`:
///
/// ```text
/// dX  = P dt + (back-action noise)
/// dP  = (-X - i g_tilde Y + i g_tilde Y*) dt + (back-action noise)
/// dY  = (2 s_tilde X + (i - s_tilde) Y) dt + (scaled shot noise)
/// dY* = mirror of dY
/// ```
///
/// The two filter rows are complex conjugates driven by the same real
/// noise, so `Y*` stays the conjugate of `Y` along every trajectory and
/// the force `-i g_tilde (Y - Y*)` is real.
pub fn bp_system(gamma_tilde: f64, eta: f64, s_tilde: f64, g_tilde: f64) -> Result<LinearSdeSystem> {
    validate_strength(gamma_tilde, eta)?;
    if !s_tilde.is_finite() || s_tilde <= 0.0 || !g_tilde.is_finite() || g_tilde < 0.0 {
        return Err(Error::Domain(format!(
            "need s_tilde > 0 and g_tilde >= 0, got s_tilde = {s_tilde}, g_tilde = {g_tilde}"
        )));
    }
    let ((b11, b12), (b21, b22)) = conditional_noise(gamma_tilde, eta);
    let i = Complex64::new(0.0, 1.0);
    let g = Complex64::new(g_tilde, 0.0);
    let s = Complex64::new(s_tilde, 0.0);
    let mut drift = DMatrix::zeros(4, 4);
    drift[(0, 1)] = c(1.0);
    drift[(1, 0)] = c(-1.0);
    drift[(1, 2)] = -i * g;
    drift[(1, 3)] = i * g;
    drift[(2, 0)] = 2.0 * s;
    drift[(2, 2)] = i - s;
    drift[(3, 0)] = 2.0 * s;
    drift[(3, 3)] = -i - s;
    let shot = (2.0 * s_tilde * s_tilde / (eta * gamma_tilde)).sqrt();
    let b1 = DVector::from_row_slice(&[c(b11), c(b12), c(shot), c(shot)]);
    let b2 = DVector::from_row_slice(&[c(b21), c(b22), c(0.0), c(0.0)]);
    LinearSdeSystem::new(
        drift,
        vec![b1, b2],
        vec!["X".into(), "P".into(), "Y".into(), "Yc".into()],
    )
}

/// Stability of the band-pass loop: `0 < g_tilde < (s_tilde + 1/s_tilde)/4`.
///
/// Equivalent to all drift eigenvalues having negative real part; the
/// equivalence is exercised on a parameter grid in the test suite.
pub fn bp_is_stable(s_tilde: f64, g_tilde: f64) -> bool {
    s_tilde > 0.0 && g_tilde > 0.0 && g_tilde < 0.25 * (s_tilde + 1.0 / s_tilde)
}

/// Eigenvalues of the band-pass drift matrix,
/// `nu = (-s_tilde ± sqrt(s_tilde^2 - 4 ± 4 sqrt(4 g_tilde s_tilde - s_tilde^2))) / 2`
/// with principal square roots.
pub fn bp_eigenvalues(s_tilde: f64, g_tilde: f64) -> [Complex64; 4] {
    let s = s_tilde;
    let w = Complex64::new(4.0 * g_tilde * s - s * s, 0.0).sqrt();
    let base = Complex64::new(s * s - 4.0, 0.0);
    let d_plus = (base + 4.0 * w).sqrt();
    let d_minus = (base - 4.0 * w).sqrt();
    [
        (-c(s) + d_plus) / 2.0,
        (-c(s) - d_plus) / 2.0,
        (-c(s) + d_minus) / 2.0,
        (-c(s) - d_minus) / 2.0,
    ]
}

/// Fluctuation energy of the band-pass loop (energy above the squeezed
/// zero-point term).
fn bp_fluctuation<T: Real>(gamma_tilde: T, eta: T, s_tilde: T, g_tilde: T) -> T {
    let (r, d) = stationary_squeeze(gamma_tilde).expect("validated gamma_tilde");
    let g = gamma_tilde;
    let gg = g_tilde;
    let s = s_tilde;
    let s2 = s * s;
    let l = |x: f64| T::lit(x);

    let pref = T::one()
        / (l(32.0) * g * gg * eta * r * r * s * (l(4.0) * gg * s - s2 - T::one()));
    let t_term = -l(8.0)
        * gg
        * gg
        * s
        * (g * (d * d - l(4.0) * d * s - s2 + l(2.0)) + l(2.0) * d * r * (s2 - T::one())
            - l(8.0) * r * s)
        - l(2.0)
            * g
            * gg
            * (d * d * (s2 * s2 + l(5.0) * s2 - l(2.0))
                + l(4.0) * d * (s2 * s + s)
                + l(3.0) * s2 * s2
                + l(7.0) * s2
                - l(2.0))
        + g * (d * d + T::one()) * s * (s2 + T::one()) * (s2 + l(4.0))
        + l(8.0) * gg * r * s * (s2 + T::one()) * (d * s - l(2.0));
    pref * (l(16.0) * gg * gg * r * r * s * (l(2.0) * gg * s - s2 - T::one()) - g * eta * t_term)
}

/// Total stationary energy of the band-pass loop in closed form.
///
/// Errors when the loop is unstable (reporting the offending eigenvalue)
/// or when the expression's denominator vanishes, which happens exactly
/// on the stability boundary.
pub fn bp_energy_closed_form<T: Real>(
    gamma_tilde: T,
    eta: T,
    s_tilde: T,
    g_tilde: T,
) -> Result<T> {
    validate_strength(gamma_tilde, eta)?;
    if !s_tilde.is_finite() || !g_tilde.is_finite() || s_tilde <= T::zero() || g_tilde < T::zero()
    {
        return Err(Error::Domain(format!(
            "need s_tilde > 0 and g_tilde >= 0, got s_tilde = {s_tilde}, g_tilde = {g_tilde}"
        )));
    }
    let (s64, g64) = (s_tilde.as_f64(), g_tilde.as_f64());
    if !bp_is_stable(s64, g64) {
        let eig = bp_eigenvalues(s64, g64)
            .into_iter()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .expect("four eigenvalues");
        return Err(Error::Unstable { eigenvalue: eig });
    }
    let denom = T::lit(4.0) * g_tilde * s_tilde - s_tilde * s_tilde - T::one();
    if denom.abs() <= T::lit(1e-12) * (T::one() + s_tilde * s_tilde) {
        return Err(Error::SingularDenominator(format!(
            "4 g_tilde s_tilde - s_tilde^2 - 1 vanishes at s_tilde = {s_tilde}, g_tilde = {g_tilde}"
        )));
    }
    Ok(bp_fluctuation(gamma_tilde, eta, s_tilde, g_tilde) + zero_point_energy(gamma_tilde)?)
}

/// Weak-measurement expansion of the optimized band-pass energy,
///
/// ```text
/// E = 1/(2 sqrt(eta)) + (3 / (16 eta^{1/6})) gamma_tilde^{2/3}
///     + (5 eta^{1/6} / 16) gamma_tilde^{4/3}.
/// ```
pub fn bp_energy_expansion<T: Real>(gamma_tilde: T, eta: T) -> Result<T> {
    if !gamma_tilde.is_finite() || gamma_tilde < T::zero() {
        return Err(Error::Domain(format!(
            "gamma_tilde must be finite and >= 0, got {gamma_tilde}"
        )));
    }
    if !eta.is_finite() || eta <= T::zero() || eta > T::one() {
        return Err(Error::Domain(format!("eta must lie in (0, 1], got {eta}")));
    }
    let sixth = T::one() / T::lit(6.0);
    let e6 = eta.powf(sixth);
    Ok(T::one() / (T::lit(2.0) * eta.sqrt())
        + T::lit(3.0) / (T::lit(16.0) * e6) * gamma_tilde.powf(T::lit(2.0) / T::lit(3.0))
        + T::lit(5.0) * e6 / T::lit(16.0) * gamma_tilde.powf(T::lit(4.0) / T::lit(3.0)))
}

/// Optimized band-pass operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpOptimum {
    pub s_tilde: f64,
    pub g_tilde: f64,
    /// Total stationary energy at the optimum.
    pub energy: f64,
}

/// Starting guesses for the band-pass optimum suggested by the
/// weak-measurement scaling: `s0 = eta^{1/6} gamma_tilde^{1/3}`,
/// `g0 = sqrt(eta) gamma_tilde / 2`.
pub fn bp_seed(gamma_tilde: f64, eta: f64) -> (f64, f64) {
    (
        eta.powf(1.0 / 6.0) * gamma_tilde.powf(1.0 / 3.0),
        eta.sqrt() * gamma_tilde / 2.0,
    )
}

/// Minimizes the closed-form band-pass energy over `(s_tilde, g_tilde)`.
///
/// A 13x13 logarithmic grid around the seed point picks the basin, then a
/// Nelder-Mead simplex in log coordinates polishes it; unstable points
/// evaluate as infinite. Terminates when the simplex energy spread drops
/// below `1e-10`.
pub fn bp_minimize(gamma_tilde: f64, eta: f64) -> Result<BpOptimum> {
    validate_strength(gamma_tilde, eta)?;
    let (s0, g0) = bp_seed(gamma_tilde, eta);
    let objective = |ls: f64, lg: f64| -> f64 {
        let (s, g) = (ls.exp(), lg.exp());
        if !bp_is_stable(s, g) {
            return f64::INFINITY;
        }
        bp_fluctuation(gamma_tilde, eta, s, g)
    };

    let mut best = (f64::INFINITY, s0.ln(), g0.ln());
    let lo = 0.25f64.ln();
    let hi = 4.0f64.ln();
    for i in 0..13 {
        for j in 0..13 {
            let ls = s0.ln() + lo + (hi - lo) * i as f64 / 12.0;
            let lg = g0.ln() + lo + (hi - lo) * j as f64 / 12.0;
            let e = objective(ls, lg);
            if e < best.0 {
                best = (e, ls, lg);
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Optimization(
            "no stable band-pass operating point near the seed".into(),
        ));
    }

    let (ls, lg) = nelder_mead_2d(&objective, (best.1, best.2), 0.08, 1e-10, 600)?;
    let (s, g) = (ls.exp(), lg.exp());
    Ok(BpOptimum {
        s_tilde: s,
        g_tilde: g,
        energy: bp_fluctuation(gamma_tilde, eta, s, g) + zero_point_energy(gamma_tilde)?,
    })
}

/// Minimal Nelder-Mead in two dimensions; returns the best vertex once
/// the vertex-value spread falls below `fatol`.
fn nelder_mead_2d(
    f: &dyn Fn(f64, f64) -> f64,
    x0: (f64, f64),
    step: f64,
    fatol: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    let mut simplex = [
        (x0.0, x0.1),
        (x0.0 + step, x0.1),
        (x0.0, x0.1 + step),
    ];
    let mut values = [
        f(simplex[0].0, simplex[0].1),
        f(simplex[1].0, simplex[1].1),
        f(simplex[2].0, simplex[2].1),
    ];
    for _ in 0..max_iter {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let [b, m, w] = order;
        let spread = values[w] - values[b];
        if spread.is_finite() && spread.abs() < fatol {
            return Ok(simplex[b]);
        }
        let centroid = (
            (simplex[b].0 + simplex[m].0) / 2.0,
            (simplex[b].1 + simplex[m].1) / 2.0,
        );
        let refl = (
            centroid.0 + (centroid.0 - simplex[w].0),
            centroid.1 + (centroid.1 - simplex[w].1),
        );
        let f_refl = f(refl.0, refl.1);
        if f_refl < values[b] {
            let exp = (
                centroid.0 + 2.0 * (centroid.0 - simplex[w].0),
                centroid.1 + 2.0 * (centroid.1 - simplex[w].1),
            );
            let f_exp = f(exp.0, exp.1);
            if f_exp < f_refl {
                simplex[w] = exp;
                values[w] = f_exp;
            } else {
                simplex[w] = refl;
                values[w] = f_refl;
            }
        } else if f_refl < values[m] {
            simplex[w] = refl;
            values[w] = f_refl;
        } else {
            let contr = (
                centroid.0 + 0.5 * (simplex[w].0 - centroid.0),
                centroid.1 + 0.5 * (simplex[w].1 - centroid.1),
            );
            let f_contr = f(contr.0, contr.1);
            if f_contr < values[w] {
                simplex[w] = contr;
                values[w] = f_contr;
            } else {
                for idx in [m, w] {
                    simplex[idx] = (
                        simplex[b].0 + 0.5 * (simplex[idx].0 - simplex[b].0),
                        simplex[b].1 + 0.5 * (simplex[idx].1 - simplex[b].1),
                    );
                    values[idx] = f(simplex[idx].0, simplex[idx].1);
                }
            }
        }
    }
    Err(Error::Optimization(
        "simplex did not converge within the iteration budget".into(),
    ))
}

// ---------------------------------------------------------------------------
// Linear-quadratic-Gaussian control
// ---------------------------------------------------------------------------

/// Conditional (Kalman) steady-state covariances under continuous
/// measurement. With `xi = sqrt(1 + eta gamma_tilde^2)`:
///
/// ```text
/// Vx = 1 / (sqrt(2 eta) sqrt(xi + 1)),
/// Vp = xi Vx,
/// C  = sqrt((xi - 1) / (xi + 1)) / (2 sqrt(eta)).
/// ```
///
/// The determinant is exactly `1 / (4 eta)`, so the conditional purity is
/// `sqrt(eta)`.
pub fn lqg_conditioned_covariances<T: Real>(gamma_tilde: T, eta: T) -> Result<CovarianceTriple<T>> {
    validate_strength(gamma_tilde, eta)?;
    let xi = (T::one() + eta * gamma_tilde * gamma_tilde).sqrt();
    let vx = T::one() / ((T::lit(2.0) * eta).sqrt() * (xi + T::one()).sqrt());
    let vp = xi * vx;
    let cov = ((xi - T::one()) / (xi + T::one())).sqrt() / (T::lit(2.0) * eta.sqrt());
    CovarianceTriple::new(vx, vp, cov)
}

/// Total stationary energy of the optimal controller,
///
/// ```text
/// E = sqrt((xi + 1) / 2) / (2 sqrt(eta)) + gamma_tilde / (2 (xi + 1)),
/// xi = sqrt(1 + eta gamma_tilde^2).
/// ```
pub fn lqg_energy<T: Real>(gamma_tilde: T, eta: T) -> Result<T> {
    validate_strength(gamma_tilde, eta)?;
    let xi = (T::one() + eta * gamma_tilde * gamma_tilde).sqrt();
    Ok(((xi + T::one()) * T::lit(0.5)).sqrt() / (T::lit(2.0) * eta.sqrt())
        + gamma_tilde / (T::lit(2.0) * (xi + T::one())))
}

// ---------------------------------------------------------------------------
// Combined reports
// ---------------------------------------------------------------------------

/// Closed-form performance of a method at its optimal controller setting.
///
/// Supports `lpf`, `cd-bandpass` and `lqg`; the delayed method has no
/// closed form and must be simulated through [`crate::sim`].
pub fn closed_form_report(method: MethodId, gamma_tilde: f64, eta: f64) -> Result<MethodResult> {
    match method {
        MethodId::Lpf => {
            let s = lpf_optimal_s(gamma_tilde, eta)?;
            let total = lpf_energy(gamma_tilde, eta, s)?;
            Ok(MethodResult {
                method,
                energy: EnergyReport::from_total(total, zero_point_energy(gamma_tilde)?)?,
                optimal: OptimalParams {
                    s_tilde: Some(s),
                    g_tilde: None,
                },
                purity: crate::purity::lpf_purity(gamma_tilde, eta, s)?,
                stderr: None,
            })
        }
        MethodId::CdBandpass => {
            let opt = bp_minimize(gamma_tilde, eta)?;
            Ok(MethodResult {
                method,
                energy: EnergyReport::from_total(opt.energy, zero_point_energy(gamma_tilde)?)?,
                optimal: OptimalParams {
                    s_tilde: Some(opt.s_tilde),
                    g_tilde: Some(opt.g_tilde),
                },
                purity: crate::purity::bp_purity(gamma_tilde, eta, opt.s_tilde, opt.g_tilde)?,
                stderr: None,
            })
        }
        MethodId::Lqg => {
            let covs = lqg_conditioned_covariances(gamma_tilde, eta)?;
            let total = lqg_energy(gamma_tilde, eta)?;
            let floor = (covs.vx + covs.vp) * 0.5;
            Ok(MethodResult {
                method,
                energy: EnergyReport::from_total(total, floor)?,
                optimal: OptimalParams::default(),
                purity: eta.sqrt(),
                stderr: None,
            })
        }
        MethodId::CdDelayed => Err(Error::InvalidInput(
            "cd-delayed has no closed form; simulate it instead".into(),
        )),
    }
}

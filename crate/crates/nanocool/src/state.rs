//! Conditional Gaussian state of a continuously measured oscillator.
//!
//! Everything here is expressed in natural oscillator units: time in `1/omega`,
//! position in `sqrt(hbar / (m omega))`, momentum in `sqrt(hbar m omega)`, and
//! energy in `hbar omega`. In these units the free Hamiltonian is
//! `(X^2 + P^2) / 2` and the ground-state energy is `1/2`.
//!
//! Continuous position measurement with dimensionless strength `gamma_tilde`
//! squeezes the conditional wavefunction. The squeeze is tracked by a pair
//! `(R, D)` obeying
//!
//! ```text
//! dR/dt = -2 R D + gamma_tilde,
//! dD/dt = R^2 - D^2 - 1,
//! ```
//!
//! equivalently by the complex variable `z = -R + i D` with
//! `dz/dt = i z^2 - gamma_tilde - i`, which has the closed-form solution
//! implemented by [`z_evolution`].

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::Real;

/// Tolerance used when validating physical inequalities.
const PHYS_TOL: f64 = 1e-12;

/// Dimensionless inputs of the cooling problem.
///
/// `gamma_tilde` is the measurement strength in units of the trap frequency;
/// `eta` is the detection efficiency. Methods that need them carry a filter
/// cutoff `s_tilde` and a feedback gain `g_tilde`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessParams<T: Real = f64> {
    pub gamma_tilde: T,
    pub eta: T,
    pub s_tilde: Option<T>,
    pub g_tilde: Option<T>,
}

impl<T: Real> DimensionlessParams<T> {
    /// Validates `gamma_tilde >= 0` and `0 < eta <= 1`.
    pub fn new(gamma_tilde: T, eta: T) -> Result<Self> {
        let mut issues = Vec::new();
        if !gamma_tilde.is_finite() || gamma_tilde < T::zero() {
            issues.push(format!("gamma_tilde must be finite and >= 0, got {gamma_tilde}"));
        }
        if !eta.is_finite() || eta <= T::zero() || eta > T::one() {
            issues.push(format!("eta must lie in (0, 1], got {eta}"));
        }
        if !issues.is_empty() {
            return Err(Error::InvalidInput(issues.join("; ")));
        }
        Ok(Self {
            gamma_tilde,
            eta,
            s_tilde: None,
            g_tilde: None,
        })
    }

    /// Attaches a filter cutoff; must be finite and `>= 0`.
    pub fn with_s_tilde(mut self, s_tilde: T) -> Result<Self> {
        if !s_tilde.is_finite() || s_tilde < T::zero() {
            return Err(Error::InvalidInput(format!(
                "s_tilde must be finite and >= 0, got {s_tilde}"
            )));
        }
        self.s_tilde = Some(s_tilde);
        Ok(self)
    }

    /// Attaches a feedback gain; must be finite and `>= 0`.
    pub fn with_g_tilde(mut self, g_tilde: T) -> Result<Self> {
        if !g_tilde.is_finite() || g_tilde < T::zero() {
            return Err(Error::InvalidInput(format!(
                "g_tilde must be finite and >= 0, got {g_tilde}"
            )));
        }
        self.g_tilde = Some(g_tilde);
        Ok(self)
    }
}

/// Pure Gaussian wavefunction with mean `(x, p)` and squeeze `(r, d)`.
///
/// The squeeze pair fixes the covariances through
/// `Vx = 1 / (2r)`, `Vp = (r^2 + d^2) / (2r)`, `Cov = d / (2r)`,
/// so `Vx Vp - Cov^2 = 1/4` identically: the state stays pure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPureState<T: Real = f64> {
    pub x: T,
    pub p: T,
    pub r: T,
    pub d: T,
}

impl<T: Real> GaussianPureState<T> {
    /// Requires `r > 0`; the mean and `d` are unrestricted.
    pub fn new(x: T, p: T, r: T, d: T) -> Result<Self> {
        if !r.is_finite() || r <= T::zero() {
            return Err(Error::Domain(format!("squeeze r must be > 0, got {r}")));
        }
        Ok(Self { x, p, r, d })
    }

    /// Covariances implied by the squeeze pair.
    pub fn covariances(&self) -> CovarianceTriple<T> {
        // r > 0 is guaranteed, so this cannot fail.
        wavefunction_covariances(self.r, self.d).expect("validated squeeze")
    }
}

/// Symmetric covariance pair `(Vx, Vp)` plus the cross term.
///
/// A physical Gaussian state satisfies `Vx Vp - Cov^2 >= 1/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceTriple<T: Real = f64> {
    pub vx: T,
    pub vp: T,
    pub cov: T,
}

impl<T: Real> CovarianceTriple<T> {
    /// Validates `vx > 0`, `vp > 0` and the uncertainty bound
    /// `det >= 1/4 - 1e-12`.
    pub fn new(vx: T, vp: T, cov: T) -> Result<Self> {
        if !(vx.is_finite() && vp.is_finite() && cov.is_finite()) || vx <= T::zero() || vp <= T::zero() {
            return Err(Error::Domain(format!(
                "variances must be finite and positive, got vx = {vx}, vp = {vp}"
            )));
        }
        let t = Self { vx, vp, cov };
        let min_det = T::lit(0.25) - T::lit(PHYS_TOL);
        if t.det() < min_det {
            return Err(Error::Domain(format!(
                "covariances violate the uncertainty bound: det = {} < 1/4",
                t.det()
            )));
        }
        Ok(t)
    }

    /// Determinant `Vx Vp - Cov^2` of the covariance matrix.
    pub fn det(&self) -> T {
        self.vx * self.vp - self.cov * self.cov
    }

    /// Mean occupation of a zero-mean state with these covariances,
    /// `(Vx + Vp) / 2 - 1/2` clamped at zero.
    pub fn occupation(&self) -> T {
        let n = (self.vx + self.vp) * T::lit(0.5) - T::lit(0.5);
        n.max(T::zero())
    }
}

/// Stationary energy of a cooling method, split into its irreducible floor
/// and the derived phonon occupation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport<T: Real = f64> {
    /// Total stationary energy in units of `hbar omega`.
    pub total: T,
    /// Floor below which the method cannot cool (conditional or squeezed
    /// zero-point contribution). Always `>= 1/2`.
    pub zero_point: T,
    /// `total - 1/2`, clamped at zero.
    pub occupation: T,
}

impl<T: Real> EnergyReport<T> {
    /// Builds a report from the total energy and the method's floor.
    pub fn from_total(total: T, zero_point: T) -> Result<Self> {
        if zero_point < T::lit(0.5) - T::lit(PHYS_TOL) {
            return Err(Error::Domain(format!(
                "energy floor {zero_point} is below the ground-state energy 1/2"
            )));
        }
        Ok(Self {
            total,
            zero_point,
            occupation: occupation_from_energy(total)?,
        })
    }
}

/// Phonon occupation corresponding to a total energy, `n = E - 1/2`.
///
/// Values within `1e-9` below `1/2` clamp to zero; anything lower is a
/// domain error.
pub fn occupation_from_energy<T: Real>(energy: T) -> Result<T> {
    let half = T::lit(0.5);
    let tol = T::lit(1e-9);
    if !energy.is_finite() || energy < half - tol {
        return Err(Error::Domain(format!(
            "energy {energy} is below the ground-state energy 1/2"
        )));
    }
    Ok((energy - half).max(T::zero()))
}

/// Stationary squeeze `(R, D)` reached under measurement strength
/// `gamma_tilde`:
///
/// ```text
/// R = sqrt((sqrt(1 + gamma_tilde^2) + 1) / 2),
/// D = sqrt((sqrt(1 + gamma_tilde^2) - 1) / 2).
/// ```
///
/// These zero both squeeze ODEs and satisfy `R^2 = 1 + D^2` and
/// `2 R D = gamma_tilde`.
pub fn stationary_squeeze<T: Real>(gamma_tilde: T) -> Result<(T, T)> {
    if !gamma_tilde.is_finite() || gamma_tilde < T::zero() {
        return Err(Error::Domain(format!(
            "gamma_tilde must be finite and >= 0, got {gamma_tilde}"
        )));
    }
    let half = T::lit(0.5);
    let root = (T::one() + gamma_tilde * gamma_tilde).sqrt();
    let r = ((root + T::one()) * half).sqrt();
    let d = ((root - T::one()) * half).sqrt();
    Ok((r, d))
}

/// Energy floor of the stationary squeezed wavefunction,
/// `(Vx + Vp) / 2 = R / 2` with `R` from [`stationary_squeeze`].
///
/// Grows monotonically from `1/2` at `gamma_tilde = 0`.
pub fn zero_point_energy<T: Real>(gamma_tilde: T) -> Result<T> {
    let (r, _) = stationary_squeeze(gamma_tilde)?;
    Ok(r * T::lit(0.5))
}

/// Covariances of a pure Gaussian wavefunction with squeeze `(r, d)`.
pub fn wavefunction_covariances<T: Real>(r: T, d: T) -> Result<CovarianceTriple<T>> {
    if !r.is_finite() || r <= T::zero() {
        return Err(Error::Domain(format!("squeeze r must be > 0, got {r}")));
    }
    let two_r = T::lit(2.0) * r;
    CovarianceTriple::new(
        T::one() / two_r,
        (r * r + d * d) / two_r,
        d / two_r,
    )
}

/// Closed-form squeeze evolution in the complex variable `z = -R + i D`.
///
/// With `z_inf` the root of `1 - i gamma_tilde` in the left half plane,
///
/// ```text
/// z(t) = z_inf (1 + C0 exp(2 i z_inf t)) / (1 - C0 exp(2 i z_inf t)),
/// C0 = (z(0) - z_inf) / (z(0) + z_inf).
/// ```
///
/// Requires `Re z(0) < 0` (positive squeeze `R`); every such start flows to
/// `z_inf` without passing through a pole. Evolving other starts, or
/// backwards in time, can hit a pole of the Möbius map, reported as an
/// evaluation error.
pub fn z_evolution<T: Real>(z0: Complex<T>, t: T, gamma_tilde: T) -> Result<Complex<T>> {
    if !gamma_tilde.is_finite() || gamma_tilde < T::zero() {
        return Err(Error::Domain(format!(
            "gamma_tilde must be finite and >= 0, got {gamma_tilde}"
        )));
    }
    if !(z0.re.is_finite() && z0.im.is_finite()) || z0.re >= T::zero() {
        return Err(Error::Domain(format!(
            "initial squeeze must have Re z < 0, got {}",
            z0.re
        )));
    }
    if !t.is_finite() {
        return Err(Error::Domain("time must be finite".into()));
    }
    // Principal sqrt lands in the right half plane; the attractor is its
    // negative.
    let z_inf = -Complex::new(T::one(), -gamma_tilde).sqrt();
    let denom0 = z0 + z_inf;
    if denom0.norm() < T::lit(1e-300) {
        return Err(Error::Evaluation("initial squeeze cancels the attractor".into()));
    }
    let c0 = (z0 - z_inf) / denom0;
    let two_i = Complex::new(T::zero(), T::lit(2.0));
    let w = c0 * (two_i * z_inf * Complex::new(t, T::zero())).exp();
    let denom = Complex::new(T::one(), T::zero()) - w;
    if denom.norm() < T::lit(1e-14) * (T::one() + w.norm()) {
        return Err(Error::Evaluation(format!(
            "squeeze evolution passes through a pole at t = {t}"
        )));
    }
    Ok(z_inf * (Complex::new(T::one(), T::zero()) + w) / denom)
}

/// Squeeze pair `(R, D)` after evolving for time `t` from `(r0, d0)`.
pub fn evolve_squeeze<T: Real>(r0: T, d0: T, t: T, gamma_tilde: T) -> Result<(T, T)> {
    if !r0.is_finite() || r0 <= T::zero() {
        return Err(Error::Domain(format!("squeeze r must be > 0, got {r0}")));
    }
    let z = z_evolution(Complex::new(-r0, d0), t, gamma_tilde)?;
    Ok((-z.re, z.im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn stationary_squeeze_matches_closed_form() {
        let (r, d) = stationary_squeeze(0.1f64).unwrap();
        assert_relative_eq!(r, 1.0012461141278126, max_relative = 1e-14);
        assert_relative_eq!(d, 0.04993777183700205, max_relative = 1e-14);
        let (r, d) = stationary_squeeze(1.0f64).unwrap();
        assert_relative_eq!(r, 1.09868411346781, max_relative = 1e-14);
        assert_relative_eq!(d, 0.4550898605622274, max_relative = 1e-14);
    }

    #[test]
    fn zero_point_energy_values() {
        assert_relative_eq!(
            zero_point_energy(0.1f64).unwrap(),
            0.5006230570639063,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            zero_point_energy(1.0f64).unwrap(),
            0.549342056733905,
            max_relative = 1e-14
        );
        assert_eq!(zero_point_energy(0.0f64).unwrap(), 0.5);
    }

    #[test]
    fn squeeze_covariances_stay_pure() {
        let c = wavefunction_covariances(2.0f64, 1.0).unwrap();
        assert_eq!((c.vx, c.vp, c.cov), (0.25, 1.25, 0.25));
        assert_relative_eq!(c.det(), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn z_evolution_frozen_point() {
        // Independently checked against an RK4 integration of
        // dz/dt = i z^2 - gamma - i at dt = 1e-5 (agreement ~7e-15).
        let z = z_evolution(Complex::new(-1.0f64, 0.0), 1.0, 0.5).unwrap();
        assert_relative_eq!(z.re, -1.176215226045716, max_relative = 1e-12);
        assert_relative_eq!(z.im, 0.3233932918929951, max_relative = 1e-12);
    }

    #[test]
    fn z_evolution_fixed_point_is_stationary() {
        let g = 0.7f64;
        let (r, d) = stationary_squeeze(g).unwrap();
        let z = z_evolution(Complex::new(-r, d), 13.7, g).unwrap();
        assert_relative_eq!(z.re, -r, max_relative = 1e-12);
        assert_relative_eq!(z.im, d, max_relative = 1e-12);
    }

    #[test]
    fn z_evolution_rejects_wrong_half_plane() {
        assert!(matches!(
            z_evolution(Complex::new(0.5f64, 0.0), 1.0, 0.1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn occupation_clamps_near_ground_state() {
        assert_eq!(occupation_from_energy(0.5f64 - 1e-12).unwrap(), 0.0);
        assert_relative_eq!(occupation_from_energy(0.75f64).unwrap(), 0.25);
        assert!(occupation_from_energy(0.4f64).is_err());
    }

    #[test]
    fn params_validation_collects_issues() {
        let err = DimensionlessParams::new(-1.0f64, 2.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gamma_tilde") && msg.contains("eta"));
        let p = DimensionlessParams::new(0.1f64, 0.8).unwrap();
        assert!(p.with_s_tilde(-0.5).is_err());
    }

    #[test]
    fn covariance_triple_enforces_uncertainty() {
        assert!(CovarianceTriple::new(0.1f64, 0.1, 0.0).is_err());
        let c = CovarianceTriple::new(0.5f64, 0.5, 0.0).unwrap();
        assert_eq!(c.occupation(), 0.0);
    }
}

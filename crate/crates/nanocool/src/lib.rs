//! Feedback cooling of an optically trapped nanoparticle under continuous
//! position measurement.
//!
//! The crate models a harmonically trapped particle whose position is read
//! out continuously with dimensionless measurement strength `gamma_tilde`
//! and detection efficiency `eta`, and compares four ways of turning the
//! photocurrent into a cooling force:
//!
//! * low-pass filtered position feedback ([`control::lpf_energy`]),
//! * cold damping through a band-pass filter ([`control::bp_energy_closed_form`]),
//! * cold damping with a quarter-period delayed photocurrent
//!   ([`sim::simulate_delayed_cd`]),
//! * optimal linear-quadratic-Gaussian control ([`control::lqg_energy`]).
//!
//! Closed-form stationary energies and purities come from the `state`,
//! `control` and `purity` modules; stochastic trajectory simulation and
//! Monte Carlo estimates live in `sim`; `moments` provides the stationary
//! second-moment solver they are checked against; `calibrate` converts
//! laboratory parameters into the dimensionless ones.
//!
//! All quantities are in natural oscillator units (`hbar = m = omega = 1`)
//! unless a function says otherwise.

pub mod calibrate;
pub mod control;
pub mod error;
pub mod moments;
pub mod purity;
pub mod real;
pub mod sim;
pub mod state;

pub use error::{Error, Result};
pub use real::Real;

/// Double-precision dimensionless parameter set.
pub type Params = state::DimensionlessParams<f64>;
/// Double-precision pure Gaussian state.
pub type PureState = state::GaussianPureState<f64>;
/// Double-precision covariance triple.
pub type Covariances = state::CovarianceTriple<f64>;
/// Double-precision energy report.
pub type Energy = state::EnergyReport<f64>;

//! Stationary second moments of linear stochastic systems.
//!
//! The feedback loops in this crate reduce to Ito systems
//! `dy = A y dt + sum_k b_k dW_k` with a possibly complex state vector.
//! Their stationary fluctuation matrix `S = E[y y^T]` (plain transpose,
//! no conjugation, so complex filter coordinates keep their analytic
//! structure) solves the Lyapunov equation
//!
//! ```text
//! A S + S A^T + sum_k b_k b_k^T = 0.
//! ```
//!
//! Two independent solvers are provided: a direct Kronecker solve and a
//! spectral solve in the eigenbasis of `A`. They are checked against each
//! other in the test suite; production code uses the direct route.
//!
//! A marginal (zero) eigenvalue appears in the low-pass feedback loop,
//! where particle and filter drift together while every relative
//! coordinate relaxes. [`ZeroModeMask`] names that mode so the solver can
//! remove its diffusing contribution and return the stationary moments of
//! the masked coordinates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Linear Ito system `dy = A y dt + sum_k b_k dW_k`.
///
/// The Wiener processes `W_k` are independent; a noise vector with several
/// nonzero entries drives those coordinates with perfectly correlated
/// increments, which is how measurement back-action and the photocurrent
/// shot noise enter the feedback loops.
#[derive(Debug, Clone)]
pub struct LinearSdeSystem {
    drift: DMatrix<Complex64>,
    noise: Vec<DVector<Complex64>>,
    labels: Vec<String>,
}

impl LinearSdeSystem {
    pub fn new(
        drift: DMatrix<Complex64>,
        noise: Vec<DVector<Complex64>>,
        labels: Vec<String>,
    ) -> Result<Self> {
        let n = drift.nrows();
        if drift.ncols() != n || n == 0 {
            return Err(Error::InvalidInput(format!(
                "drift matrix must be square and non-empty, got {}x{}",
                drift.nrows(),
                drift.ncols()
            )));
        }
        if noise.is_empty() || noise.iter().any(|b| b.len() != n) {
            return Err(Error::InvalidInput(
                "need at least one noise vector, each of the state dimension".into(),
            ));
        }
        if labels.len() != n {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinate labels, got {}",
                n,
                labels.len()
            )));
        }
        Ok(Self { drift, noise, labels })
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn drift(&self) -> &DMatrix<Complex64> {
        &self.drift
    }

    pub fn noise(&self) -> &[DVector<Complex64>] {
        &self.noise
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Diffusion matrix `sum_k b_k b_k^T` (plain transpose).
    pub fn diffusion(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for b in &self.noise {
            d += b * b.transpose();
        }
        d
    }

    /// Eigenvalues of the drift matrix via its Schur form.
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        schur_eigenvalues(&self.drift)
    }

    /// Largest real part over the drift spectrum.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        Ok(self
            .eigenvalues()?
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Marginal mode of a drift matrix, given by its right and left null
/// vectors. The left vector is rescaled so `left^T right = 1`.
#[derive(Debug, Clone)]
pub struct ZeroModeMask {
    right: DVector<Complex64>,
    left: DVector<Complex64>,
}

impl ZeroModeMask {
    pub fn new(right: DVector<Complex64>, left: DVector<Complex64>) -> Result<Self> {
        if right.len() != left.len() || right.len() == 0 {
            return Err(Error::InvalidInput(
                "null vectors must share a nonzero dimension".into(),
            ));
        }
        let dot: Complex64 = right.iter().zip(left.iter()).map(|(r, l)| r * l).sum();
        if dot.norm() < 1e-12 * right.norm() * left.norm() {
            return Err(Error::InvalidInput(
                "left and right null vectors are orthogonal; the mode is defective".into(),
            ));
        }
        Ok(Self {
            right,
            left: left / dot,
        })
    }

    pub fn right(&self) -> &DVector<Complex64> {
        &self.right
    }

    /// Normalized left vector, `left^T right = 1`.
    pub fn left(&self) -> &DVector<Complex64> {
        &self.left
    }

    /// Removes the marginal component from a noise vector.
    fn project(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let amp: Complex64 = self.left.iter().zip(b.iter()).map(|(l, x)| l * x).sum();
        b - &self.right * amp
    }
}

/// Stationary fluctuation matrix `E[y y^T]` together with solver metadata.
#[derive(Debug, Clone)]
pub struct SecondMomentMatrix {
    pub values: DMatrix<Complex64>,
    pub labels: Vec<String>,
    /// True when every retained mode decays; always the case on success.
    pub stable: bool,
    /// Infinity-norm Lyapunov residual of the returned matrix.
    pub residual: f64,
}

impl SecondMomentMatrix {
    /// Real part of entry `(i, j)`; physical observables live here.
    pub fn entry_re(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)].re
    }
}

/// Largest real part over the spectrum of a square complex matrix.
pub fn spectral_abscissa(a: &DMatrix<Complex64>) -> Result<f64> {
    Ok(schur_eigenvalues(a)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn schur_eigenvalues(a: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Evaluation("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok(t.diagonal().iter().copied().collect())
}

/// Checks the spectrum for the requested solve: without a mask all
/// eigenvalues must decay; with a mask exactly one may sit at zero.
fn check_spectrum(
    sys: &LinearSdeSystem,
    mask: Option<&ZeroModeMask>,
) -> Result<Vec<Complex64>> {
    let eigs = sys.eigenvalues()?;
    let scale = sys.drift.iter().map(|x| x.norm()).fold(1.0, f64::max);
    let zero_tol = 1e-8 * scale;
    match mask {
        None => {
            for l in &eigs {
                if l.re >= 0.0 {
                    return Err(Error::Unstable { eigenvalue: *l });
                }
            }
        }
        Some(_) => {
            let marginal: Vec<_> = eigs.iter().filter(|l| l.norm() <= zero_tol).collect();
            if marginal.len() != 1 {
                return Err(Error::InvalidInput(format!(
                    "mask expects exactly one marginal mode, spectrum has {}",
                    marginal.len()
                )));
            }
            for l in &eigs {
                if l.norm() > zero_tol && l.re >= 0.0 {
                    return Err(Error::Unstable { eigenvalue: *l });
                }
            }
        }
    }
    Ok(eigs)
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

fn lyapunov_residual(
    a: &DMatrix<Complex64>,
    s: &DMatrix<Complex64>,
    n: &DMatrix<Complex64>,
) -> f64 {
    let r = a * s + s * a.transpose() + n;
    r.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn inf_norm(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Symmetrizes with the plain transpose; the Lyapunov solution is
/// symmetric and this suppresses asymmetric round-off from the solve.
fn symmetrize(s: &mut DMatrix<Complex64>) {
    let st = s.transpose();
    *s = (&*s + st) * Complex64::new(0.5, 0.0);
}

fn finish(
    sys: &LinearSdeSystem,
    mut s: DMatrix<Complex64>,
    n_eff: &DMatrix<Complex64>,
    mask: Option<&ZeroModeMask>,
) -> Result<SecondMomentMatrix> {
    symmetrize(&mut s);
    if let Some(m) = mask {
        // The least-squares solution is defined only up to the marginal
        // plane; pin the gauge by zeroing the mode's self-moment.
        let w = m.left();
        let amp = (w.transpose() * &s * w)[(0, 0)];
        s -= m.right() * m.right().transpose() * amp;
        symmetrize(&mut s);
    }
    let residual = lyapunov_residual(&sys.drift, &s, n_eff);
    let scale = inf_norm(&s).max(1.0);
    if !residual.is_finite() || residual > 1e-7 * scale {
        return Err(Error::Evaluation(format!(
            "Lyapunov residual {residual:.3e} exceeds tolerance for moment scale {scale:.3e}"
        )));
    }
    Ok(SecondMomentMatrix {
        values: s,
        labels: sys.labels.clone(),
        stable: true,
        residual,
    })
}

/// Effective diffusion matrix: with a mask, noise feeding the marginal
/// mode is removed first, leaving the stationary masked dynamics.
fn effective_diffusion(sys: &LinearSdeSystem, mask: Option<&ZeroModeMask>) -> DMatrix<Complex64> {
    match mask {
        None => sys.diffusion(),
        Some(m) => {
            let n = sys.dim();
            let mut d = DMatrix::zeros(n, n);
            for b in &sys.noise {
                let bp = m.project(b);
                d += &bp * bp.transpose();
            }
            d
        }
    }
}

/// Stationary second moments by the direct Kronecker route.
///
/// Solves `(I (x) A + A (x) I) vec(S) = -vec(N)` with an LU factorization;
/// with a mask the system is singular and the minimum-norm least-squares
/// solution is taken instead, then gauge-fixed so the marginal mode
/// carries no self-moment. Masked coordinates are any linear functionals
/// that annihilate the mode's right vector; their moments are read
/// directly from `S`.
pub fn stationary_second_moments(
    sys: &LinearSdeSystem,
    mask: Option<&ZeroModeMask>,
) -> Result<SecondMomentMatrix> {
    check_spectrum(sys, mask)?;
    let n = sys.dim();
    let a = &sys.drift;
    let n_eff = effective_diffusion(sys, mask);
    let eye = DMatrix::<Complex64>::identity(n, n);
    let m = kron(&eye, a) + kron(a, &eye);
    let rhs = DVector::from_iterator(n * n, n_eff.iter().map(|x| -x));

    let s_vec = match mask {
        None => m
            .full_piv_lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Evaluation("Kronecker system is singular".into()))?,
        Some(_) => {
            let svd = m.svd(true, true);
            let smax = svd
                .singular_values
                .iter()
                .fold(0.0f64, |acc, &x| acc.max(x));
            svd.solve(&rhs, 1e-10 * smax.max(1.0))
                .map_err(|e| Error::Evaluation(format!("least-squares solve failed: {e}")))?
        }
    };
    let s = DMatrix::from_iterator(n, n, s_vec.iter().copied());
    finish(sys, s, &n_eff, mask)
}

/// Stationary second moments through the eigenbasis of the drift matrix.
///
/// Writing `A = V diag(lambda) V^{-1}`, the transformed equation is
/// diagonal: `S' = -N'_{ij} / (lambda_i + lambda_j)` with
/// `N' = V^{-1} N V^{-T}`. Kept as an independent cross-check of
/// [`stationary_second_moments`]; fails with a degenerate-spectrum error
/// when the eigenbasis is ill-conditioned.
pub fn stationary_second_moments_spectral(
    sys: &LinearSdeSystem,
    mask: Option<&ZeroModeMask>,
) -> Result<SecondMomentMatrix> {
    let eigs = check_spectrum(sys, mask)?;
    let n = sys.dim();
    let a = &sys.drift;
    let scale = a.iter().map(|x| x.norm()).fold(1.0, f64::max);

    let v = eigenvector_matrix(a, &eigs, scale)?;
    let v_inv = v
        .clone()
        .full_piv_lu()
        .try_inverse()
        .ok_or_else(|| Error::DegenerateSpectrum("eigenvector matrix is singular".into()))?;

    let n_eff = effective_diffusion(sys, mask);
    let n_t = &v_inv * &n_eff * v_inv.transpose();
    let mut s_t = DMatrix::<Complex64>::zeros(n, n);
    let pair_tol = 1e-8 * scale;
    let n_scale = inf_norm(&n_eff).max(1e-300);
    for i in 0..n {
        for j in 0..n {
            let denom = eigs[i] + eigs[j];
            if denom.norm() <= pair_tol {
                if n_t[(i, j)].norm() > 1e-6 * n_scale {
                    return Err(Error::DegenerateSpectrum(format!(
                        "noise feeds a non-decaying eigenvalue pair ({}, {})",
                        eigs[i], eigs[j]
                    )));
                }
                s_t[(i, j)] = Complex64::new(0.0, 0.0);
            } else {
                s_t[(i, j)] = -n_t[(i, j)] / denom;
            }
        }
    }
    let s = &v * s_t * v.transpose();
    finish(sys, s, &n_eff, mask)
}

/// Eigenvectors by shifted inverse iteration from the Schur eigenvalues.
fn eigenvector_matrix(
    a: &DMatrix<Complex64>,
    eigs: &[Complex64],
    scale: f64,
) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let eye = DMatrix::<Complex64>::identity(n, n);
    let mut v = DMatrix::<Complex64>::zeros(n, n);
    for (k, lambda) in eigs.iter().enumerate() {
        let mut shift = 1e-11 * scale;
        let mut vec = None;
        'shift: for _ in 0..4 {
            let shifted = a - &eye * (lambda + Complex64::new(shift, shift));
            let lu = shifted.full_piv_lu();
            // Deterministic start with all components populated.
            let mut x = DVector::from_fn(n, |i, _| {
                Complex64::new(1.0, ((i + 2 * k + 1) as f64).sin())
            });
            x /= Complex64::new(x.norm(), 0.0);
            for _ in 0..3 {
                match lu.solve(&x) {
                    Some(y) => {
                        let norm = y.norm();
                        if !norm.is_finite() || norm == 0.0 {
                            shift *= 10.0;
                            continue 'shift;
                        }
                        x = y / Complex64::new(norm, 0.0);
                    }
                    None => {
                        shift *= 10.0;
                        continue 'shift;
                    }
                }
            }
            vec = Some(x);
            break;
        }
        let x = vec.ok_or_else(|| {
            Error::DegenerateSpectrum(format!("inverse iteration failed for eigenvalue {lambda}"))
        })?;
        v.set_column(k, &x);
    }
    let sv = v.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let smin = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if smin <= 0.0 || smax / smin > 1e10 {
        return Err(Error::DegenerateSpectrum(format!(
            "eigenvector matrix condition number {:.2e} is too large",
            smax / smin
        )));
    }
    Ok(v)
}

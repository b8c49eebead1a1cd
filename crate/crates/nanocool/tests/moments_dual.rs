//! The stationary-moment solver is checked three independent ways: the
//! Kronecker solve against the eigenbasis route on random stable systems,
//! against a hand-reduced model for the masked low-pass loop, and against
//! trajectory averages.

use nalgebra::{DMatrix, DVector};
use nanocool::control::{conditional_noise, lpf_masked_moments};
use nanocool::moments::{
    stationary_second_moments, stationary_second_moments_spectral, LinearSdeSystem,
};
use nanocool::sim::{integrate_linear, Scheme, SimConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn random_stable_system(rng: &mut ChaCha8Rng) -> LinearSdeSystem {
    let n = rng.gen_range(2..=4);
    let raw = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    // A crude Gershgorin shift guarantees every eigenvalue sits strictly
    // in the left half plane.
    let shift: f64 = raw
        .row_iter()
        .map(|row| row.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
        + rng.gen_range(0.2..1.0);
    let a = raw - DMatrix::identity(n, n) * c(shift);
    let n_noise = rng.gen_range(1..=2);
    let noise = (0..n_noise)
        .map(|_| DVector::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)))
        .collect();
    let labels = (0..n).map(|i| format!("y{i}")).collect();
    LinearSdeSystem::new(a, noise, labels).unwrap()
}

#[test]
fn direct_and_eigenbasis_routes_agree_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0usize;
    for _ in 0..100 {
        let sys = random_stable_system(&mut rng);
        let direct = stationary_second_moments(&sys, None).unwrap();
        // Random matrices can come out badly conditioned for the
        // eigenbasis route; it is allowed to refuse, not to be wrong.
        let Ok(spectral) = stationary_second_moments_spectral(&sys, None) else {
            continue;
        };
        compared += 1;
        let scale = direct
            .values
            .iter()
            .map(|v| v.norm())
            .fold(1.0_f64, f64::max);
        for i in 0..sys.dim() {
            for j in 0..sys.dim() {
                let diff = (direct.values[(i, j)] - spectral.values[(i, j)]).norm();
                assert!(
                    diff < 1e-8 * scale,
                    "entry ({i},{j}): {} vs {}",
                    direct.values[(i, j)],
                    spectral.values[(i, j)]
                );
            }
        }
    }
    assert!(compared >= 80, "only {compared} systems were comparable");
}

#[test]
fn solutions_satisfy_the_lyapunov_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let sys = random_stable_system(&mut rng);
        let s = stationary_second_moments(&sys, None).unwrap();
        let a = sys.drift();
        let res = a * &s.values + &s.values * a.transpose() + sys.diffusion();
        let scale = s.values.iter().map(|v| v.norm()).fold(1.0_f64, f64::max);
        assert!(res.iter().map(|v| v.norm()).fold(0.0_f64, f64::max) < 1e-9 * scale);
        assert!(s.stable);
    }
}

/// The masked three-coordinate loop must match the same physics written
/// directly in the stationary pair (relative coordinate, momentum).
#[test]
fn masked_low_pass_moments_match_the_reduced_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let gamma_tilde = 10f64.powf(rng.gen_range(-1.7_f64..0.3));
        let eta = rng.gen_range(0.2..1.0);
        let s_tilde = rng.gen_range(0.05..1.5);

        let (u2, up, p2) = lpf_masked_moments(gamma_tilde, eta, s_tilde).unwrap();

        let ((b1x, b1p), (b2x, b2p)) = conditional_noise(gamma_tilde, eta);
        let filter_gain = s_tilde / (2.0 * gamma_tilde * eta).sqrt();
        let a = DMatrix::from_row_slice(2, 2, &[c(-s_tilde), c(1.0), c(-1.0), c(0.0)]);
        let reduced = LinearSdeSystem::new(
            a,
            vec![
                DVector::from_row_slice(&[c(b1x - filter_gain), c(b1p)]),
                DVector::from_row_slice(&[c(b2x), c(b2p)]),
            ],
            vec!["U".into(), "P".into()],
        )
        .unwrap();
        let s = stationary_second_moments(&reduced, None).unwrap();

        let scale = u2.abs().max(p2.abs()).max(1e-12);
        assert!((s.entry_re(0, 0) - u2).abs() < 1e-9 * scale);
        assert!((s.entry_re(0, 1) - up).abs() < 1e-9 * scale);
        assert!((s.entry_re(1, 1) - p2).abs() < 1e-9 * scale);
    }
}

#[test]
fn trajectory_averages_agree_with_the_solver() {
    // Damped oscillator with a single momentum noise channel.
    let zeta = 0.3;
    let b = 0.8;
    let sys = LinearSdeSystem::new(
        DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-1.0), c(-2.0 * zeta)]),
        vec![DVector::from_row_slice(&[c(0.0), c(b)])],
        vec!["X".into(), "P".into()],
    )
    .unwrap();
    let exact = stationary_second_moments(&sys, None).unwrap();

    let cfg = SimConfig {
        dt: 2e-3,
        t_total: 4000.0,
        burn_in: 40.0,
        n_traj: 32,
        seed: 99,
        scheme: Scheme::WeakOrder2,
    };
    let mc = integrate_linear(&sys, None, &cfg, None).unwrap();
    for (i, j) in [(0, 0), (1, 1), (0, 1)] {
        let e = mc.estimate(i, j);
        let target = exact.entry_re(i, j);
        assert!(
            (e.mean - target).abs() < 3.0 * e.stderr.max(1e-4),
            "entry ({i},{j}): {} +- {} vs {target}",
            e.mean,
            e.stderr
        );
    }
}

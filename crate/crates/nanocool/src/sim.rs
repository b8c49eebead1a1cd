//! Stochastic trajectory simulation of the feedback loops.
//!
//! Trajectories follow the conditional dynamics driven by measurement
//! back-action and photocurrent shot noise. The integrator supports plain
//! Euler-Maruyama and an explicit weak-order-2 predictor-corrector (Heun)
//! step; for the additive-noise linear systems simulated here, Gaussian
//! increments make the Heun step weakly second order.
//!
//! Determinism contract: a fixed [`SimConfig`] (seed included) produces
//! bit-identical estimates. Each trajectory reads an independent,
//! deterministically derived stream of the counter-based generator, and
//! all reductions run in a fixed order.

use std::f64::consts::PI;
use std::fmt;
use std::fs::{create_dir_all, File};
use std::io::{BufWriter, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::control::lqg_conditioned_covariances;
use crate::error::{Error, Result};
use crate::moments::LinearSdeSystem;
use crate::state::{stationary_squeeze, CovarianceTriple, EnergyReport};

/// State that crosses this magnitude is declared divergent.
const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Minimum number of batch means behind every standard error.
const MIN_BATCHES: usize = 16;

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    EulerMaruyama,
    WeakOrder2,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::EulerMaruyama => "euler-maruyama",
            Scheme::WeakOrder2 => "weak-order-2",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler-maruyama" | "euler" => Ok(Scheme::EulerMaruyama),
            "weak-order-2" | "weak2" => Ok(Scheme::WeakOrder2),
            other => Err(Error::InvalidInput(format!(
                "unknown scheme '{other}' (expected euler-maruyama or weak-order-2)"
            ))),
        }
    }
}

/// Monte Carlo run configuration. Times are in natural units (one trap
/// period is `2 pi`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_total: f64,
    pub burn_in: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for SimConfig {
    /// `dt = pi/2000` (a quarter period is exactly 1000 steps), 200 periods
    /// of burn-in, 2000 periods total, 64 trajectories, weak-order-2 steps.
    fn default() -> Self {
        Self {
            dt: PI / 2000.0,
            t_total: 2000.0 * 2.0 * PI,
            burn_in: 200.0 * 2.0 * PI,
            n_traj: 64,
            seed: 1,
            scheme: Scheme::WeakOrder2,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if !self.dt.is_finite() || self.dt <= 0.0 {
            issues.push(format!("dt must be > 0, got {}", self.dt));
        }
        if !self.t_total.is_finite() || self.t_total <= 0.0 {
            issues.push(format!("t_total must be > 0, got {}", self.t_total));
        }
        if !self.burn_in.is_finite() || self.burn_in < 0.0 || self.burn_in >= self.t_total {
            issues.push(format!(
                "burn_in must lie in [0, t_total), got {}",
                self.burn_in
            ));
        }
        if self.n_traj == 0 {
            issues.push("n_traj must be at least 1".into());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(issues.join("; ")))
        }
    }

    fn steps_total(&self) -> usize {
        (self.t_total / self.dt).round() as usize
    }

    fn steps_burn(&self) -> usize {
        (self.burn_in / self.dt).round() as usize
    }

    /// Recording chunks per trajectory so that at least [`MIN_BATCHES`]
    /// batch means exist overall.
    fn chunks_per_traj(&self) -> usize {
        MIN_BATCHES.div_ceil(self.n_traj)
    }
}

/// Scalar Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    /// Standard error over batch means; zero when only one batch exists.
    pub stderr: f64,
    pub n_effective: usize,
}

/// Ring buffer holding one quarter period of photocurrent samples.
///
/// The length is `round(pi / (2 dt))`; construction fails unless that
/// length times `dt` reproduces `pi/2` to within `1e-12`, so the delay is
/// exact on the grid. The buffer starts zero-filled: the feedback force
/// is off during the first quarter period.
#[derive(Debug, Clone)]
pub struct DelayBuffer {
    buf: Vec<f64>,
    head: usize,
}

impl DelayBuffer {
    pub fn new(dt: f64) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
        }
        let len = (PI / (2.0 * dt)).round() as usize;
        if len == 0 || (len as f64 * dt - PI / 2.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "dt = {dt} does not divide the quarter period pi/2 exactly"
            )));
        }
        Ok(Self {
            buf: vec![0.0; len],
            head: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Stores the newest sample and returns the one from a quarter period
    /// ago (zero while the buffer is still filling).
    pub fn push_replace(&mut self, value: f64) -> f64 {
        let old = self.buf[self.head];
        self.buf[self.head] = value;
        self.head += 1;
        if self.head == self.buf.len() {
            self.head = 0;
        }
        old
    }
}

/// Trajectory dump request: one CSV per trajectory, header `t,<labels...>`,
/// real parts of the coordinates, every `stride`-th step.
#[derive(Debug, Clone)]
pub struct DumpSpec {
    pub dir: PathBuf,
    pub prefix: String,
    pub stride: usize,
}

struct DumpWriter {
    writer: BufWriter<File>,
    stride: usize,
    counter: usize,
}

impl DumpWriter {
    fn create(spec: &DumpSpec, trajectory: usize, labels: &[&str]) -> Result<Self> {
        create_dir_all(&spec.dir)?;
        let path = spec.dir.join(format!("{}{trajectory:04}.csv", spec.prefix));
        let mut writer = BufWriter::new(File::create(path)?);
        writeln!(writer, "t,{}", labels.join(","))?;
        Ok(Self {
            writer,
            stride: spec.stride.max(1),
            counter: 0,
        })
    }

    fn record(&mut self, t: f64, values: &[f64]) -> Result<()> {
        if self.counter % self.stride == 0 {
            write!(self.writer, "{t}")?;
            for v in values {
                write!(self.writer, ",{v}")?;
            }
            writeln!(self.writer)?;
        }
        self.counter += 1;
        Ok(())
    }
}

fn trajectory_rng(seed: u64, trajectory: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory as u64);
    rng
}

/// Accumulates equal-length chunk means in a fixed order.
struct BatchAccumulator {
    batches: Vec<Vec<f64>>,
    width: usize,
}

impl BatchAccumulator {
    fn new(width: usize) -> Self {
        Self {
            batches: Vec::new(),
            width,
        }
    }

    fn push(&mut self, sums: &[f64], count: usize) {
        debug_assert_eq!(sums.len(), self.width);
        self.batches
            .push(sums.iter().map(|s| s / count as f64).collect());
    }

    fn n_batches(&self) -> usize {
        self.batches.len()
    }

    fn mean(&self, idx: usize) -> f64 {
        let n = self.batches.len() as f64;
        self.batches.iter().map(|b| b[idx]).sum::<f64>() / n
    }

    fn stderr(&self, idx: usize) -> f64 {
        let n = self.batches.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean(idx);
        let var = self
            .batches
            .iter()
            .map(|b| (b[idx] - mean).powi(2))
            .sum::<f64>()
            / (n as f64 - 1.0);
        (var / n as f64).sqrt()
    }

    /// Sample covariance between two components of the batch means,
    /// scaled to the covariance of the grand means.
    fn covariance(&self, i: usize, j: usize) -> f64 {
        let n = self.batches.len();
        if n < 2 {
            return 0.0;
        }
        let (mi, mj) = (self.mean(i), self.mean(j));
        let cov = self
            .batches
            .iter()
            .map(|b| (b[i] - mi) * (b[j] - mj))
            .sum::<f64>()
            / (n as f64 - 1.0);
        cov / n as f64
    }
}

/// Stationary second moments of linear functionals of the state, with one
/// standard error per entry.
#[derive(Debug, Clone)]
pub struct MomentMatrixEstimate {
    /// Time-and-ensemble averages `E[(o_i^T y)(o_j^T y)]`, plain products.
    pub mean: DMatrix<Complex64>,
    /// Standard error of the real part of each entry.
    pub stderr: DMatrix<f64>,
    pub n_effective: usize,
}

impl MomentMatrixEstimate {
    pub fn estimate(&self, i: usize, j: usize) -> MomentEstimate {
        MomentEstimate {
            mean: self.mean[(i, j)].re,
            stderr: self.stderr[(i, j)],
            n_effective: self.n_effective,
        }
    }
}

/// Integrates a linear system and returns stationary second moments of the
/// requested observables (identity coordinates when `observables` is
/// `None`).
///
/// Trajectories start from the zero state; averages run over
/// `[burn_in, t_total]` and standard errors come from at least
/// [`MIN_BATCHES`] batch means (whole trajectories when enough exist,
/// otherwise time chunks). Any coordinate passing `1e6` in magnitude
/// aborts the run with a divergence report.
///
/// Observables matter for loops with a marginal mode: the low-pass loop's
/// raw position diffuses, and only functionals annihilating the common
/// mode (the relative coordinate and the momentum) are stationary.
pub fn integrate_linear(
    sys: &LinearSdeSystem,
    observables: Option<&[DVector<Complex64>]>,
    cfg: &SimConfig,
    dump: Option<&DumpSpec>,
) -> Result<MomentMatrixEstimate> {
    cfg.validate()?;
    let n = sys.dim();
    let identity: Vec<DVector<Complex64>>;
    let obs: &[DVector<Complex64>] = match observables {
        Some(o) => {
            if o.is_empty() || o.iter().any(|v| v.len() != n) {
                return Err(Error::InvalidInput(
                    "observables must be non-empty vectors of the state dimension".into(),
                ));
            }
            o
        }
        None => {
            identity = (0..n)
                .map(|i| {
                    DVector::from_fn(n, |j, _| {
                        if i == j {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                })
                .collect();
            &identity
        }
    };
    let m = obs.len();

    let steps_total = cfg.steps_total();
    let steps_burn = cfg.steps_burn();
    let record_steps = steps_total - steps_burn;
    let chunks = cfg.chunks_per_traj();
    let chunk_len = (record_steps / chunks).max(1);

    let a = sys.drift();
    let noise = sys.noise();
    let labels: Vec<&str> = sys.labels().iter().map(|s| s.as_str()).collect();

    let mut acc = BatchAccumulator::new(2 * m * m);
    let mut grand = vec![Complex64::new(0.0, 0.0); m * m];
    let mut grand_count = 0usize;

    let mut y = DVector::<Complex64>::zeros(n);
    let mut drift1 = DVector::<Complex64>::zeros(n);
    let mut drift2 = DVector::<Complex64>::zeros(n);
    let mut y_pred = DVector::<Complex64>::zeros(n);
    let mut kick = DVector::<Complex64>::zeros(n);
    let mut ovals = vec![Complex64::new(0.0, 0.0); m];
    let mut chunk_sums = vec![0.0f64; 2 * m * m];

    let dt = cfg.dt;
    let sqrt_dt = dt.sqrt();

    for traj in 0..cfg.n_traj {
        let mut rng = trajectory_rng(cfg.seed, traj);
        y.fill(Complex64::new(0.0, 0.0));
        let mut writer = match dump {
            Some(spec) => Some(DumpWriter::create(spec, traj, &labels)?),
            None => None,
        };
        chunk_sums.iter_mut().for_each(|s| *s = 0.0);
        let mut in_chunk = 0usize;
        let mut chunks_done = 0usize;

        for step in 0..steps_total {
            // Shared shot-noise/back-action increments for this step.
            kick.fill(Complex64::new(0.0, 0.0));
            for b in noise {
                let xi: f64 = rng.sample(StandardNormal);
                let amp = Complex64::new(xi * sqrt_dt, 0.0);
                kick.zip_apply(b, |k, bv| *k += bv * amp);
            }
            a.mul_to(&y, &mut drift1);
            match cfg.scheme {
                Scheme::EulerMaruyama => {
                    for i in 0..n {
                        y[i] += drift1[i] * Complex64::new(dt, 0.0) + kick[i];
                    }
                }
                Scheme::WeakOrder2 => {
                    for i in 0..n {
                        y_pred[i] = y[i] + drift1[i] * Complex64::new(dt, 0.0) + kick[i];
                    }
                    a.mul_to(&y_pred, &mut drift2);
                    for i in 0..n {
                        y[i] += (drift1[i] + drift2[i]) * Complex64::new(0.5 * dt, 0.0) + kick[i];
                    }
                }
            }
            let t = (step + 1) as f64 * dt;
            for i in 0..n {
                if y[i].norm() > DIVERGENCE_THRESHOLD {
                    return Err(Error::Diverged {
                        time: t,
                        trajectory: traj,
                        threshold: DIVERGENCE_THRESHOLD,
                    });
                }
            }
            if let Some(w) = writer.as_mut() {
                let reals: Vec<f64> = y.iter().map(|v| v.re).collect();
                w.record(t, &reals)?;
            }
            if step >= steps_burn && chunks_done < chunks {
                for (i, o) in obs.iter().enumerate() {
                    let mut v = Complex64::new(0.0, 0.0);
                    for k in 0..n {
                        v += o[k] * y[k];
                    }
                    ovals[i] = v;
                }
                for i in 0..m {
                    for j in 0..m {
                        let prod = ovals[i] * ovals[j];
                        chunk_sums[2 * (i * m + j)] += prod.re;
                        chunk_sums[2 * (i * m + j) + 1] += prod.im;
                        grand[i * m + j] += prod;
                    }
                }
                grand_count += 1;
                in_chunk += 1;
                if in_chunk == chunk_len {
                    acc.push(&chunk_sums, chunk_len);
                    chunk_sums.iter_mut().for_each(|s| *s = 0.0);
                    in_chunk = 0;
                    chunks_done += 1;
                }
            }
        }
    }

    let n_batches = acc.n_batches();
    let mut mean = DMatrix::<Complex64>::zeros(m, m);
    let mut stderr = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            mean[(i, j)] = grand[i * m + j] / grand_count as f64;
            stderr[(i, j)] = acc.stderr(2 * (i * m + j));
        }
    }
    Ok(MomentMatrixEstimate {
        mean,
        stderr,
        n_effective: n_batches,
    })
}

/// Photocurrent samples from a position record and the Wiener increments
/// that drove it: `I_k = X_k + dW_k / (sqrt(2 gamma_tilde eta) dt)`.
///
/// The increments must be the same ones used in the state update;
/// measurement noise and conditional dynamics are perfectly correlated.
pub fn simulate_photocurrent(
    x: &[f64],
    dw: &[f64],
    gamma_tilde: f64,
    eta: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    if x.len() != dw.len() {
        return Err(Error::InvalidInput(format!(
            "position record ({}) and increments ({}) differ in length",
            x.len(),
            dw.len()
        )));
    }
    if !(gamma_tilde.is_finite() && gamma_tilde > 0.0) || !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "need gamma_tilde > 0 and eta in (0, 1], got {gamma_tilde}, {eta}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    let scale = 1.0 / ((2.0 * gamma_tilde * eta).sqrt() * dt);
    Ok(x.iter().zip(dw).map(|(xi, wi)| xi + wi * scale).collect())
}

/// Ensemble moments of the delayed cold-damping loop.
#[derive(Debug, Clone)]
pub struct DelayedMoments {
    pub x2: f64,
    pub p2: f64,
    pub xp: f64,
    batches: BatchVault,
    pub n_effective: usize,
}

/// Per-batch means of `(X^2, P^2, XP)`; kept so downstream quantities can
/// propagate correlated errors.
#[derive(Debug, Clone)]
struct BatchVault(Vec<[f64; 3]>);

impl DelayedMoments {
    fn accumulator(&self) -> BatchAccumulator {
        BatchAccumulator {
            batches: self.batches.0.iter().map(|b| b.to_vec()).collect(),
            width: 3,
        }
    }

    /// Standard errors of `(x2, p2, xp)`.
    pub fn stderr(&self) -> [f64; 3] {
        let acc = self.accumulator();
        [acc.stderr(0), acc.stderr(1), acc.stderr(2)]
    }

    /// Fluctuation energy `(E[X^2] + E[P^2]) / 2` with its standard error.
    pub fn energy_estimate(&self) -> MomentEstimate {
        let acc = self.accumulator();
        let var = 0.25
            * (acc.covariance(0, 0) + acc.covariance(1, 1) + 2.0 * acc.covariance(0, 1));
        MomentEstimate {
            mean: 0.5 * (self.x2 + self.p2),
            stderr: var.max(0.0).sqrt(),
            n_effective: self.n_effective,
        }
    }

    /// Ensemble purity against conditional covariances, standard error by
    /// the delta method over the batch means.
    pub fn purity_estimate(&self, cond: &CovarianceTriple<f64>) -> Result<MomentEstimate> {
        let (tx, tp, tc) = (cond.vx + self.x2, cond.vp + self.p2, cond.cov + self.xp);
        let det = tx * tp - tc * tc;
        if det < 0.25 - 1e-9 {
            return Err(Error::Domain(format!(
                "ensemble covariances violate the uncertainty bound: det = {det}"
            )));
        }
        let purity = 1.0 / (2.0 * det.sqrt());
        // dP/dm = -P/(2 det) * d(det)/dm for m = (x2, p2, xp).
        let scale = -purity / (2.0 * det);
        let grad = [scale * tp, scale * tx, scale * (-2.0 * tc)];
        let acc = self.accumulator();
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += grad[i] * grad[j] * acc.covariance(i, j);
            }
        }
        Ok(MomentEstimate {
            mean: purity,
            stderr: var.max(0.0).sqrt(),
            n_effective: self.n_effective,
        })
    }
}

/// Simulates the delayed cold-damping loop and returns the stationary
/// ensemble moments of the conditional means `(X_c, P_c)`.
///
/// Dynamics in natural units, with `Vx`, `C` the conditional covariances
/// from [`lqg_conditioned_covariances`] (feedback does not alter them):
///
/// ```text
/// dX_c = P_c dt + sqrt(2 eta gamma_tilde) Vx dW,
/// dP_c = -X_c dt + F dt + sqrt(2 eta gamma_tilde) C dW,
/// F(t) = g_tilde * I(t - pi/2),
/// I_k  = X_k + dW_k / (sqrt(2 eta gamma_tilde) dt).
/// ```
///
/// The delay buffer starts zero-filled (feedback off for the first
/// quarter period); the burn-in swallows that transient. The optional
/// dump writes `t,X,P,I` per trajectory.
pub fn delayed_moments(
    gamma_tilde: f64,
    eta: f64,
    g_tilde: f64,
    cfg: &SimConfig,
    dump: Option<&DumpSpec>,
) -> Result<DelayedMoments> {
    cfg.validate()?;
    if !g_tilde.is_finite() || g_tilde < 0.0 {
        return Err(Error::InvalidInput(format!(
            "g_tilde must be finite and >= 0, got {g_tilde}"
        )));
    }
    let cond = lqg_conditioned_covariances(gamma_tilde, eta)?;
    let amp = (2.0 * eta * gamma_tilde).sqrt();
    let (sig_x, sig_p) = (amp * cond.vx, amp * cond.cov);
    let record_scale = 1.0 / (amp * cfg.dt);

    let steps_total = cfg.steps_total();
    let steps_burn = cfg.steps_burn();
    let record_steps = steps_total - steps_burn;
    let chunks = cfg.chunks_per_traj();
    let chunk_len = (record_steps / chunks).max(1);

    let dt = cfg.dt;
    let sqrt_dt = dt.sqrt();
    let mut acc = BatchAccumulator::new(3);
    let mut grand = [0.0f64; 3];
    let mut grand_count = 0usize;

    for traj in 0..cfg.n_traj {
        let mut rng = trajectory_rng(cfg.seed, traj);
        let mut delay = DelayBuffer::new(dt)?;
        let (mut x, mut p) = (0.0f64, 0.0f64);
        let mut writer = match dump {
            Some(spec) => Some(DumpWriter::create(spec, traj, &["X", "P", "I"])?),
            None => None,
        };
        let mut chunk_sums = [0.0f64; 3];
        let mut in_chunk = 0usize;
        let mut chunks_done = 0usize;

        for step in 0..steps_total {
            let xi: f64 = rng.sample(StandardNormal);
            let dw = xi * sqrt_dt;
            let record = x + dw * record_scale;
            let force = g_tilde * delay.push_replace(record);

            match cfg.scheme {
                Scheme::EulerMaruyama => {
                    let ax = p;
                    let ap = -x + force;
                    x += ax * dt + sig_x * dw;
                    p += ap * dt + sig_p * dw;
                }
                Scheme::WeakOrder2 => {
                    // Heun predictor-corrector; the delayed force is held
                    // constant across the step.
                    let ax = p;
                    let ap = -x + force;
                    let xb = x + ax * dt + sig_x * dw;
                    let pb = p + ap * dt + sig_p * dw;
                    let axb = pb;
                    let apb = -xb + force;
                    x += 0.5 * (ax + axb) * dt + sig_x * dw;
                    p += 0.5 * (ap + apb) * dt + sig_p * dw;
                }
            }
            let t = (step + 1) as f64 * dt;
            if x.abs() > DIVERGENCE_THRESHOLD || p.abs() > DIVERGENCE_THRESHOLD {
                return Err(Error::Diverged {
                    time: t,
                    trajectory: traj,
                    threshold: DIVERGENCE_THRESHOLD,
                });
            }
            if let Some(w) = writer.as_mut() {
                w.record(t, &[x, p, record])?;
            }
            if step >= steps_burn && chunks_done < chunks {
                chunk_sums[0] += x * x;
                chunk_sums[1] += p * p;
                chunk_sums[2] += x * p;
                grand[0] += x * x;
                grand[1] += p * p;
                grand[2] += x * p;
                grand_count += 1;
                in_chunk += 1;
                if in_chunk == chunk_len {
                    acc.push(&chunk_sums, chunk_len);
                    chunk_sums = [0.0; 3];
                    in_chunk = 0;
                    chunks_done += 1;
                }
            }
        }
    }

    Ok(DelayedMoments {
        x2: grand[0] / grand_count as f64,
        p2: grand[1] / grand_count as f64,
        xp: grand[2] / grand_count as f64,
        n_effective: acc.n_batches(),
        batches: BatchVault(acc.batches.iter().map(|b| [b[0], b[1], b[2]]).collect()),
    })
}

/// Runs the delayed cold-damping method and assembles a full report.
///
/// The total energy is the fluctuation energy of the conditional means
/// plus the conditional covariance floor `(Vx + Vp)/2`; purity combines
/// the same moments with the conditional covariances.
pub fn simulate_delayed_cd(
    gamma_tilde: f64,
    eta: f64,
    g_tilde: f64,
    cfg: &SimConfig,
    dump: Option<&DumpSpec>,
) -> Result<crate::control::MethodResult> {
    let dm = delayed_moments(gamma_tilde, eta, g_tilde, cfg, dump)?;
    let cond = lqg_conditioned_covariances(gamma_tilde, eta)?;
    let floor = 0.5 * (cond.vx + cond.vp);
    let fluct = dm.energy_estimate();
    let purity = dm.purity_estimate(&cond)?;
    Ok(crate::control::MethodResult {
        method: crate::control::MethodId::CdDelayed,
        energy: EnergyReport::from_total(fluct.mean + floor, floor)?,
        optimal: crate::control::OptimalParams {
            s_tilde: None,
            g_tilde: Some(g_tilde),
        },
        purity: purity.mean,
        stderr: Some(fluct.stderr),
    })
}

/// Optimized delayed-feedback gain and the energy estimate at it.
#[derive(Debug, Clone)]
pub struct DelayedOptimum {
    pub g_tilde: f64,
    /// Total energy estimate at the optimum, under the search config.
    pub energy: MomentEstimate,
}

/// Golden-section search for the delayed-feedback gain.
///
/// Candidates share the configured seed (common random numbers), which
/// makes the noisy objective effectively smooth in the gain; the bracket
/// starts around the analytic guess `g0 = 2 eta gamma_tilde Vx` (the gain
/// at which the delayed shot noise cancels the back-action kick injected
/// a quarter period earlier) and shrinks until two significant digits of
/// the gain are fixed. Divergent candidates count as infinitely bad.
pub fn optimize_delayed_gain(gamma_tilde: f64, eta: f64, cfg: &SimConfig) -> Result<DelayedOptimum> {
    cfg.validate()?;
    let cond = lqg_conditioned_covariances(gamma_tilde, eta)?;
    let g0 = 2.0 * eta * gamma_tilde * cond.vx;
    let floor = 0.5 * (cond.vx + cond.vp);

    let mut best: Option<(f64, MomentEstimate)> = None;
    let mut eval = |g: f64| -> f64 {
        match delayed_moments(gamma_tilde, eta, g, cfg, None) {
            Ok(dm) => {
                let est = dm.energy_estimate();
                let total = MomentEstimate {
                    mean: est.mean + floor,
                    stderr: est.stderr,
                    n_effective: est.n_effective,
                };
                if best.as_ref().map_or(true, |(_, b)| total.mean < b.mean) {
                    best = Some((g, total));
                }
                total.mean
            }
            // A divergent candidate is infinitely bad; the search steers
            // back into the stable region.
            Err(_) => f64::INFINITY,
        }
    };

    let phi = 0.618_033_988_749_894_9_f64;
    let (mut a, mut b) = (0.5 * g0, 1.6 * g0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    for _ in 0..60 {
        if b - a < 0.005 * (0.5 * (a + b)) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = eval(d);
        }
    }
    match best {
        Some((g, energy)) if energy.mean.is_finite() => Ok(DelayedOptimum { g_tilde: g, energy }),
        _ => Err(Error::Optimization(
            "every candidate gain diverged during the search".into(),
        )),
    }
}

/// Feedback-off heating check: ensemble energy growth under measurement
/// back-action alone.
///
/// Simulates `dX = P dt`, `dP = -X dt` plus the conditional noise of both
/// detection channels, bins the ensemble mean energy
/// `E = (X^2 + P^2)/2` in time, and fits a line per trajectory. The
/// returned estimate is the mean slope with its standard error; the
/// closed-form value is `gamma_tilde / 4` independent of `eta`, because
/// the detected and lost channels' noise powers add to the full
/// back-action.
pub fn heating_rate_check(gamma_tilde: f64, eta: f64, cfg: &SimConfig) -> Result<MomentEstimate> {
    cfg.validate()?;
    if !gamma_tilde.is_finite() || gamma_tilde < 0.0 {
        return Err(Error::InvalidInput(format!(
            "gamma_tilde must be finite and >= 0, got {gamma_tilde}"
        )));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!("eta must lie in (0, 1], got {eta}")));
    }
    let (r, dsq) = stationary_squeeze(gamma_tilde)?;
    let detected = (eta * gamma_tilde / (2.0 * r * r)).sqrt();
    let lost = ((1.0 - eta) * gamma_tilde / (2.0 * r * r)).sqrt();
    let (b1x, b1p) = (detected, detected * dsq);
    let (b2x, b2p) = (lost, lost * dsq);

    let steps_total = cfg.steps_total();
    let steps_burn = cfg.steps_burn();
    let record_steps = steps_total - steps_burn;
    let n_bins = 64usize.min(record_steps);
    if n_bins < 2 {
        return Err(Error::Evaluation(
            "recording window too short for a slope fit".into(),
        ));
    }
    let bin_len = record_steps / n_bins;
    let dt = cfg.dt;
    let sqrt_dt = dt.sqrt();

    let mut slopes = Vec::with_capacity(cfg.n_traj);
    for traj in 0..cfg.n_traj {
        let mut rng = trajectory_rng(cfg.seed, traj);
        let (mut x, mut p) = (0.0f64, 0.0f64);
        let mut bins = vec![0.0f64; n_bins];
        let mut counts = vec![0usize; n_bins];
        for step in 0..steps_total {
            let xi1: f64 = rng.sample(StandardNormal);
            let xi2: f64 = rng.sample(StandardNormal);
            let (k1, k2) = (xi1 * sqrt_dt, xi2 * sqrt_dt);
            let ax = p;
            let ap = -x;
            match cfg.scheme {
                Scheme::EulerMaruyama => {
                    x += ax * dt + b1x * k1 + b2x * k2;
                    p += ap * dt + b1p * k1 + b2p * k2;
                }
                Scheme::WeakOrder2 => {
                    let xb = x + ax * dt + b1x * k1 + b2x * k2;
                    let pb = p + ap * dt + b1p * k1 + b2p * k2;
                    x += 0.5 * (ax + pb) * dt + b1x * k1 + b2x * k2;
                    p += 0.5 * (ap - xb) * dt + b1p * k1 + b2p * k2;
                }
            }
            if x.abs() > DIVERGENCE_THRESHOLD || p.abs() > DIVERGENCE_THRESHOLD {
                return Err(Error::Diverged {
                    time: (step + 1) as f64 * dt,
                    trajectory: traj,
                    threshold: DIVERGENCE_THRESHOLD,
                });
            }
            if step >= steps_burn {
                let idx = ((step - steps_burn) / bin_len).min(n_bins - 1);
                bins[idx] += 0.5 * (x * x + p * p);
                counts[idx] += 1;
            }
        }
        // Least-squares slope of bin-mean energy against bin-center time.
        let mut pts = Vec::with_capacity(n_bins);
        for (i, (sum, count)) in bins.iter().zip(&counts).enumerate() {
            if *count == 0 {
                continue;
            }
            let t_mid = cfg.burn_in + (i as f64 + 0.5) * bin_len as f64 * dt;
            pts.push((t_mid, sum / *count as f64));
        }
        let n = pts.len() as f64;
        let tbar = pts.iter().map(|(t, _)| t).sum::<f64>() / n;
        let ebar = pts.iter().map(|(_, e)| e).sum::<f64>() / n;
        let num: f64 = pts.iter().map(|(t, e)| (t - tbar) * (e - ebar)).sum();
        let den: f64 = pts.iter().map(|(t, _)| (t - tbar).powi(2)).sum();
        if den == 0.0 {
            return Err(Error::Evaluation("slope fit is degenerate".into()));
        }
        slopes.push(num / den);
    }

    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let stderr = if slopes.len() > 1 {
        let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(MomentEstimate {
        mean,
        stderr,
        n_effective: slopes.len(),
    })
}

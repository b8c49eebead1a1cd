//! Command-line interface for the feedback-cooling toolkit: occupation
//! curves, parameter optimization, Monte Carlo runs, purity tables, and
//! SI calibration.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nanocool::calibrate::{natural_units_report, ExperimentParams, GammaSource, NaturalUnitsReport};
use nanocool::control::{
    bp_eigenvalues, bp_is_stable, bp_minimize, bp_system, lpf_min_occupation, lpf_observables,
    lpf_optimal_s, lpf_system, lqg_energy, MethodId,
};
use nanocool::error::{Error, Result};
use nanocool::purity::{bp_purity, delayed_purity, lpf_purity, lqg_purity};
use nanocool::sim::{
    integrate_linear, optimize_delayed_gain, simulate_delayed_cd, DumpSpec, SimConfig,
};
use nanocool::state::zero_point_energy;

/// Environment variable overriding the default master seed.
const SEED_ENV: &str = "NANOCOOL_SEED";

#[derive(Parser)]
#[command(
    name = "nanocool",
    version,
    about = "Quantum feedback cooling of a trapped nanoparticle: \
             achievable energies, purities, and Monte Carlo simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Occupation versus measurement strength for one method
    Curve(CurveArgs),
    /// Optimal feedback parameters at a single point
    Optimize(OptimizeArgs),
    /// Monte Carlo run with a summary block and optional trajectory dumps
    Simulate(SimulateArgs),
    /// Purity table over methods and measurement strengths
    Purity(PurityArgs),
    /// Convert laboratory parameters to natural units
    Calibrate(CalibrateArgs),
}

#[derive(Args, Debug, Clone)]
struct SimFlags {
    /// Integrator step in natural time (default: pi/2000)
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated span per trajectory, in trap periods (default: 2000)
    #[arg(long)]
    time: Option<f64>,
    /// Discarded initial span, in trap periods (default: 200)
    #[arg(long = "burn-in")]
    burn_in: Option<f64>,
    /// Number of trajectories (default: 64)
    #[arg(long)]
    ntraj: Option<usize>,
    /// Master seed; the NANOCOOL_SEED environment variable overrides the
    /// built-in default when this flag is absent
    #[arg(long)]
    seed: Option<u64>,
    /// Stepping scheme: euler-maruyama or weak-order-2
    #[arg(long)]
    scheme: Option<String>,
}

impl SimFlags {
    fn build(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::default();
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(t) = self.time {
            cfg.t_total = t * 2.0 * PI;
        }
        if let Some(b) = self.burn_in {
            cfg.burn_in = b * 2.0 * PI;
        }
        if let Some(n) = self.ntraj {
            cfg.n_traj = n;
        }
        cfg.seed = match self.seed {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(text) => text.parse().map_err(|_| {
                    Error::InvalidInput(format!("{SEED_ENV} must be an unsigned integer, got '{text}'"))
                })?,
                Err(_) => cfg.seed,
            },
        };
        if let Some(s) = &self.scheme {
            cfg.scheme = s.parse()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CurveArgs {
    /// Feedback method: lpf, cd-bandpass, cd-delayed, lqg
    #[arg(long)]
    method: String,
    /// Detection efficiency in (0, 1]
    #[arg(long)]
    eta: f64,
    /// Measurement strength: single value or inclusive start:step:stop grid
    #[arg(long)]
    gamma: String,
    /// Output CSV path (stdout when absent)
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    sim: SimFlags,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    eta: f64,
    /// Measurement strength (single value)
    #[arg(long)]
    gamma: f64,
    #[command(flatten)]
    sim: SimFlags,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    gamma: f64,
    /// Filter cutoff (lpf, cd-bandpass); optimal value when absent
    #[arg(long)]
    s: Option<f64>,
    /// Feedback gain (cd-bandpass, cd-delayed); optimized when absent
    #[arg(long)]
    g: Option<f64>,
    /// Energy floor convention for cd-delayed: conditioned or zero-point
    #[arg(long, default_value = "conditioned")]
    floor: String,
    /// Directory for per-trajectory CSV dumps (one file per trajectory)
    #[arg(long)]
    dump_dir: Option<PathBuf>,
    /// Record every n-th step in the dumps
    #[arg(long, default_value_t = 1)]
    dump_stride: usize,
    #[command(flatten)]
    sim: SimFlags,
}

#[derive(Args)]
struct PurityArgs {
    /// Comma-separated methods, or "all"
    #[arg(long, default_value = "all")]
    methods: String,
    #[arg(long)]
    eta: f64,
    /// Measurement strength: single value or inclusive start:step:stop grid
    #[arg(long)]
    gamma: String,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    sim: SimFlags,
}

#[derive(Args)]
struct CalibrateArgs {
    /// key = value parameter file (mass, omega, precision, eta, heating_rate)
    #[arg(long)]
    params: Option<PathBuf>,
    /// Particle mass in kg
    #[arg(long)]
    mass: Option<f64>,
    /// Trap angular frequency in rad/s
    #[arg(long)]
    omega: Option<f64>,
    /// Imprecision noise floor in m/sqrt(Hz), two-sided convention
    #[arg(long)]
    precision: Option<f64>,
    /// Detection efficiency in (0, 1]
    #[arg(long)]
    eta: Option<f64>,
    /// Heating rate in J/s, an alternative to the noise floor
    #[arg(long)]
    heating_rate: Option<f64>,
    /// Skip the Monte Carlo estimate for the delayed method
    #[arg(long)]
    skip_delayed: bool,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::MissingFields(_) | Error::Domain(_) => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Curve(args) => cmd_curve(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Purity(args) => cmd_purity(args),
        Command::Calibrate(args) => cmd_calibrate(args),
    }
}

/// Inclusive `start:step:stop` grid, or a single value.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("'{s}' is not a number")))
    };
    match parts.len() {
        1 => Ok(vec![num(parts[0])?]),
        3 => {
            let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if step <= 0.0 || stop < start {
                return Err(Error::InvalidInput(format!(
                    "grid '{spec}' needs step > 0 and stop >= start"
                )));
            }
            let count = ((stop - start) / step).round() as usize + 1;
            if count > 1_000_000 {
                return Err(Error::InvalidInput(format!("grid '{spec}' is too large")));
            }
            let mut values = Vec::new();
            let mut k = 0usize;
            loop {
                let v = start + k as f64 * step;
                if v > stop + 1e-9 * step {
                    break;
                }
                values.push(v);
                k += 1;
            }
            Ok(values)
        }
        _ => Err(Error::InvalidInput(format!(
            "grid '{spec}' must be a value or start:step:stop"
        ))),
    }
}

fn parse_method(name: &str) -> Result<MethodId> {
    name.parse()
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Lighter configuration for gain searches: a quarter of the recording
/// span and of the trajectories, bounded below so estimates stay usable.
fn search_config(cfg: &SimConfig) -> SimConfig {
    SimConfig {
        t_total: cfg.burn_in + (cfg.t_total - cfg.burn_in) / 4.0,
        n_traj: (cfg.n_traj / 4).max(4),
        ..*cfg
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct CurveRow {
    occupation: f64,
    optimal_s: Option<f64>,
    optimal_g: Option<f64>,
    stderr: Option<f64>,
}

fn curve_row(method: MethodId, gamma: f64, eta: f64, cfg: &SimConfig) -> Result<CurveRow> {
    match method {
        MethodId::Lpf => Ok(CurveRow {
            occupation: lpf_min_occupation(gamma, eta)?,
            optimal_s: Some(lpf_optimal_s(gamma, eta)?),
            optimal_g: None,
            stderr: None,
        }),
        MethodId::Lqg => Ok(CurveRow {
            occupation: lqg_energy(gamma, eta)? - 0.5,
            optimal_s: None,
            optimal_g: None,
            stderr: None,
        }),
        MethodId::CdBandpass => {
            let opt = bp_minimize(gamma, eta)?;
            Ok(CurveRow {
                occupation: opt.energy - 0.5,
                optimal_s: Some(opt.s_tilde),
                optimal_g: Some(opt.g_tilde),
                stderr: None,
            })
        }
        MethodId::CdDelayed => {
            let found = optimize_delayed_gain(gamma, eta, &search_config(cfg))?;
            let res = simulate_delayed_cd(gamma, eta, found.g_tilde, cfg, None)?;
            Ok(CurveRow {
                occupation: res.energy.occupation,
                optimal_s: None,
                optimal_g: Some(found.g_tilde),
                stderr: res.stderr,
            })
        }
    }
}

fn cmd_curve(args: CurveArgs) -> Result<()> {
    let method = parse_method(&args.method)?;
    let grid = parse_grid(&args.gamma)?;
    let cfg = args.sim.build()?;
    let mut out = open_output(&args.output)?;
    writeln!(out, "gamma_tilde,occupation,optimal_s,optimal_g,stderr")?;
    for &gamma in &grid {
        match curve_row(method, gamma, args.eta, &cfg) {
            Ok(row) => writeln!(
                out,
                "{gamma},{},{},{},{}",
                row.occupation,
                fmt_opt(row.optimal_s),
                fmt_opt(row.optimal_g),
                fmt_opt(row.stderr)
            )?,
            Err(e) => writeln!(out, "{gamma},status=error:{},,,", e.kind())?,
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_optimize(args: OptimizeArgs) -> Result<()> {
    let method = parse_method(&args.method)?;
    let cfg = args.sim.build()?;
    println!("method: {method}");
    println!("gamma_tilde: {}", args.gamma);
    println!("eta: {}", args.eta);
    match method {
        MethodId::Lpf => {
            println!("optimal_s: {}", lpf_optimal_s(args.gamma, args.eta)?);
            println!("occupation: {}", lpf_min_occupation(args.gamma, args.eta)?);
        }
        MethodId::Lqg => {
            println!("occupation: {}", lqg_energy(args.gamma, args.eta)? - 0.5);
        }
        MethodId::CdBandpass => {
            let opt = bp_minimize(args.gamma, args.eta)?;
            println!("optimal_s: {}", opt.s_tilde);
            println!("optimal_g: {}", opt.g_tilde);
            println!("occupation: {}", opt.energy - 0.5);
        }
        MethodId::CdDelayed => {
            let found = optimize_delayed_gain(args.gamma, args.eta, &cfg)?;
            println!("optimal_g: {}", found.g_tilde);
            println!("occupation: {}", found.energy.mean - 0.5);
            println!("stderr: {}", found.energy.stderr);
        }
    }
    Ok(())
}

fn dump_spec(args: &SimulateArgs, method: MethodId) -> Option<DumpSpec> {
    args.dump_dir.as_ref().map(|dir| DumpSpec {
        dir: dir.clone(),
        prefix: format!("{method}-"),
        stride: args.dump_stride,
    })
}

fn print_summary_header(method: MethodId, args: &SimulateArgs, cfg: &SimConfig) {
    println!("method: {method}");
    println!("gamma_tilde: {}", args.gamma);
    println!("eta: {}", args.eta);
    println!("scheme: {}", cfg.scheme);
    println!("dt: {}", cfg.dt);
    println!("periods: {}", cfg.t_total / (2.0 * PI));
    println!("trajectories: {}", cfg.n_traj);
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let method = parse_method(&args.method)?;
    let cfg = args.sim.build()?;
    let dump = dump_spec(&args, method);
    match method {
        MethodId::Lqg => Err(Error::InvalidInput(
            "the optimal-control benchmark has no finite-gain trajectory model; \
             use curve or optimize for its closed forms"
                .into(),
        )),
        MethodId::Lpf => {
            let s = match args.s {
                Some(s) => s,
                None => lpf_optimal_s(args.gamma, args.eta)?,
            };
            let sys = lpf_system(args.gamma, args.eta, s)?;
            let obs = lpf_observables();
            let est = integrate_linear(&sys, Some(&obs), &cfg, dump.as_ref())?;
            let (u2, p2) = (est.estimate(0, 0), est.estimate(1, 1));
            let energy = 0.5 * (u2.mean + p2.mean) + zero_point_energy(args.gamma)?;
            let stderr = 0.5 * (u2.stderr.powi(2) + p2.stderr.powi(2)).sqrt();
            print_summary_header(method, &args, &cfg);
            println!("s_tilde: {s}");
            println!("energy: {energy}");
            println!("occupation: {}", energy - 0.5);
            println!("purity: {}", lpf_purity(args.gamma, args.eta, s)?);
            println!("stderr: {stderr}");
            Ok(())
        }
        MethodId::CdBandpass => {
            let (s, g) = match (args.s, args.g) {
                (Some(s), Some(g)) => (s, g),
                _ => {
                    let opt = bp_minimize(args.gamma, args.eta)?;
                    (args.s.unwrap_or(opt.s_tilde), args.g.unwrap_or(opt.g_tilde))
                }
            };
            if !bp_is_stable(s, g) {
                let ceiling = 0.25 * (s + 1.0 / s);
                eprintln!(
                    "band-pass loop is unstable: g_tilde = {g} violates the \
                     stability condition 0 < g_tilde < (s_tilde + 1/s_tilde)/4 = {ceiling}"
                );
                let worst = bp_eigenvalues(s, g)
                    .into_iter()
                    .max_by(|a, b| a.re.total_cmp(&b.re))
                    .expect("four eigenvalues");
                return Err(Error::Unstable { eigenvalue: worst });
            }
            let sys = bp_system(args.gamma, args.eta, s, g)?;
            let est = integrate_linear(&sys, None, &cfg, dump.as_ref())?;
            let (x2, p2) = (est.estimate(0, 0), est.estimate(1, 1));
            let energy = 0.5 * (x2.mean + p2.mean) + zero_point_energy(args.gamma)?;
            let stderr = 0.5 * (x2.stderr.powi(2) + p2.stderr.powi(2)).sqrt();
            print_summary_header(method, &args, &cfg);
            println!("s_tilde: {s}");
            println!("g_tilde: {g}");
            println!("energy: {energy}");
            println!("occupation: {}", energy - 0.5);
            println!("purity: {}", bp_purity(args.gamma, args.eta, s, g)?);
            println!("stderr: {stderr}");
            Ok(())
        }
        MethodId::CdDelayed => {
            let g = match args.g {
                Some(g) => g,
                None => optimize_delayed_gain(args.gamma, args.eta, &search_config(&cfg))?.g_tilde,
            };
            let res = simulate_delayed_cd(args.gamma, args.eta, g, &cfg, dump.as_ref())?;
            let (energy, occupation) = match args.floor.as_str() {
                "conditioned" => (res.energy.total, res.energy.occupation),
                "zero-point" => {
                    // Replace the conditioned covariance floor with the
                    // squeezed zero-point energy.
                    let fluct = res.energy.total - res.energy.zero_point;
                    let total = fluct + zero_point_energy(args.gamma)?;
                    (total, total - 0.5)
                }
                other => {
                    return Err(Error::InvalidInput(format!(
                        "--floor must be conditioned or zero-point, got '{other}'"
                    )))
                }
            };
            print_summary_header(method, &args, &cfg);
            println!("g_tilde: {g}");
            println!("floor: {}", args.floor);
            println!("energy: {energy}");
            println!("occupation: {occupation}");
            println!("purity: {}", res.purity);
            println!("stderr: {}", res.stderr.unwrap_or(0.0));
            Ok(())
        }
    }
}

fn cmd_purity(args: PurityArgs) -> Result<()> {
    let methods: Vec<MethodId> = if args.methods == "all" {
        MethodId::ALL.to_vec()
    } else {
        args.methods
            .split(',')
            .map(|m| parse_method(m.trim()))
            .collect::<Result<_>>()?
    };
    let grid = parse_grid(&args.gamma)?;
    let cfg = args.sim.build()?;
    let mut out = open_output(&args.output)?;
    writeln!(out, "method,eta,gamma_tilde,purity,stderr")?;
    for &method in &methods {
        for &gamma in &grid {
            let row: Result<(f64, Option<f64>)> = match method {
                MethodId::Lpf => {
                    lpf_optimal_s(gamma, args.eta).and_then(|s| {
                        lpf_purity(gamma, args.eta, s).map(|p| (p, None))
                    })
                }
                MethodId::Lqg => lqg_purity(args.eta).map(|p| (p, None)),
                MethodId::CdBandpass => bp_minimize(gamma, args.eta).and_then(|opt| {
                    bp_purity(gamma, args.eta, opt.s_tilde, opt.g_tilde).map(|p| (p, None))
                }),
                MethodId::CdDelayed => optimize_delayed_gain(gamma, args.eta, &search_config(&cfg))
                    .and_then(|found| delayed_purity(gamma, args.eta, found.g_tilde, &cfg))
                    .map(|est| (est.mean, Some(est.stderr))),
            };
            match row {
                Ok((purity, stderr)) => writeln!(
                    out,
                    "{method},{},{gamma},{purity},{}",
                    args.eta,
                    fmt_opt(stderr)
                )?,
                Err(e) => writeln!(out, "{method},{},{gamma},status=error:{},", args.eta, e.kind())?,
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let params = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ExperimentParams::parse(&text)?
        }
        None => {
            let mut missing = Vec::new();
            if args.mass.is_none() {
                missing.push("mass".to_string());
            }
            if args.omega.is_none() {
                missing.push("omega".to_string());
            }
            if args.eta.is_none() {
                missing.push("eta".to_string());
            }
            if !missing.is_empty() {
                return Err(Error::MissingFields(missing));
            }
            ExperimentParams::new(
                args.mass.unwrap(),
                args.omega.unwrap(),
                args.precision,
                args.eta.unwrap(),
                args.heating_rate,
            )?
        }
    };
    let report = natural_units_report(&params)?;
    print_calibration(&report, args.skip_delayed)
}

fn print_calibration(report: &NaturalUnitsReport, skip_delayed: bool) -> Result<()> {
    let gamma = report.gamma_tilde;
    let eta = report.eta;
    println!("gamma_tilde: {gamma}");
    println!(
        "source: {}",
        match report.gamma_source {
            GammaSource::NoiseFloor => "noise-floor",
            GammaSource::HeatingRate => "heating-rate",
        }
    );
    println!("note: {}", NaturalUnitsReport::convention_note());
    println!("length_scale_m: {:e}", report.length_scale);
    println!("momentum_scale_kg_m_per_s: {:e}", report.momentum_scale);
    println!("time_scale_s: {:e}", report.time_scale);
    println!("energy_scale_j: {:e}", report.energy_scale);
    println!("eta: {eta}");
    println!("minimum occupation, lpf: {}", lpf_min_occupation(gamma, eta)?);
    println!("minimum occupation, lqg: {}", lqg_energy(gamma, eta)? - 0.5);
    let bp = bp_minimize(gamma, eta)?;
    println!("minimum occupation, cd-bandpass: {}", bp.energy - 0.5);
    if skip_delayed {
        println!("minimum occupation, cd-delayed: skipped");
        return Ok(());
    }
    // A deliberately light Monte Carlo budget: the goal is a guide value
    // with an honest error bar, not a precision measurement.
    let mut cfg = SimConfig {
        dt: PI / 500.0,
        t_total: 3300.0,
        burn_in: 300.0,
        n_traj: 8,
        ..SimConfig::default()
    };
    if let Ok(text) = std::env::var(SEED_ENV) {
        if let Ok(seed) = text.parse() {
            cfg.seed = seed;
        }
    }
    let found = optimize_delayed_gain(gamma, eta, &cfg)?;
    println!(
        "minimum occupation, cd-delayed: {} (Monte Carlo, stderr {})",
        found.energy.mean - 0.5,
        found.energy.stderr
    );
    Ok(())
}

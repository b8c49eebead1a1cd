//! Bridge between laboratory parameters (SI) and the natural units used
//! everywhere else in the crate.
//!
//! Natural units set `hbar = m = omega = 1`: lengths are measured in the
//! zero-point amplitude `sqrt(hbar / (m omega))`, momenta in
//! `sqrt(hbar m omega)`, times in `1 / omega`, energies in `hbar omega`.
//! The only free dimensionless knobs left are the measurement strength
//! `gamma_tilde = hbar gamma / (m omega^2)` and the detection efficiency
//! `eta`.

use crate::error::{Error, Result};

/// Reduced Planck constant in J s (2018 CODATA).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Laboratory parameters of a levitated-particle experiment, all SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentParams {
    /// Particle mass in kg.
    pub mass: f64,
    /// Trap angular frequency in rad/s.
    pub omega: f64,
    /// Imprecision noise floor in m/sqrt(Hz), two-sided convention.
    pub precision: Option<f64>,
    /// Detection efficiency in (0, 1].
    pub eta: f64,
    /// Measured heating rate in J/s, an alternative route to the
    /// measurement strength.
    pub heating_rate: Option<f64>,
}

impl ExperimentParams {
    /// Validates every provided value; problems are reported together.
    pub fn new(
        mass: f64,
        omega: f64,
        precision: Option<f64>,
        eta: f64,
        heating_rate: Option<f64>,
    ) -> Result<Self> {
        let mut issues = Vec::new();
        if !mass.is_finite() || mass <= 0.0 {
            issues.push(format!("mass must be > 0 kg, got {mass}"));
        }
        if !omega.is_finite() || omega <= 0.0 {
            issues.push(format!("omega must be > 0 rad/s, got {omega}"));
        }
        if let Some(p) = precision {
            if !p.is_finite() || p <= 0.0 {
                issues.push(format!("precision must be > 0 m/sqrt(Hz), got {p}"));
            }
        }
        if !eta.is_finite() || eta <= 0.0 || eta > 1.0 {
            issues.push(format!("eta must lie in (0, 1], got {eta}"));
        }
        if let Some(r) = heating_rate {
            if !r.is_finite() || r <= 0.0 {
                issues.push(format!("heating_rate must be > 0 J/s, got {r}"));
            }
        }
        if issues.is_empty() {
            Ok(Self {
                mass,
                omega,
                precision,
                eta,
                heating_rate,
            })
        } else {
            Err(Error::InvalidInput(issues.join("; ")))
        }
    }

    /// Parses a `key = value` parameter file.
    ///
    /// Recognized keys: `mass`, `omega`, `precision`, `eta`,
    /// `heating_rate`. Blank lines and `#` comments are skipped. Missing
    /// required keys are listed together, as are invalid values.
    pub fn parse(text: &str) -> Result<Self> {
        let mut fields: [(& str, Option<f64>); 5] = [
            ("mass", None),
            ("omega", None),
            ("precision", None),
            ("eta", None),
            ("heating_rate", None),
        ];
        let mut issues = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                issues.push(format!("line {}: expected 'key = value'", lineno + 1));
                continue;
            };
            let key = key.trim();
            let value = value.trim();
            match fields.iter_mut().find(|(k, _)| *k == key) {
                Some((_, slot)) => match value.parse::<f64>() {
                    Ok(v) => *slot = Some(v),
                    Err(_) => issues.push(format!(
                        "line {}: '{value}' is not a number",
                        lineno + 1
                    )),
                },
                None => issues.push(format!("line {}: unknown key '{key}'", lineno + 1)),
            }
        }
        if !issues.is_empty() {
            return Err(Error::InvalidInput(issues.join("; ")));
        }
        let missing: Vec<String> = [("mass", fields[0].1), ("omega", fields[1].1), ("eta", fields[3].1)]
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| (*k).to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingFields(missing));
        }
        Self::new(
            fields[0].1.unwrap(),
            fields[1].1.unwrap(),
            fields[2].1,
            fields[3].1.unwrap(),
            fields[4].1,
        )
    }
}

/// Measurement strength from the imprecision noise floor.
///
/// With the floor quoted as a two-sided amplitude spectral density
/// `precision` (no factor of `2 pi`), the measurement rate is
/// `gamma = 1 / (2 eta precision^2)`, and
/// `gamma_tilde = hbar gamma / (m omega^2)`.
pub fn gamma_from_noise_floor(p: &ExperimentParams) -> Result<f64> {
    let Some(precision) = p.precision else {
        return Err(Error::MissingFields(vec!["precision".into()]));
    };
    let gamma = 1.0 / (2.0 * p.eta * precision * precision);
    Ok(HBAR * gamma / (p.mass * p.omega * p.omega))
}

/// Measurement strength from a measured heating rate in J/s.
///
/// Back-action heats the oscillator at `hbar^2 gamma / (4 m)` joules per
/// second, so `gamma = 4 m rate / hbar^2`; composing with
/// `gamma_tilde = hbar gamma / (m omega^2)` keeps the two conversions
/// separately auditable.
pub fn gamma_from_heating_rate(rate: f64, mass: f64, omega: f64) -> Result<f64> {
    if !rate.is_finite() || rate <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "heating rate must be > 0 J/s, got {rate}"
        )));
    }
    if !mass.is_finite() || mass <= 0.0 || !omega.is_finite() || omega <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "need mass > 0 and omega > 0, got {mass}, {omega}"
        )));
    }
    let gamma = 4.0 * mass * rate / (HBAR * HBAR);
    Ok(HBAR * gamma / (mass * omega * omega))
}

/// Heating rate in J/s implied by a measurement strength; inverse of
/// [`gamma_from_heating_rate`].
pub fn heating_rate_from_gamma_tilde(gamma_tilde: f64, omega: f64) -> f64 {
    gamma_tilde * HBAR * omega * omega / 4.0
}

/// Which route produced the reported measurement strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaSource {
    NoiseFloor,
    HeatingRate,
}

/// Conversion constants between SI and natural units, plus the derived
/// measurement strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalUnitsReport {
    pub gamma_tilde: f64,
    pub gamma_source: GammaSource,
    /// Zero-point length `sqrt(hbar / (m omega))` in m.
    pub length_scale: f64,
    /// Zero-point momentum `sqrt(hbar m omega)` in kg m/s.
    pub momentum_scale: f64,
    /// `1 / omega` in s.
    pub time_scale: f64,
    /// `hbar omega` in J.
    pub energy_scale: f64,
    pub eta: f64,
}

impl NaturalUnitsReport {
    /// The convention the noise-floor conversion assumes.
    pub fn convention_note() -> &'static str {
        "precision is read as a two-sided amplitude spectral density in m/sqrt(Hz); \
         no factor of 2 pi enters the conversion"
    }
}

/// Builds the full conversion report for an experiment.
///
/// The measurement strength comes from the noise floor when `precision`
/// is given, otherwise from `heating_rate`; at least one of the two must
/// be present.
pub fn natural_units_report(p: &ExperimentParams) -> Result<NaturalUnitsReport> {
    let (gamma_tilde, gamma_source) = if p.precision.is_some() {
        (gamma_from_noise_floor(p)?, GammaSource::NoiseFloor)
    } else if let Some(rate) = p.heating_rate {
        (
            gamma_from_heating_rate(rate, p.mass, p.omega)?,
            GammaSource::HeatingRate,
        )
    } else {
        return Err(Error::MissingFields(vec![
            "precision".into(),
            "heating_rate".into(),
        ]));
    };
    Ok(NaturalUnitsReport {
        gamma_tilde,
        gamma_source,
        length_scale: (HBAR / (p.mass * p.omega)).sqrt(),
        momentum_scale: (HBAR * p.mass * p.omega).sqrt(),
        time_scale: 1.0 / p.omega,
        energy_scale: HBAR * p.omega,
        eta: p.eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn picogram_trap() -> ExperimentParams {
        ExperimentParams::new(2.8e-18, 2.0 * PI * 104e3, Some(2.0e-14), 0.34, None).unwrap()
    }

    fn attogram_trap() -> ExperimentParams {
        ExperimentParams::new(1.0e-18, 2.0 * PI * 77.6e3, Some(2.27e-14), 0.24, None).unwrap()
    }

    #[test]
    fn noise_floor_strength_matches_reference() {
        assert_relative_eq!(
            gamma_from_noise_floor(&picogram_trap()).unwrap(),
            0.32428197555778193,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            gamma_from_noise_floor(&attogram_trap()).unwrap(),
            1.7934944199843281,
            max_relative = 1e-12
        );
    }

    #[test]
    fn unit_scales_match_reference() {
        let rep = natural_units_report(&picogram_trap()).unwrap();
        assert_relative_eq!(rep.length_scale, 7.591934646462058e-12, max_relative = 1e-10);
        assert_relative_eq!(
            rep.momentum_scale,
            1.3890686183546698e-23,
            max_relative = 1e-10
        );
        assert_relative_eq!(rep.time_scale, 1.5303359912682244e-06, max_relative = 1e-10);
        assert_relative_eq!(rep.energy_scale, 6.891112951777683e-29, max_relative = 1e-10);
        assert_eq!(rep.gamma_source, GammaSource::NoiseFloor);
        assert_eq!(rep.eta, 0.34);

        let rep2 = natural_units_report(&attogram_trap()).unwrap();
        assert_relative_eq!(rep2.length_scale, 1.470676949470204e-11, max_relative = 1e-10);
    }

    #[test]
    fn heating_route_matches_reference() {
        let p = picogram_trap();
        let g = gamma_from_heating_rate(1e-21, p.mass, p.omega).unwrap();
        assert_relative_eq!(g, 88.82954042269455, max_relative = 1e-10);
    }

    #[test]
    fn heating_round_trip_is_exact() {
        let p = picogram_trap();
        let gamma_tilde = gamma_from_noise_floor(&p).unwrap();
        let rate = heating_rate_from_gamma_tilde(gamma_tilde, p.omega);
        let back = gamma_from_heating_rate(rate, p.mass, p.omega).unwrap();
        assert_relative_eq!(back, gamma_tilde, max_relative = 1e-12);
    }

    #[test]
    fn parse_collects_missing_keys() {
        let err = ExperimentParams::parse("mass = 1e-18\n").unwrap_err();
        match err {
            Error::MissingFields(fields) => {
                assert_eq!(fields, vec!["omega".to_string(), "eta".to_string()]);
            }
            other => panic!("expected MissingFields, got {other:?}"),
        }
    }

    #[test]
    fn parse_reads_a_full_file() {
        let text = "\
# trap parameters
mass = 2.8e-18
omega = 653451.2718085612   # rad/s
precision = 2.0e-14
eta = 0.34
";
        let p = ExperimentParams::parse(text).unwrap();
        assert_eq!(p.mass, 2.8e-18);
        assert_eq!(p.eta, 0.34);
        assert!(p.heating_rate.is_none());
        assert!(ExperimentParams::parse("volume = 3\n").is_err());
    }
}

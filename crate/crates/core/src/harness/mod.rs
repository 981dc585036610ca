//! Monte Carlo sweeps over one system parameter, with paired seeds: the
//! `i`-th realization uses seed `base_seed + i` at every axis value and for
//! every scheme.

pub mod cli;
pub mod config_file;
mod csv;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::benchmarks::{SchemeContext, SchemeId};
use crate::channel::{db_to_linear, generate_channels, SystemConfig};
use crate::error::{Error, Result};
use crate::solver::SolverOptions;

pub use csv::{emit_csv, format_float, write_csv};

/// Largest tolerated share of failed solves in any (axis value, scheme) cell.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Receiver noise variance at relay and destination, in dB.
    Noise,
    /// Direct-link strength `rho_sd`, in dB.
    StrengthSd,
    /// Every hardware distortion coefficient, in dB.
    Distortion,
    /// Source and relay power budgets, linear.
    Power,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 4] = [SweepAxis::Noise, SweepAxis::StrengthSd, SweepAxis::Distortion, SweepAxis::Power];

    pub fn token(self) -> &'static str {
        match self {
            SweepAxis::Noise => "noise",
            SweepAxis::StrengthSd => "strength_sd",
            SweepAxis::Distortion => "distortion",
            SweepAxis::Power => "power",
        }
    }

    /// Grid used when none is given. The direct-strength grid starts above
    /// the default CSI-error variance of -50 dB, below which no estimate exists.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Noise => vec![-60.0, -50.0, -40.0, -30.0, -20.0],
            SweepAxis::StrengthSd => vec![-45.0, -40.0, -30.0, -20.0, -10.0],
            SweepAxis::Distortion => vec![-50.0, -40.0, -30.0, -20.0],
            SweepAxis::Power => vec![0.25, 0.5, 1.0, 2.0, 4.0],
        }
    }

    /// `base` with the axis parameter set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> SystemConfig {
        let mut c = base.clone();
        match self {
            SweepAxis::Noise => c.set_noise(db_to_linear(value)),
            SweepAxis::StrengthSd => c.strength_sd = db_to_linear(value),
            SweepAxis::Distortion => c.set_distortion(db_to_linear(value)),
            SweepAxis::Power => {
                c.power_source = value;
                c.power_relay = value;
            }
        }
        c
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "noise" | "noise_var" => Ok(SweepAxis::Noise),
            "strength_sd" | "rho_sd" => Ok(SweepAxis::StrengthSd),
            "distortion" => Ok(SweepAxis::Distortion),
            "power" => Ok(SweepAxis::Power),
            _ => Err(Error::InvalidConfig(format!(
                "unknown sweep axis {s:?}; expected one of noise, strength_sd, distortion, power"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub axis: SweepAxis,
    pub axis_values: Vec<f64>,
    pub num_realizations: usize,
    pub schemes: Vec<SchemeId>,
    pub base_seed: u64,
    pub solver: SolverOptions,
}

impl ExperimentSpec {
    pub fn new(base: SystemConfig, axis: SweepAxis) -> Self {
        Self {
            base,
            axis,
            axis_values: axis.default_values(),
            num_realizations: 100,
            schemes: SchemeId::ALL.to_vec(),
            base_seed: 0,
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_realizations == 0 {
            return Err(Error::InvalidConfig("realizations must be >= 1".into()));
        }
        if self.axis_values.is_empty() || self.axis_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("axis values must be a nonempty list of finite numbers".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("at least one scheme is required".into()));
        }
        if self.base_seed.checked_add(self.num_realizations as u64).is_none() {
            return Err(Error::InvalidConfig("base_seed + realizations overflows".into()));
        }
        self.solver.validate()?;
        for &v in &self.axis_values {
            self.axis.apply(&self.base, v).validate()?;
        }
        Ok(())
    }
}

/// Aggregates of one scheme at one axis value.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub scheme: SchemeId,
    /// Sum rate per realization index; `None` where the solve failed.
    pub values: Vec<Option<f64>>,
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator; 0 for one sample).
    pub std: f64,
    pub n_ok: usize,
    pub n_fail: usize,
    /// Mean outer iterations over successful solves.
    pub mean_iterations: f64,
    /// `(realization, message)` of every failed solve.
    pub failures: Vec<(usize, String)>,
}

impl CellStats {
    fn from_outcomes(scheme: SchemeId, outcomes: Vec<std::result::Result<(f64, usize), String>>) -> Self {
        let mut values = Vec::with_capacity(outcomes.len());
        let mut failures = Vec::new();
        let mut iterations = 0usize;
        for (i, o) in outcomes.into_iter().enumerate() {
            match o {
                Ok((rate, iters)) => {
                    values.push(Some(rate));
                    iterations += iters;
                }
                Err(msg) => {
                    values.push(None);
                    failures.push((i, msg));
                }
            }
        }
        let ok: Vec<f64> = values.iter().flatten().copied().collect();
        let n_ok = ok.len();
        let (mean, std) = mean_std(&ok);
        Self {
            scheme,
            values,
            mean,
            std,
            n_ok,
            n_fail: failures.len(),
            mean_iterations: if n_ok > 0 { iterations as f64 / n_ok as f64 } else { f64::NAN },
            failures,
        }
    }
}

/// Arithmetic mean and `n - 1` standard deviation; NaN mean for no samples.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis_value: f64,
    /// In the order of `ExperimentSpec::schemes`.
    pub cells: Vec<CellStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub num_realizations: usize,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn cell(&self, point: usize, scheme: SchemeId) -> Option<&CellStats> {
        self.points.get(point)?.cells.iter().find(|c| c.scheme == scheme)
    }

    /// Mean sum rate of `scheme` along the axis.
    pub fn means(&self, scheme: SchemeId) -> Vec<f64> {
        (0..self.points.len()).map(|p| self.cell(p, scheme).map_or(f64::NAN, |c| c.mean)).collect()
    }
}

type Outcome = std::result::Result<(f64, usize), String>;

/// Every (axis value, scheme) outcome of one realization.
fn run_realization(spec: &ExperimentSpec, index: usize) -> Vec<Vec<Outcome>> {
    let seed = spec.base_seed + index as u64;
    spec.axis_values
        .iter()
        .map(|&v| {
            let config = spec.axis.apply(&spec.base, v);
            let channels = match generate_channels(&config, seed) {
                Ok(ch) => ch,
                Err(e) => return vec![Err(e.to_string()); spec.schemes.len()],
            };
            let mut ctx = SchemeContext::new(&config, &channels);
            spec.schemes
                .iter()
                .map(|&s| {
                    ctx.solve(s, &spec.solver)
                        .map(|o| (o.report.r_total, o.trace.iterations))
                        .map_err(|e| e.to_string())
                })
                .collect()
        })
        .collect()
}

/// Run the sweep. Failed solves are excluded from the aggregates and
/// counted; a cell with more than [`MAX_FAILURE_FRACTION`] failures makes
/// the whole experiment an error.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let per_realization: Vec<Vec<Vec<Outcome>>> =
        (0..spec.num_realizations).into_par_iter().map(|i| run_realization(spec, i)).collect();

    let mut points = Vec::with_capacity(spec.axis_values.len());
    for (a, &axis_value) in spec.axis_values.iter().enumerate() {
        let cells = spec
            .schemes
            .iter()
            .enumerate()
            .map(|(s, &scheme)| {
                let outcomes = per_realization.iter().map(|r| r[a][s].clone()).collect();
                CellStats::from_outcomes(scheme, outcomes)
            })
            .collect();
        points.push(SweepPoint { axis_value, cells });
    }
    let result = SweepResult { axis: spec.axis, num_realizations: spec.num_realizations, points };

    for p in &result.points {
        for c in &p.cells {
            if c.n_fail as f64 > MAX_FAILURE_FRACTION * spec.num_realizations as f64 {
                let (i, msg) = &c.failures[0];
                return Err(Error::Experiment(format!(
                    "{} failed on {} of {} realizations at {} = {}; first failure (realization {i}): {msg}",
                    c.scheme, c.n_fail, spec.num_realizations, spec.axis, p.axis_value
                )));
            }
        }
    }
    Ok(result)
}

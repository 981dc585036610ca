//! Comparison schemes: distortion-unaware rate splitting (RS-ND), direct link
//! only (ODL), relay link only (ORL) and half-duplex relaying (HD).
//!
//! Every scheme runs the same SIA solver, with disabled streams frozen at zero.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{mrt_precoders, ChannelRealization, SystemConfig};
use crate::distortion::{build_coefficients, RateCoefficients};
use crate::error::{Error, Result};
use crate::rates::{Link, LinkSet, PowerAllocation, RateReport};
use crate::solver::{Problem, SolveTrace, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "RS")]
    Rs,
    #[serde(rename = "RS_ND")]
    RsNd,
    #[serde(rename = "ODL")]
    Odl,
    #[serde(rename = "ORL")]
    Orl,
    #[serde(rename = "HD")]
    Hd,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [SchemeId::Rs, SchemeId::RsNd, SchemeId::Odl, SchemeId::Orl, SchemeId::Hd];

    pub fn token(self) -> &'static str {
        match self {
            SchemeId::Rs => "RS",
            SchemeId::RsNd => "RS_ND",
            SchemeId::Odl => "ODL",
            SchemeId::Orl => "ORL",
            SchemeId::Hd => "HD",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "RS" => Ok(SchemeId::Rs),
            "RS_ND" => Ok(SchemeId::RsNd),
            "ODL" => Ok(SchemeId::Odl),
            "ORL" => Ok(SchemeId::Orl),
            "HD" => Ok(SchemeId::Hd),
            _ => Err(Error::InvalidConfig(format!(
                "unknown scheme {s:?}; expected one of RS, RS_ND, ODL, ORL, HD"
            ))),
        }
    }
}

/// Allocation, truthfully evaluated rates and solver trace of one scheme.
#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub powers: PowerAllocation,
    pub report: RateReport,
    pub trace: SolveTrace,
}

fn links(coeffs: &RateCoefficients, config: &SystemConfig) -> LinkSet {
    LinkSet::from_coefficients(coeffs, config.rate_prefactor)
}

fn run(problem: Problem<'_>, evaluate_with: &LinkSet, opts: &SolverOptions) -> Result<SchemeOutcome> {
    let (powers, trace) = problem.with_epigraph(opts.epigraph).sia(opts)?;
    let report = evaluate_with.evaluate(&powers);
    Ok(SchemeOutcome { powers, report, trace })
}

/// The proposed distortion-aware rate-splitting design.
pub fn solve_rs(coeffs: &RateCoefficients, config: &SystemConfig, opts: &SolverOptions) -> Result<SchemeOutcome> {
    let l = links(coeffs, config);
    run(Problem::rate_splitting(&l, config), &l, opts)
}

/// Optimize against the zero-distortion model, then report the rates the
/// resulting allocation achieves under the true coefficients.
pub fn solve_rs_nd(
    coeffs_true: &RateCoefficients,
    coeffs_zero_distortion: &RateCoefficients,
    config: &SystemConfig,
    opts: &SolverOptions,
) -> Result<SchemeOutcome> {
    check_same_size(coeffs_true, coeffs_zero_distortion)?;
    let belief = links(coeffs_zero_distortion, config);
    let truth = links(coeffs_true, config);
    run(Problem::rate_splitting(&belief, config), &truth, opts)
}

pub fn solve_odl(coeffs: &RateCoefficients, config: &SystemConfig, opts: &SolverOptions) -> Result<SchemeOutcome> {
    let l = links(coeffs, config);
    run(Problem::direct_only(&l, config), &l, opts)
}

pub fn solve_orl(coeffs: &RateCoefficients, config: &SystemConfig, opts: &SolverOptions) -> Result<SchemeOutcome> {
    let l = links(coeffs, config);
    run(Problem::relay_only(&l, config), &l, opts)
}

/// Config from which half-duplex coefficients are built: relay transmit
/// distortion removed. Self-interference terms are removed by [`hd_links`].
pub fn hd_config(config: &SystemConfig) -> SystemConfig {
    let mut c = config.clone();
    c.kappa_relay = 0.0;
    c
}

/// Two-slot half-duplex links with pre-log `rate_prefactor / 2`.
///
/// Slot 1: the source sends both streams; the relay hears no loop-back and
/// the destination hears no relay. Slot 2: only the relay transmits.
pub fn hd_links(coeffs_hd: &RateCoefficients, config: &SystemConfig) -> LinkSet {
    let full = links(coeffs_hd, config);
    let k = full.num_subcarriers();
    let zero = nalgebra::DMatrix::zeros(k, k);
    let sr = Link { w_rd: zero.clone(), ..full.sr };
    let rd = Link { w_sr: zero.clone(), w_sd: zero.clone(), ..full.rd };
    let sd = Link { w_rd: zero, ..full.sd };
    LinkSet { sr, rd, sd, prelog: 0.5 * config.rate_prefactor }
}

/// Half-duplex relaying with rate splitting; `coeffs_hd` is built from
/// [`hd_config`].
pub fn solve_hd(coeffs_hd: &RateCoefficients, config: &SystemConfig, opts: &SolverOptions) -> Result<SchemeOutcome> {
    let l = hd_links(coeffs_hd, config);
    run(Problem::rate_splitting(&l, config), &l, opts)
}

fn check_same_size(a: &RateCoefficients, b: &RateCoefficients) -> Result<()> {
    if a.num_subcarriers() != b.num_subcarriers() {
        return Err(Error::DimensionMismatch {
            what: "coefficient sets",
            expected: a.num_subcarriers(),
            got: b.num_subcarriers(),
        });
    }
    Ok(())
}

/// Coefficient sets of one realization, built lazily per scheme.
pub struct SchemeContext<'a> {
    config: &'a SystemConfig,
    channels: &'a ChannelRealization,
    truth: Option<RateCoefficients>,
}

impl<'a> SchemeContext<'a> {
    pub fn new(config: &'a SystemConfig, channels: &'a ChannelRealization) -> Self {
        Self { config, channels, truth: None }
    }

    fn build(&self, config: &SystemConfig) -> Result<RateCoefficients> {
        let precoders = mrt_precoders(self.channels)?;
        build_coefficients(self.channels, &precoders, config)
    }

    fn truth(&mut self) -> Result<&RateCoefficients> {
        if self.truth.is_none() {
            self.truth = Some(self.build(self.config)?);
        }
        Ok(self.truth.as_ref().unwrap())
    }

    pub fn solve(&mut self, scheme: SchemeId, opts: &SolverOptions) -> Result<SchemeOutcome> {
        let config = self.config;
        match scheme {
            SchemeId::Rs => solve_rs(self.truth()?, config, opts),
            SchemeId::RsNd => {
                let belief = self.build(&config.without_distortion())?;
                solve_rs_nd(self.truth()?, &belief, config, opts)
            }
            SchemeId::Odl => solve_odl(self.truth()?, config, opts),
            SchemeId::Orl => solve_orl(self.truth()?, config, opts),
            SchemeId::Hd => solve_hd(&self.build(&hd_config(config))?, config, opts),
        }
    }
}

//! Achievable rates and their concave first-order lower bounds.
//!
//! Each rate has the form `c * [ln(I + S) - ln(I)]` with `c = gamma_0 / ln 2`,
//! `S` the desired-signal power and `I` an affine interference term. The lower
//! bound keeps the concave `ln(I + S)` and replaces `-ln(I)` by its tangent at
//! an anchor allocation `p0`:
//!
//! ```text
//! Rbar(p; p0) = c * [ ln(I(p) + S(p)) - ln(I(p0)) - (I(p) - I(p0)) / I(p0) ]
//! ```
//!
//! Since `ln` is concave the tangent overestimates `ln(I)`, so `Rbar <= R`
//! everywhere, with equality and equal gradients at `p = p0`.

use nalgebra::DMatrix;

use crate::channel::SystemConfig;
use crate::distortion::RateCoefficients;
use crate::error::{Error, Result};

/// Per-subcarrier powers plus the epigraph variables of the relay path.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub p_sr: Vec<f64>,
    pub p_sd: Vec<f64>,
    pub p_rd: Vec<f64>,
    /// Lower bounds on the relay-path rate: one per subcarrier, or a single
    /// common value, depending on the epigraph form used by the solver.
    pub t: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(p_sr: Vec<f64>, p_sd: Vec<f64>, p_rd: Vec<f64>) -> Self {
        Self { p_sr, p_sd, p_rd, t: Vec::new() }
    }

    pub fn zeros(k: usize) -> Self {
        Self::new(vec![0.0; k], vec![0.0; k], vec![0.0; k])
    }

    /// Equal split: `P_s / 2K` to each source stream, `P_r / K` to the relay.
    pub fn uniform(k: usize, power_source: f64, power_relay: f64) -> Self {
        let kf = k as f64;
        Self::new(vec![power_source / (2.0 * kf); k], vec![power_source / (2.0 * kf); k], vec![power_relay / kf; k])
    }

    pub fn num_subcarriers(&self) -> usize {
        self.p_sr.len()
    }

    pub fn source_total(&self) -> f64 {
        self.p_sr.iter().chain(&self.p_sd).sum()
    }

    pub fn relay_total(&self) -> f64 {
        self.p_rd.iter().sum()
    }

    pub fn block(&self, block: PowerBlock) -> &[f64] {
        match block {
            PowerBlock::Sr => &self.p_sr,
            PowerBlock::Sd => &self.p_sd,
            PowerBlock::Rd => &self.p_rd,
        }
    }

    /// Nonnegative powers within both budgets, up to `tol`.
    pub fn is_feasible(&self, power_source: f64, power_relay: f64, tol: f64) -> bool {
        self.p_sr.iter().chain(&self.p_sd).chain(&self.p_rd).all(|p| *p >= 0.0)
            && self.source_total() <= power_source + tol
            && self.relay_total() <= power_relay + tol
    }
}

/// Rates in bits/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub r_sr: Vec<f64>,
    pub r_rd: Vec<f64>,
    pub r_sd: Vec<f64>,
    pub r_total: f64,
}

impl RateReport {
    pub fn from_components(r_sr: Vec<f64>, r_rd: Vec<f64>, r_sd: Vec<f64>) -> Self {
        let r_total = (0..r_sd.len()).map(|k| r_sd[k] + r_sr[k].min(r_rd[k])).sum();
        Self { r_sr, r_rd, r_sd, r_total }
    }

    pub fn per_subcarrier(&self) -> Vec<f64> {
        (0..self.r_sd.len()).map(|k| self.r_sd[k] + self.r_sr[k].min(self.r_rd[k])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerBlock {
    Sr,
    Sd,
    Rd,
}

impl PowerBlock {
    pub const ALL: [PowerBlock; 3] = [PowerBlock::Sr, PowerBlock::Sd, PowerBlock::Rd];

    /// Offset of this block in the stacked `[p_sr, p_sd, p_rd]` gradient layout.
    pub fn offset(self, k: usize) -> usize {
        match self {
            PowerBlock::Sr => 0,
            PowerBlock::Sd => k,
            PowerBlock::Rd => 2 * k,
        }
    }
}

/// One rate family: desired signal `gain^k p_signal^k` against interference
/// `alpha^k + sum_m w[k, m] p^m` over the three power blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub signal: PowerBlock,
    pub gain: Vec<f64>,
    pub alpha: Vec<f64>,
    pub w_sr: DMatrix<f64>,
    pub w_sd: DMatrix<f64>,
    pub w_rd: DMatrix<f64>,
}

/// Value, gradient and curvature of one concave surrogate term. The Hessian
/// is `-curvature * a a^T` with `a = signal_dir`.
#[derive(Debug, Clone)]
pub struct SurrogateTerm {
    pub value: f64,
    /// Gradient in the stacked `[p_sr, p_sd, p_rd]` layout.
    pub grad: Vec<f64>,
    pub signal_dir: Vec<f64>,
    pub curvature: f64,
}

impl Link {
    pub fn num_subcarriers(&self) -> usize {
        self.alpha.len()
    }

    pub fn weights(&self, block: PowerBlock) -> &DMatrix<f64> {
        match block {
            PowerBlock::Sr => &self.w_sr,
            PowerBlock::Sd => &self.w_sd,
            PowerBlock::Rd => &self.w_rd,
        }
    }

    pub fn interference_at(&self, k: usize, p: &PowerAllocation) -> f64 {
        let mut acc = self.alpha[k];
        for block in PowerBlock::ALL {
            let w = self.weights(block);
            acc += p.block(block).iter().enumerate().map(|(m, x)| w[(k, m)] * x).sum::<f64>();
        }
        acc
    }

    pub fn interference(&self, p: &PowerAllocation) -> Vec<f64> {
        (0..self.num_subcarriers()).map(|k| self.interference_at(k, p)).collect()
    }

    pub fn signal_at(&self, k: usize, p: &PowerAllocation) -> f64 {
        self.gain[k] * p.block(self.signal)[k]
    }

    pub fn rate_at(&self, k: usize, p: &PowerAllocation, prelog: f64) -> f64 {
        let s = self.signal_at(k, p);
        if s == 0.0 {
            return 0.0;
        }
        prelog * (s / self.interference_at(k, p)).ln_1p() / std::f64::consts::LN_2
    }

    pub fn rate(&self, p: &PowerAllocation, prelog: f64) -> Vec<f64> {
        (0..self.num_subcarriers()).map(|k| self.rate_at(k, p, prelog)).collect()
    }

    /// `d/dp I^k` in the stacked layout.
    fn interference_dir(&self, k: usize) -> Vec<f64> {
        let n = self.num_subcarriers();
        let mut dir = vec![0.0; 3 * n];
        for block in PowerBlock::ALL {
            let w = self.weights(block);
            let off = block.offset(n);
            for m in 0..n {
                dir[off + m] = w[(k, m)];
            }
        }
        dir
    }

    fn total_dir(&self, k: usize) -> Vec<f64> {
        let mut dir = self.interference_dir(k);
        dir[self.signal.offset(self.num_subcarriers()) + k] += self.gain[k];
        dir
    }

    /// Gradient of the exact rate on subcarrier `k`.
    pub fn rate_gradient(&self, k: usize, p: &PowerAllocation, prelog: f64) -> Vec<f64> {
        let c = prelog / std::f64::consts::LN_2;
        let i = self.interference_at(k, p);
        let total = i + self.signal_at(k, p);
        let a = self.total_dir(k);
        let b = self.interference_dir(k);
        a.iter().zip(&b).map(|(a, b)| c * (a / total - b / i)).collect()
    }

    fn anchor_interference(&self, k: usize, anchor: &PowerAllocation) -> Result<f64> {
        let i0 = self.interference_at(k, anchor);
        if i0 > 0.0 && i0.is_finite() {
            Ok(i0)
        } else {
            Err(Error::InfeasibleAnchor(format!("interference {i0:e} on subcarrier {k} at the anchor")))
        }
    }

    pub fn surrogate_at(&self, k: usize, p: &PowerAllocation, anchor: &PowerAllocation, prelog: f64) -> Result<f64> {
        let i0 = self.anchor_interference(k, anchor)?;
        Ok(surrogate_value(self.interference_at(k, p), self.signal_at(k, p), i0, prelog))
    }

    pub fn surrogate(&self, p: &PowerAllocation, anchor: &PowerAllocation, prelog: f64) -> Result<Vec<f64>> {
        (0..self.num_subcarriers()).map(|k| self.surrogate_at(k, p, anchor, prelog)).collect()
    }

    /// Surrogate with derivatives, given the anchor interference `i0` on `k`.
    pub fn surrogate_term(&self, k: usize, p: &PowerAllocation, i0: f64, prelog: f64) -> SurrogateTerm {
        let c = prelog / std::f64::consts::LN_2;
        let i = self.interference_at(k, p);
        let total = i + self.signal_at(k, p);
        let a = self.total_dir(k);
        let b = self.interference_dir(k);
        let grad = a.iter().zip(&b).map(|(a, b)| c * (a / total - b / i0)).collect();
        SurrogateTerm {
            value: surrogate_value(i, total - i, i0, prelog),
            grad,
            signal_dir: a,
            curvature: c / (total * total),
        }
    }

    /// Anchor interference for every subcarrier, validating strict positivity.
    pub fn anchor_interferences(&self, anchor: &PowerAllocation) -> Result<Vec<f64>> {
        (0..self.num_subcarriers()).map(|k| self.anchor_interference(k, anchor)).collect()
    }
}

pub(crate) fn surrogate_value(i: f64, s: f64, i0: f64, prelog: f64) -> f64 {
    let c = prelog / std::f64::consts::LN_2;
    c * ((i + s).ln() - i0.ln() - (i - i0) / i0)
}

/// The three rate families of one system, with their common pre-log factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSet {
    pub sr: Link,
    pub rd: Link,
    pub sd: Link,
    pub prelog: f64,
}

impl LinkSet {
    pub fn from_coefficients(c: &RateCoefficients, prelog: f64) -> Self {
        let v = |x: &nalgebra::DVector<f64>| x.iter().copied().collect::<Vec<_>>();
        Self {
            sr: Link {
                signal: PowerBlock::Sr,
                gain: v(&c.gain_sr),
                alpha: v(&c.alpha_r),
                w_sr: c.gamma_sr.clone(),
                w_sd: c.gamma_sd.clone(),
                w_rd: c.gamma_rd.clone(),
            },
            rd: Link {
                signal: PowerBlock::Rd,
                gain: v(&c.gain_rd),
                alpha: v(&c.alpha_d),
                w_sr: c.gbar_sr.clone(),
                w_sd: c.gbar_sd.clone(),
                w_rd: c.gbar_rd.clone(),
            },
            sd: Link {
                signal: PowerBlock::Sd,
                gain: v(&c.gain_sd),
                alpha: v(&c.alpha_d),
                w_sr: c.gbar_sr.clone(),
                w_sd: c.gtilde_sd.clone(),
                w_rd: c.gbar_rd.clone(),
            },
            prelog,
        }
    }

    pub fn num_subcarriers(&self) -> usize {
        self.sr.num_subcarriers()
    }

    pub fn evaluate(&self, p: &PowerAllocation) -> RateReport {
        RateReport::from_components(
            self.sr.rate(p, self.prelog),
            self.rd.rate(p, self.prelog),
            self.sd.rate(p, self.prelog),
        )
    }
}

fn links(coeffs: &RateCoefficients, config: &SystemConfig) -> LinkSet {
    LinkSet::from_coefficients(coeffs, config.rate_prefactor)
}

fn check_len(p: &PowerAllocation, k: usize) -> Result<()> {
    for (what, v) in [("p_sr", &p.p_sr), ("p_sd", &p.p_sd), ("p_rd", &p.p_rd)] {
        if v.len() != k {
            return Err(Error::DimensionMismatch { what, expected: k, got: v.len() });
        }
    }
    Ok(())
}

pub fn rate_sr(coeffs: &RateCoefficients, powers: &PowerAllocation, config: &SystemConfig) -> Result<Vec<f64>> {
    check_len(powers, coeffs.num_subcarriers())?;
    Ok(links(coeffs, config).sr.rate(powers, config.rate_prefactor))
}

pub fn rate_rd(coeffs: &RateCoefficients, powers: &PowerAllocation, config: &SystemConfig) -> Result<Vec<f64>> {
    check_len(powers, coeffs.num_subcarriers())?;
    Ok(links(coeffs, config).rd.rate(powers, config.rate_prefactor))
}

pub fn rate_sd(coeffs: &RateCoefficients, powers: &PowerAllocation, config: &SystemConfig) -> Result<Vec<f64>> {
    check_len(powers, coeffs.num_subcarriers())?;
    Ok(links(coeffs, config).sd.rate(powers, config.rate_prefactor))
}

pub fn total_rate(coeffs: &RateCoefficients, powers: &PowerAllocation, config: &SystemConfig) -> Result<RateReport> {
    check_len(powers, coeffs.num_subcarriers())?;
    Ok(links(coeffs, config).evaluate(powers))
}

pub fn taylor_bound_sr(
    coeffs: &RateCoefficients,
    powers: &PowerAllocation,
    anchor: &PowerAllocation,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    check_len(powers, coeffs.num_subcarriers())?;
    check_len(anchor, coeffs.num_subcarriers())?;
    links(coeffs, config).sr.surrogate(powers, anchor, config.rate_prefactor)
}

pub fn taylor_bound_rd(
    coeffs: &RateCoefficients,
    powers: &PowerAllocation,
    anchor: &PowerAllocation,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    check_len(powers, coeffs.num_subcarriers())?;
    check_len(anchor, coeffs.num_subcarriers())?;
    links(coeffs, config).rd.surrogate(powers, anchor, config.rate_prefactor)
}

pub fn taylor_bound_sd(
    coeffs: &RateCoefficients,
    powers: &PowerAllocation,
    anchor: &PowerAllocation,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    check_len(powers, coeffs.num_subcarriers())?;
    check_len(anchor, coeffs.num_subcarriers())?;
    links(coeffs, config).sd.surrogate(powers, anchor, config.rate_prefactor)
}

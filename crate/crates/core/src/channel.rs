//! System parameters, random channel realizations and MRT precoders.
//!
//! Every link is split into an estimated part and an estimation error that is
//! uncorrelated with it. Only the estimate is drawn; the error enters the rate
//! model through its variance. A link strength `rho` is the per-entry variance
//! of the true channel, so the estimate is drawn with variance `rho - err_var`.
//!
//! Draws come from ChaCha8 with one stream per link, so changing the strength
//! of one link (or its error variance) never perturbs the draws of another.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

/// Name of the generator behind [`generate_channels`], reported by the CLI.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), one stream per link: sr=1 sd=2 rd=3 rr=4";

const STREAM_SR: u64 = 1;
const STREAM_SD: u64 = 2;
const STREAM_RD: u64 = 3;
const STREAM_RR: u64 = 4;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Scalar parameters of the relay system. Distortion coefficients are stored
/// before the `1/K` normalization; see [`SystemConfig::normalized_distortion`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub num_subcarriers: usize,
    pub num_bs_antennas: usize,
    pub power_source: f64,
    pub power_relay: f64,
    pub strength_sr: f64,
    pub strength_rd: f64,
    pub strength_sd: f64,
    pub strength_si: f64,
    pub rician_k: f64,
    pub noise_var_relay: Vec<f64>,
    pub noise_var_dest: Vec<f64>,
    pub err_var_sr: Vec<f64>,
    pub err_var_rd: Vec<f64>,
    pub err_var_sd: Vec<f64>,
    pub err_var_rr: Vec<f64>,
    pub kappa_relay: f64,
    pub beta_relay: f64,
    pub beta_dest: f64,
    pub theta_tx_source: Vec<f64>,
    pub rate_prefactor: f64,
}

impl Default for SystemConfig {
    /// The reference setup: K = 4, N_BS = 32, rho_sr = rho_rd = -10 dB,
    /// rho_sd = -40 dB, rho_si = 1, K_R = 10, noise -40 dB, CSI error -50 dB,
    /// P_s = P_r = 1 and all distortion coefficients -30 dB.
    fn default() -> Self {
        let k = 4;
        let n = 32;
        let noise = db_to_linear(-40.0);
        let err = db_to_linear(-50.0);
        let dist = db_to_linear(-30.0);
        Self {
            num_subcarriers: k,
            num_bs_antennas: n,
            power_source: 1.0,
            power_relay: 1.0,
            strength_sr: db_to_linear(-10.0),
            strength_rd: db_to_linear(-10.0),
            strength_sd: db_to_linear(-40.0),
            strength_si: 1.0,
            rician_k: 10.0,
            noise_var_relay: vec![noise; k],
            noise_var_dest: vec![noise; k],
            err_var_sr: vec![err; k],
            err_var_rd: vec![err; k],
            err_var_sd: vec![err; k],
            err_var_rr: vec![err; k],
            kappa_relay: dist,
            beta_relay: dist,
            beta_dest: dist,
            theta_tx_source: vec![dist; n],
            rate_prefactor: 1.0,
        }
    }
}

/// Distortion coefficients after division by the number of subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDistortion {
    pub kappa_r: f64,
    pub beta_r: f64,
    pub beta_d: f64,
    pub theta: Vec<f64>,
}

impl SystemConfig {
    /// Resize every per-subcarrier and per-antenna vector to the current
    /// dimensions, repeating the first entry. Used after changing `K` or
    /// `N_BS` on a config whose vectors were uniform.
    pub fn with_dimensions(mut self, num_subcarriers: usize, num_bs_antennas: usize) -> Self {
        fn fit(v: &mut Vec<f64>, len: usize) {
            let fill = v.first().copied().unwrap_or(0.0);
            v.clear();
            v.resize(len, fill);
        }
        self.num_subcarriers = num_subcarriers;
        self.num_bs_antennas = num_bs_antennas;
        for v in [
            &mut self.noise_var_relay,
            &mut self.noise_var_dest,
            &mut self.err_var_sr,
            &mut self.err_var_rd,
            &mut self.err_var_sd,
            &mut self.err_var_rr,
        ] {
            fit(v, num_subcarriers);
        }
        fit(&mut self.theta_tx_source, num_bs_antennas);
        self
    }

    /// Same system with every hardware distortion coefficient set to zero.
    pub fn without_distortion(&self) -> Self {
        let mut c = self.clone();
        c.kappa_relay = 0.0;
        c.beta_relay = 0.0;
        c.beta_dest = 0.0;
        c.theta_tx_source.iter_mut().for_each(|t| *t = 0.0);
        c
    }

    /// Same system with perfect CSI and ideal hardware.
    pub fn without_impairments(&self) -> Self {
        let mut c = self.without_distortion();
        for v in [
            &mut c.err_var_sr,
            &mut c.err_var_rd,
            &mut c.err_var_sd,
            &mut c.err_var_rr,
        ] {
            v.iter_mut().for_each(|e| *e = 0.0);
        }
        c
    }

    pub fn set_noise(&mut self, var: f64) {
        self.noise_var_relay.iter_mut().for_each(|n| *n = var);
        self.noise_var_dest.iter_mut().for_each(|n| *n = var);
    }

    pub fn set_distortion(&mut self, coeff: f64) {
        self.kappa_relay = coeff;
        self.beta_relay = coeff;
        self.beta_dest = coeff;
        self.theta_tx_source.iter_mut().for_each(|t| *t = coeff);
    }

    pub fn set_error_variance(&mut self, var: f64) {
        for v in [
            &mut self.err_var_sr,
            &mut self.err_var_rd,
            &mut self.err_var_sd,
            &mut self.err_var_rr,
        ] {
            v.iter_mut().for_each(|e| *e = var);
        }
    }

    pub fn normalized_distortion(&self) -> NormalizedDistortion {
        let k = self.num_subcarriers as f64;
        NormalizedDistortion {
            kappa_r: self.kappa_relay / k,
            beta_r: self.beta_relay / k,
            beta_d: self.beta_dest / k,
            theta: self.theta_tx_source.iter().map(|t| t / k).collect(),
        }
    }

    /// Variance of the scattered (random) part of the self-interference channel.
    pub fn si_scattered_variance(&self) -> f64 {
        self.strength_si / (1.0 + self.rician_k)
    }

    pub fn si_mean(&self) -> f64 {
        (self.strength_si * self.rician_k / (1.0 + self.rician_k)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_subcarriers;
        let n = self.num_bs_antennas;
        if k == 0 {
            return Err(Error::InvalidConfig("num_subcarriers must be >= 1".into()));
        }
        if n == 0 {
            return Err(Error::InvalidConfig("num_bs_antennas must be >= 1".into()));
        }
        let scalars = [
            ("power_source", self.power_source),
            ("power_relay", self.power_relay),
            ("strength_sr", self.strength_sr),
            ("strength_rd", self.strength_rd),
            ("strength_sd", self.strength_sd),
            ("strength_si", self.strength_si),
            ("rician_k", self.rician_k),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.rate_prefactor.is_finite() && self.rate_prefactor > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rate_prefactor must be > 0, got {}",
                self.rate_prefactor
            )));
        }
        for (name, v) in [
            ("kappa_relay", self.kappa_relay),
            ("beta_relay", self.beta_relay),
            ("beta_dest", self.beta_dest),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.theta_tx_source.len() != n {
            return Err(Error::DimensionMismatch {
                what: "theta_tx_source",
                expected: n,
                got: self.theta_tx_source.len(),
            });
        }
        if let Some(t) = self.theta_tx_source.iter().find(|t| !(0.0..1.0).contains(*t)) {
            return Err(Error::InvalidConfig(format!("theta_tx_source entries must lie in [0, 1), got {t}")));
        }
        let per_carrier = [
            ("noise_var_relay", &self.noise_var_relay),
            ("noise_var_dest", &self.noise_var_dest),
            ("err_var_sr", &self.err_var_sr),
            ("err_var_rd", &self.err_var_rd),
            ("err_var_sd", &self.err_var_sd),
            ("err_var_rr", &self.err_var_rr),
        ];
        for (name, v) in per_carrier {
            if v.len() != k {
                return Err(Error::DimensionMismatch { what: name, expected: k, got: v.len() });
            }
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(Error::InvalidConfig(format!("{name} entries must be finite and >= 0, got {x}")));
            }
        }
        let limits = [
            ("sr", &self.err_var_sr, self.strength_sr),
            ("rd", &self.err_var_rd, self.strength_rd),
            ("sd", &self.err_var_sd, self.strength_sd),
            ("rr", &self.err_var_rr, self.si_scattered_variance()),
        ];
        for (link, errs, limit) in limits {
            if let Some((i, e)) = errs.iter().enumerate().find(|(_, e)| **e > limit) {
                return Err(Error::InvalidConfig(format!(
                    "err_var_{link}[{i}] = {e:e} exceeds the channel variance {limit:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Estimated channels for one realization. Row `k` of `h_sr`/`h_sd` is the
/// `1 x N_BS` channel on subcarrier `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_sr: DMatrix<Complex64>,
    pub h_sd: DMatrix<Complex64>,
    pub h_rd: Vec<Complex64>,
    pub h_rr: Vec<Complex64>,
    pub err_sr: Vec<f64>,
    pub err_rd: Vec<f64>,
    pub err_sd: Vec<f64>,
    pub err_rr: Vec<f64>,
}

impl ChannelRealization {
    pub fn num_subcarriers(&self) -> usize {
        self.h_rd.len()
    }

    pub fn num_bs_antennas(&self) -> usize {
        self.h_sr.ncols()
    }

    pub fn check_dimensions(&self, config: &SystemConfig) -> Result<()> {
        let k = config.num_subcarriers;
        let n = config.num_bs_antennas;
        let checks = [
            ("h_sr rows", self.h_sr.nrows(), k),
            ("h_sr cols", self.h_sr.ncols(), n),
            ("h_sd rows", self.h_sd.nrows(), k),
            ("h_sd cols", self.h_sd.ncols(), n),
            ("h_rd", self.h_rd.len(), k),
            ("h_rr", self.h_rr.len(), k),
            ("err_sr", self.err_sr.len(), k),
            ("err_rd", self.err_rd.len(), k),
            ("err_sd", self.err_sd.len(), k),
            ("err_rr", self.err_rr.len(), k),
        ];
        for (what, got, expected) in checks {
            if got != expected {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }
}

/// Normalized transmit beamformers; row `k` holds the entries of `v^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoders {
    pub v_sr: DMatrix<Complex64>,
    pub v_sd: DMatrix<Complex64>,
}

fn complex_normal(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

fn link_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw the estimated channels of one realization. Deterministic in
/// `(config, seed)`.
pub fn generate_channels(config: &SystemConfig, seed: u64) -> Result<ChannelRealization> {
    config.validate()?;
    let k = config.num_subcarriers;
    let n = config.num_bs_antennas;

    let vector_link = |stream: u64, strength: f64, errs: &[f64]| {
        let mut rng = link_rng(seed, stream);
        let mut h = DMatrix::zeros(k, n);
        for sc in 0..k {
            let var = strength - errs[sc];
            for a in 0..n {
                h[(sc, a)] = complex_normal(&mut rng, var);
            }
        }
        h
    };
    let h_sr = vector_link(STREAM_SR, config.strength_sr, &config.err_var_sr);
    let h_sd = vector_link(STREAM_SD, config.strength_sd, &config.err_var_sd);

    let mut rng = link_rng(seed, STREAM_RD);
    let h_rd = (0..k)
        .map(|sc| complex_normal(&mut rng, config.strength_rd - config.err_var_rd[sc]))
        .collect();

    let mut rng = link_rng(seed, STREAM_RR);
    let mean = Complex64::new(config.si_mean(), 0.0);
    let scattered = config.si_scattered_variance();
    let h_rr = (0..k)
        .map(|sc| mean + complex_normal(&mut rng, scattered - config.err_var_rr[sc]))
        .collect();

    Ok(ChannelRealization {
        h_sr,
        h_sd,
        h_rd,
        h_rr,
        err_sr: config.err_var_sr.clone(),
        err_rd: config.err_var_rd.clone(),
        err_sd: config.err_var_sd.clone(),
        err_rr: config.err_var_rr.clone(),
    })
}

fn normalized_conjugate(h: &DMatrix<Complex64>, link: &'static str) -> Result<DMatrix<Complex64>> {
    let mut v = DMatrix::zeros(h.nrows(), h.ncols());
    for k in 0..h.nrows() {
        let row = h.row(k);
        let norm = row.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateChannel { link, subcarrier: k });
        }
        for (i, x) in row.iter().enumerate() {
            v[(k, i)] = x.conj() / norm;
        }
    }
    Ok(v)
}

/// Maximum ratio transmission: `v^k = (h^k)^H / ||h^k||`.
pub fn mrt_precoders(channels: &ChannelRealization) -> Result<Precoders> {
    Ok(Precoders {
        v_sr: normalized_conjugate(&channels.h_sr, "h_sr")?,
        v_sd: normalized_conjugate(&channels.h_sd, "h_sd")?,
    })
}

/// `|h^k v|^2` for row `k` of `h` and row `k` of `v`.
pub(crate) fn beam_gain(h: &DMatrix<Complex64>, hk: usize, v: &DMatrix<Complex64>, vk: usize) -> f64 {
    h.row(hk)
        .iter()
        .zip(v.row(vk).iter())
        .map(|(a, b)| a * b)
        .sum::<Complex64>()
        .norm_sqr()
}

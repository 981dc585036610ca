//! Interference-plus-noise bookkeeping under hardware distortion and imperfect
//! CSI.
//!
//! [`build_coefficients`] produces power-free multipliers so that the
//! interference seen by every rate is affine in the power allocation:
//!
//! ```text
//! I^k(p) = alpha^k + sum_m ( w_sr[k,m] p_sr^m + w_rd[k,m] p_rd^m + w_sd[k,m] p_sd^m )
//! ```
//!
//! The `covariance_*` functions evaluate the same quantities term by term
//! from the channels, precoders and powers. They share no code with the
//! coefficient path and serve as its oracle.
//!
//! Distortion coefficients enter through their ICL form: the distortion on
//! subcarrier `k` scales with the total power of the chain over all
//! subcarriers, which is why every `w` matrix is dense. Products of two
//! distortion coefficients are dropped.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::{beam_gain, ChannelRealization, Precoders, SystemConfig};
use crate::error::{Error, Result};
use crate::rates::PowerAllocation;

#[derive(Debug, Clone, PartialEq)]
pub struct RateCoefficients {
    /// Relay-side leakage multipliers (source-to-relay rate).
    pub gamma_sr: DMatrix<f64>,
    pub gamma_rd: DMatrix<f64>,
    pub gamma_sd: DMatrix<f64>,
    /// Destination-side multipliers, phase 1 (relay stream decoded first).
    pub gbar_sr: DMatrix<f64>,
    pub gbar_rd: DMatrix<f64>,
    pub gbar_sd: DMatrix<f64>,
    /// Destination-side direct-stream multiplier after the relay stream is removed.
    pub gtilde_sd: DMatrix<f64>,
    pub alpha_r: DVector<f64>,
    pub alpha_d: DVector<f64>,
    pub gain_sr: DVector<f64>,
    pub gain_sd: DVector<f64>,
    pub gain_rd: DVector<f64>,
}

impl RateCoefficients {
    pub fn num_subcarriers(&self) -> usize {
        self.alpha_r.len()
    }

    /// All-zero coefficients for `k` subcarriers; handy for hand-built instances.
    pub fn zeros(k: usize) -> Self {
        let z = || DMatrix::zeros(k, k);
        let v = || DVector::zeros(k);
        Self {
            gamma_sr: z(),
            gamma_rd: z(),
            gamma_sd: z(),
            gbar_sr: z(),
            gbar_rd: z(),
            gbar_sd: z(),
            gtilde_sd: z(),
            alpha_r: v(),
            alpha_d: v(),
            gain_sr: v(),
            gain_sd: v(),
            gain_rd: v(),
        }
    }

    /// Interference at the relay, `alpha_r + gamma . p`.
    pub fn relay_interference(&self, p: &PowerAllocation) -> Vec<f64> {
        affine(&self.alpha_r, [(&self.gamma_sr, &p.p_sr), (&self.gamma_rd, &p.p_rd), (&self.gamma_sd, &p.p_sd)])
    }

    /// Interference at the destination while decoding the relay stream.
    pub fn dest_phase1_interference(&self, p: &PowerAllocation) -> Vec<f64> {
        affine(&self.alpha_d, [(&self.gbar_sr, &p.p_sr), (&self.gbar_rd, &p.p_rd), (&self.gbar_sd, &p.p_sd)])
    }

    /// Interference at the destination while decoding the direct stream.
    pub fn dest_phase2_interference(&self, p: &PowerAllocation) -> Vec<f64> {
        affine(&self.alpha_d, [(&self.gbar_sr, &p.p_sr), (&self.gbar_rd, &p.p_rd), (&self.gtilde_sd, &p.p_sd)])
    }
}

fn affine(base: &DVector<f64>, terms: [(&DMatrix<f64>, &Vec<f64>); 3]) -> Vec<f64> {
    (0..base.len())
        .map(|k| {
            base[k]
                + terms
                    .iter()
                    .map(|(w, p)| (0..p.len()).map(|m| w[(k, m)] * p[m]).sum::<f64>())
                    .sum::<f64>()
        })
        .collect()
}

fn check_inputs(channels: &ChannelRealization, precoders: &Precoders, config: &SystemConfig) -> Result<()> {
    channels.check_dimensions(config)?;
    for (what, v) in [("v_sr", &precoders.v_sr), ("v_sd", &precoders.v_sd)] {
        if v.nrows() != config.num_subcarriers {
            return Err(Error::DimensionMismatch { what, expected: config.num_subcarriers, got: v.nrows() });
        }
        if v.ncols() != config.num_bs_antennas {
            return Err(Error::DimensionMismatch { what, expected: config.num_bs_antennas, got: v.ncols() });
        }
    }
    Ok(())
}

fn check_powers(p: &PowerAllocation, k: usize) -> Result<()> {
    for (what, v) in [("p_sr", &p.p_sr), ("p_sd", &p.p_sd), ("p_rd", &p.p_rd)] {
        if v.len() != k {
            return Err(Error::DimensionMismatch { what, expected: k, got: v.len() });
        }
    }
    Ok(())
}

/// `[k, m] -> sum_i theta_i |h^k_i|^2 |v^m_i|^2`, i.e. `h^k Theta diag(v^m v^mH) h^kH`.
fn theta_leakage(h: &DMatrix<Complex64>, v: &DMatrix<Complex64>, theta: &[f64]) -> DMatrix<f64> {
    let weighted_h = DMatrix::from_fn(h.nrows(), h.ncols(), |k, i| theta[i] * h[(k, i)].norm_sqr());
    let v_power = DMatrix::from_fn(v.nrows(), v.ncols(), |m, i| v[(m, i)].norm_sqr());
    weighted_h * v_power.transpose()
}

/// `m -> Tr(Theta diag(v^m v^mH))`.
fn theta_trace(v: &DMatrix<Complex64>, theta: &[f64]) -> Vec<f64> {
    (0..v.nrows())
        .map(|m| v.row(m).iter().zip(theta).map(|(x, t)| t * x.norm_sqr()).sum())
        .collect()
}

pub fn build_coefficients(
    channels: &ChannelRealization,
    precoders: &Precoders,
    config: &SystemConfig,
) -> Result<RateCoefficients> {
    check_inputs(channels, precoders, config)?;
    let k_len = config.num_subcarriers;
    let d = config.normalized_distortion();
    let (h_sr, h_sd) = (&channels.h_sr, &channels.h_sd);
    let (v_sr, v_sd) = (&precoders.v_sr, &precoders.v_sd);
    let (e_sr, e_sd, e_rd, e_rr) = (&channels.err_sr, &channels.err_sd, &channels.err_rd, &channels.err_rr);

    let gain_sr = DVector::from_fn(k_len, |k, _| beam_gain(h_sr, k, v_sr, k));
    let gain_sd = DVector::from_fn(k_len, |k, _| beam_gain(h_sd, k, v_sd, k));
    let gain_rd = DVector::from_fn(k_len, |k, _| channels.h_rd[k].norm_sqr());
    let gain_rr: Vec<f64> = channels.h_rr.iter().map(|h| h.norm_sqr()).collect();
    // Co-channel gains: the relay hears the direct stream, the destination the relay stream.
    let cross_at_relay: Vec<f64> = (0..k_len).map(|m| beam_gain(h_sr, m, v_sd, m)).collect();
    let cross_at_dest: Vec<f64> = (0..k_len).map(|m| beam_gain(h_sd, m, v_sr, m)).collect();

    let leak_r_sr = theta_leakage(h_sr, v_sr, &d.theta);
    let leak_r_sd = theta_leakage(h_sr, v_sd, &d.theta);
    let leak_d_sr = theta_leakage(h_sd, v_sr, &d.theta);
    let leak_d_sd = theta_leakage(h_sd, v_sd, &d.theta);
    let tr_sr = theta_trace(v_sr, &d.theta);
    let tr_sd = theta_trace(v_sd, &d.theta);

    let delta = |k: usize, m: usize, x: f64| if k == m { x } else { 0.0 };

    let gamma_sr = DMatrix::from_fn(k_len, k_len, |k, m| {
        delta(k, m, e_sr[m]) + leak_r_sr[(k, m)] + e_sr[k] * tr_sr[m] + d.beta_r * (gain_sr[m] + e_sr[m])
    });
    let gamma_sd = DMatrix::from_fn(k_len, k_len, |k, m| {
        delta(k, m, cross_at_relay[m] + e_sr[m])
            + leak_r_sd[(k, m)]
            + e_sr[k] * tr_sd[m]
            + d.beta_r * (cross_at_relay[m] + e_sr[m])
    });
    let gamma_rd = DMatrix::from_fn(k_len, k_len, |k, m| {
        delta(k, m, e_rr[m]) + d.kappa_r * (gain_rr[k] + e_rr[k]) + d.beta_r * (gain_rr[m] + e_rr[m])
    });

    let gbar_sr = DMatrix::from_fn(k_len, k_len, |k, m| {
        delta(k, m, cross_at_dest[m] + e_sd[m])
            + leak_d_sr[(k, m)]
            + e_sd[k] * tr_sr[m]
            + d.beta_d * (cross_at_dest[m] + e_sd[m])
    });
    let gbar_rd = DMatrix::from_fn(k_len, k_len, |k, m| {
        delta(k, m, e_rd[m]) + d.kappa_r * (gain_rd[k] + e_rd[k]) + d.beta_d * (gain_rd[m] + e_rd[m])
    });
    // Direct-stream multiplier without its own desired signal; gbar adds it back.
    let gtilde_sd = DMatrix::from_fn(k_len, k_len, |k, m| {
        delta(k, m, e_sd[m]) + leak_d_sd[(k, m)] + e_sd[k] * tr_sd[m] + d.beta_d * (gain_sd[m] + e_sd[m])
    });
    let gbar_sd = DMatrix::from_fn(k_len, k_len, |k, m| gtilde_sd[(k, m)] + delta(k, m, gain_sd[m]));

    let noise_r: f64 = config.noise_var_relay.iter().sum();
    let noise_d: f64 = config.noise_var_dest.iter().sum();
    let alpha_r = DVector::from_fn(k_len, |k, _| config.noise_var_relay[k] + d.beta_r * noise_r);
    let alpha_d = DVector::from_fn(k_len, |k, _| config.noise_var_dest[k] + d.beta_d * noise_d);

    Ok(RateCoefficients {
        gamma_sr,
        gamma_rd,
        gamma_sd,
        gbar_sr,
        gbar_rd,
        gbar_sd,
        gtilde_sd,
        alpha_r,
        alpha_d,
        gain_sr,
        gain_sd,
        gain_rd,
    })
}

// ---------------------------------------------------------------------------
// Direct covariance evaluation
// ---------------------------------------------------------------------------

/// `h^k (v p v^H) h^kH` evaluated as a quadratic form.
fn quad(h: &DMatrix<Complex64>, hk: usize, v: &DMatrix<Complex64>, vk: usize, p: f64) -> f64 {
    let n = h.ncols();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += h[(hk, i)] * v[(vk, i)] * p * v[(vk, j)].conj() * h[(hk, j)].conj();
        }
    }
    acc.re
}

/// `Tr(v p v^H)`.
fn trace_outer(v: &DMatrix<Complex64>, vk: usize, p: f64) -> f64 {
    v.row(vk).iter().map(|x| (x * p * x.conj()).re).sum()
}

/// `sum_m diag(v_sr^m p_sr^m v_sr^mH + v_sd^m p_sd^m v_sd^mH)` as a length-N vector.
fn source_diag_load(precoders: &Precoders, p: &PowerAllocation) -> Vec<f64> {
    let n = precoders.v_sr.ncols();
    let mut load = vec![0.0; n];
    for m in 0..precoders.v_sr.nrows() {
        for (i, slot) in load.iter_mut().enumerate() {
            *slot += (precoders.v_sr[(m, i)] * p.p_sr[m] * precoders.v_sr[(m, i)].conj()).re
                + (precoders.v_sd[(m, i)] * p.p_sd[m] * precoders.v_sd[(m, i)].conj()).re;
        }
    }
    load
}

/// Interference-plus-noise covariance at the relay after self-interference
/// cancellation, evaluated term by term.
pub fn covariance_relay(
    channels: &ChannelRealization,
    precoders: &Precoders,
    powers: &PowerAllocation,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    check_inputs(channels, precoders, config)?;
    let k_len = config.num_subcarriers;
    check_powers(powers, k_len)?;
    let d = config.normalized_distortion();
    let (h, v_sr, v_sd) = (&channels.h_sr, &precoders.v_sr, &precoders.v_sd);
    let p = powers;
    let total_rd: f64 = p.p_rd.iter().sum();
    let load = source_diag_load(precoders, p);

    // receive-distortion aggregate over all subcarriers
    let rx_total: f64 = (0..k_len)
        .map(|m| {
            quad(h, m, v_sr, m, p.p_sr[m])
                + quad(h, m, v_sd, m, p.p_sd[m])
                + channels.err_sr[m] * (trace_outer(v_sr, m, p.p_sr[m]) + trace_outer(v_sd, m, p.p_sd[m]))
                + (channels.h_rr[m] * p.p_rd[m] * channels.h_rr[m].conj()).re
                + channels.err_rr[m] * p.p_rd[m]
                + config.noise_var_relay[m]
        })
        .sum();

    Ok((0..k_len)
        .map(|k| {
            let e = channels.err_sr[k];
            let h_rr = channels.h_rr[k];
            let co_channel = quad(h, k, v_sd, k, p.p_sd[k]) + e * (p.p_sd[k] + p.p_sr[k]);
            let self_interference = (h_rr * d.kappa_r * total_rd * h_rr.conj()).re
                + channels.err_rr[k] * (d.kappa_r * total_rd + p.p_rd[k]);
            let source_tx: f64 = (0..load.len()).map(|i| h[(k, i)].norm_sqr() * d.theta[i] * load[i]).sum();
            let source_tx_err = e * (0..load.len()).map(|i| d.theta[i] * load[i]).sum::<f64>();
            co_channel
                + self_interference
                + source_tx
                + source_tx_err
                + d.beta_r * rx_total
                + config.noise_var_relay[k]
        })
        .collect())
}

/// Interference-plus-noise covariance at the destination while the relay
/// stream is decoded (both source streams act as interference).
pub fn covariance_dest_phase1(
    channels: &ChannelRealization,
    precoders: &Precoders,
    powers: &PowerAllocation,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    check_inputs(channels, precoders, config)?;
    let k_len = config.num_subcarriers;
    check_powers(powers, k_len)?;
    let d = config.normalized_distortion();
    let (h, v_sr, v_sd) = (&channels.h_sd, &precoders.v_sr, &precoders.v_sd);
    let p = powers;
    let total_rd: f64 = p.p_rd.iter().sum();
    let load = source_diag_load(precoders, p);

    let rx_total: f64 = (0..k_len)
        .map(|m| {
            quad(h, m, v_sr, m, p.p_sr[m])
                + quad(h, m, v_sd, m, p.p_sd[m])
                + channels.err_sd[m] * (trace_outer(v_sr, m, p.p_sr[m]) + trace_outer(v_sd, m, p.p_sd[m]))
                + (channels.h_rd[m] * p.p_rd[m] * channels.h_rd[m].conj()).re
                + channels.err_rd[m] * p.p_rd[m]
                + config.noise_var_dest[m]
        })
        .sum();

    Ok((0..k_len)
        .map(|k| {
            let e = channels.err_sd[k];
            let h_rd = channels.h_rd[k];
            let co_channel = quad(h, k, v_sr, k, p.p_sr[k]) + quad(h, k, v_sd, k, p.p_sd[k]);
            let co_channel_err = e * (trace_outer(v_sr, k, p.p_sr[k]) + trace_outer(v_sd, k, p.p_sd[k]));
            let relay_tx = (h_rd * d.kappa_r * total_rd * h_rd.conj()).re
                + channels.err_rd[k] * (d.kappa_r * total_rd + p.p_rd[k]);
            let source_tx: f64 = (0..load.len()).map(|i| h[(k, i)].norm_sqr() * d.theta[i] * load[i]).sum();
            let source_tx_err = e * (0..load.len()).map(|i| d.theta[i] * load[i]).sum::<f64>();
            co_channel
                + co_channel_err
                + relay_tx
                + source_tx
                + source_tx_err
                + d.beta_d * rx_total
                + config.noise_var_dest[k]
        })
        .collect())
}

/// Phase-1 covariance with the (now desired) direct stream removed.
pub fn covariance_dest_phase2(
    channels: &ChannelRealization,
    precoders: &Precoders,
    powers: &PowerAllocation,
    config: &SystemConfig,
) -> Result<Vec<f64>> {
    let phase1 = covariance_dest_phase1(channels, precoders, powers, config)?;
    phase1
        .into_iter()
        .enumerate()
        .map(|(k, s1)| {
            let s2 = s1 - quad(&channels.h_sd, k, &precoders.v_sd, k, powers.p_sd[k]);
            if s2 < -1e-12 * s1.abs() {
                Err(Error::Inconsistent(format!("negative phase-2 covariance {s2:e} on subcarrier {k}")))
            } else {
                Ok(s2.max(0.0))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, mrt_precoders};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(config: &SystemConfig, seed: u64) -> (ChannelRealization, Precoders, RateCoefficients) {
        let ch = generate_channels(config, seed).unwrap();
        let pc = mrt_precoders(&ch).unwrap();
        let co = build_coefficients(&ch, &pc, config).unwrap();
        (ch, pc, co)
    }

    fn random_powers(rng: &mut ChaCha8Rng, k: usize) -> PowerAllocation {
        let mut draw = || (0..k).map(|_| rng.random::<f64>() * 0.5).collect::<Vec<_>>();
        PowerAllocation::new(draw(), draw(), draw())
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn ideal_hardware_collapses_to_co_channel_terms() {
        let cfg = SystemConfig::default().without_impairments();
        let (ch, pc, co) = instance(&cfg, 4);
        let k = cfg.num_subcarriers;
        for a in 0..k {
            for b in 0..k {
                assert_eq!(co.gamma_sr[(a, b)], 0.0);
                assert_eq!(co.gamma_rd[(a, b)], 0.0);
                assert_eq!(co.gbar_rd[(a, b)], 0.0);
                assert_eq!(co.gtilde_sd[(a, b)], 0.0);
                if a != b {
                    assert_eq!(co.gamma_sd[(a, b)], 0.0);
                    assert_eq!(co.gbar_sr[(a, b)], 0.0);
                }
            }
            assert_eq!(co.gamma_sd[(a, a)], beam_gain(&ch.h_sr, a, &pc.v_sd, a));
            assert_eq!(co.gbar_sr[(a, a)], beam_gain(&ch.h_sd, a, &pc.v_sr, a));
        }
    }

    #[test]
    fn relay_transmit_distortion_alone_is_uniform_across_columns() {
        let mut cfg = SystemConfig::default().without_impairments();
        cfg.kappa_relay = 0.01;
        let (ch, _, co) = instance(&cfg, 8);
        let kappa_r = cfg.kappa_relay / cfg.num_subcarriers as f64;
        for k in 0..cfg.num_subcarriers {
            let expected = kappa_r * ch.h_rr[k].norm_sqr();
            for m in 0..cfg.num_subcarriers {
                assert!(rel(co.gamma_rd[(k, m)], expected) < 1e-15);
            }
        }
    }

    #[test]
    fn gtilde_is_gbar_without_desired_signal() {
        let cfg = SystemConfig::default();
        let (_, _, co) = instance(&cfg, 12);
        for k in 0..cfg.num_subcarriers {
            for m in 0..cfg.num_subcarriers {
                let diff = co.gbar_sd[(k, m)] - co.gtilde_sd[(k, m)];
                let expected = if k == m { co.gain_sd[k] } else { 0.0 };
                assert!((diff - expected).abs() <= 1e-15 * co.gbar_sd[(k, m)]);
                assert!(co.gtilde_sd[(k, m)] >= 0.0);
            }
        }
    }

    #[test]
    fn zero_powers_leave_only_noise() {
        let cfg = SystemConfig::default();
        let (ch, pc, _) = instance(&cfg, 1);
        let p = PowerAllocation::zeros(cfg.num_subcarriers);
        let beta_r = cfg.beta_relay / cfg.num_subcarriers as f64;
        let beta_d = cfg.beta_dest / cfg.num_subcarriers as f64;
        let nr: f64 = cfg.noise_var_relay.iter().sum();
        let nd: f64 = cfg.noise_var_dest.iter().sum();
        let r = covariance_relay(&ch, &pc, &p, &cfg).unwrap();
        let d1 = covariance_dest_phase1(&ch, &pc, &p, &cfg).unwrap();
        for k in 0..cfg.num_subcarriers {
            assert!(rel(r[k], cfg.noise_var_relay[k] + beta_r * nr) < 1e-14);
            assert!(rel(d1[k], cfg.noise_var_dest[k] + beta_d * nd) < 1e-14);
        }
    }

    #[test]
    fn ideal_hardware_covariances() {
        let cfg = SystemConfig::default().without_impairments();
        let (ch, pc, _) = instance(&cfg, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_powers(&mut rng, cfg.num_subcarriers);
        let r = covariance_relay(&ch, &pc, &p, &cfg).unwrap();
        let d1 = covariance_dest_phase1(&ch, &pc, &p, &cfg).unwrap();
        for k in 0..cfg.num_subcarriers {
            let want_r = beam_gain(&ch.h_sr, k, &pc.v_sd, k) * p.p_sd[k] + cfg.noise_var_relay[k];
            assert!(rel(r[k], want_r) < 1e-12);
            let want_d = beam_gain(&ch.h_sd, k, &pc.v_sr, k) * p.p_sr[k]
                + beam_gain(&ch.h_sd, k, &pc.v_sd, k) * p.p_sd[k]
                + cfg.noise_var_dest[k];
            assert!(rel(d1[k], want_d) < 1e-12);
        }
        let only_sd = PowerAllocation::new(vec![0.0; 4], p.p_sd.clone(), vec![0.0; 4]);
        let d2 = covariance_dest_phase2(&ch, &pc, &only_sd, &cfg).unwrap();
        for k in 0..cfg.num_subcarriers {
            assert!(rel(d2[k], cfg.noise_var_dest[k]) < 1e-9);
        }
    }

    #[test]
    fn phase2_subtracts_exactly_the_direct_signal() {
        let cfg = SystemConfig::default();
        let (ch, pc, co) = instance(&cfg, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_powers(&mut rng, cfg.num_subcarriers);
        let d1 = covariance_dest_phase1(&ch, &pc, &p, &cfg).unwrap();
        let d2 = covariance_dest_phase2(&ch, &pc, &p, &cfg).unwrap();
        for k in 0..cfg.num_subcarriers {
            let diff = d1[k] - d2[k];
            assert!(rel(diff, co.gain_sd[k] * p.p_sd[k]) < 1e-9);
        }
        let no_sd = PowerAllocation::new(p.p_sr.clone(), vec![0.0; 4], p.p_rd.clone());
        assert_eq!(
            covariance_dest_phase1(&ch, &pc, &no_sd, &cfg).unwrap(),
            covariance_dest_phase2(&ch, &pc, &no_sd, &cfg).unwrap()
        );
    }

    #[test]
    fn coefficient_form_matches_direct_covariances() {
        let cfg = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for seed in 0..25 {
            let (ch, pc, co) = instance(&cfg, seed);
            let p = random_powers(&mut rng, cfg.num_subcarriers);
            let pairs = [
                (co.relay_interference(&p), covariance_relay(&ch, &pc, &p, &cfg).unwrap()),
                (co.dest_phase1_interference(&p), covariance_dest_phase1(&ch, &pc, &p, &cfg).unwrap()),
                (co.dest_phase2_interference(&p), covariance_dest_phase2(&ch, &pc, &p, &cfg).unwrap()),
            ];
            for (a, b) in pairs {
                for k in 0..cfg.num_subcarriers {
                    assert!(rel(a[k], b[k]) < 1e-9, "seed {seed} k {k}: {} vs {}", a[k], b[k]);
                }
            }
        }
    }

    #[test]
    fn single_relay_subcarrier_raises_floor_everywhere() {
        let mut cfg = SystemConfig::default().without_impairments();
        cfg.kappa_relay = 1e-3;
        let (_, _, co) = instance(&cfg, 3);
        let mut p = PowerAllocation::zeros(cfg.num_subcarriers);
        p.p_rd[1] = 0.5;
        let base = co.alpha_r.clone();
        let with = co.relay_interference(&p);
        for k in 0..cfg.num_subcarriers {
            assert!(co.gamma_rd[(k, 1)] * p.p_rd[1] > 0.0);
            assert!(with[k] > base[k]);
        }
    }

    #[test]
    fn coefficients_grow_with_every_impairment() {
        let base = SystemConfig::default();
        let ch = generate_channels(&base, 21).unwrap();
        let pc = mrt_precoders(&ch).unwrap();
        let before = build_coefficients(&ch, &pc, &base).unwrap();
        let bumps: Vec<Box<dyn Fn(&mut SystemConfig, &mut ChannelRealization)>> = vec![
            Box::new(|c, _| c.kappa_relay *= 3.0),
            Box::new(|c, _| c.beta_relay *= 3.0),
            Box::new(|c, _| c.beta_dest *= 3.0),
            Box::new(|c, _| c.theta_tx_source[5] *= 3.0),
            Box::new(|_, h| h.err_sr[0] *= 3.0),
            Box::new(|_, h| h.err_sd[1] *= 3.0),
            Box::new(|_, h| h.err_rd[2] *= 3.0),
            Box::new(|_, h| h.err_rr[3] *= 3.0),
        ];
        for bump in bumps {
            let mut c = base.clone();
            let mut h = ch.clone();
            bump(&mut c, &mut h);
            let after = build_coefficients(&h, &pc, &c).unwrap();
            for (x, y) in [
                (&before.gamma_sr, &after.gamma_sr),
                (&before.gamma_rd, &after.gamma_rd),
                (&before.gamma_sd, &after.gamma_sd),
                (&before.gbar_sr, &after.gbar_sr),
                (&before.gbar_rd, &after.gbar_rd),
                (&before.gbar_sd, &after.gbar_sd),
                (&before.gtilde_sd, &after.gtilde_sd),
            ] {
                assert!(x.iter().zip(y.iter()).all(|(a, b)| b >= a));
            }
        }
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let cfg = SystemConfig::default();
        let (ch, pc, _) = instance(&cfg, 0);
        let other = cfg.clone().with_dimensions(3, 32);
        assert!(matches!(build_coefficients(&ch, &pc, &other), Err(Error::DimensionMismatch { .. })));
        let p = PowerAllocation::zeros(2);
        assert!(covariance_relay(&ch, &pc, &p, &cfg).is_err());
    }
}

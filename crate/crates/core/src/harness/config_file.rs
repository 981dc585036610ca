//! Flat TOML experiment files. Keys ending in `_db` are decibel values and
//! are converted to linear scale here; everything downstream is linear.
//! `-inf` dB is zero.
//!
//! ```toml
//! num_subcarriers = 4
//! strength_sd_db = -40
//! noise_var_db = -40
//! sweep = "noise"
//! axis_values = [-60, -50, -40, -30, -20]
//! realizations = 100
//! schemes = ["RS", "RS_ND", "ODL", "ORL", "HD"]
//! ```

use std::path::Path;

use serde::Deserialize;

use super::{ExperimentSpec, SweepAxis};
use crate::benchmarks::SchemeId;
use crate::channel::{db_to_linear, SystemConfig};
use crate::error::{Error, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    num_subcarriers: Option<usize>,
    num_bs_antennas: Option<usize>,
    power_source: Option<f64>,
    power_relay: Option<f64>,
    strength_sr_db: Option<f64>,
    strength_rd_db: Option<f64>,
    strength_sd_db: Option<f64>,
    strength_si_db: Option<f64>,
    rician_k: Option<f64>,
    noise_var_db: Option<f64>,
    err_var_db: Option<f64>,
    /// Sets all four distortion coefficients; the specific keys below win.
    distortion_db: Option<f64>,
    kappa_relay_db: Option<f64>,
    beta_relay_db: Option<f64>,
    beta_dest_db: Option<f64>,
    theta_tx_source_db: Option<f64>,
    rate_prefactor: Option<f64>,

    sweep: Option<String>,
    axis_values: Option<Vec<f64>>,
    realizations: Option<usize>,
    schemes: Option<Vec<String>>,
    base_seed: Option<u64>,

    max_outer_iters: Option<usize>,
    outer_tol: Option<f64>,
    inner_tol: Option<f64>,
    max_inner_iters: Option<usize>,
    starts: Option<String>,
    reanchor: Option<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line on which `key` is assigned, if any.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

struct Ctx<'a> {
    origin: &'a str,
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        match key_line(self.text, key) {
            Some(line) => Error::InvalidConfig(format!("{}:{line}: {key}: {msg}", self.origin)),
            None => Error::InvalidConfig(format!("{}: {key}: {msg}", self.origin)),
        }
    }
}

/// Parse a config file body; `origin` names it in diagnostics.
pub fn parse(text: &str, origin: &str) -> Result<ExperimentSpec> {
    let f: FileConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start));
        let msg = e.message().trim().to_string();
        match line {
            Some(line) => Error::InvalidConfig(format!("{origin}:{line}: {msg}")),
            None => Error::InvalidConfig(format!("{origin}: {msg}")),
        }
    })?;
    let ctx = Ctx { origin, text };

    let mut c = SystemConfig::default();
    let k = f.num_subcarriers.unwrap_or(c.num_subcarriers);
    let n = f.num_bs_antennas.unwrap_or(c.num_bs_antennas);
    if k == 0 {
        return Err(ctx.err("num_subcarriers", "must be >= 1"));
    }
    if n == 0 {
        return Err(ctx.err("num_bs_antennas", "must be >= 1"));
    }
    c = c.with_dimensions(k, n);
    let db = |v: Option<f64>, key: &str| -> Result<Option<f64>> {
        match v {
            Some(x) if x.is_nan() || x == f64::INFINITY => Err(ctx.err(key, "must be a finite dB value or -inf")),
            other => Ok(other.map(db_to_linear)),
        }
    };
    if let Some(v) = f.power_source {
        c.power_source = v;
    }
    if let Some(v) = f.power_relay {
        c.power_relay = v;
    }
    if let Some(v) = db(f.strength_sr_db, "strength_sr_db")? {
        c.strength_sr = v;
    }
    if let Some(v) = db(f.strength_rd_db, "strength_rd_db")? {
        c.strength_rd = v;
    }
    if let Some(v) = db(f.strength_sd_db, "strength_sd_db")? {
        c.strength_sd = v;
    }
    if let Some(v) = db(f.strength_si_db, "strength_si_db")? {
        c.strength_si = v;
    }
    if let Some(v) = f.rician_k {
        c.rician_k = v;
    }
    if let Some(v) = db(f.noise_var_db, "noise_var_db")? {
        c.set_noise(v);
    }
    if let Some(v) = db(f.err_var_db, "err_var_db")? {
        c.set_error_variance(v);
    }
    if let Some(v) = db(f.distortion_db, "distortion_db")? {
        c.set_distortion(v);
    }
    if let Some(v) = db(f.kappa_relay_db, "kappa_relay_db")? {
        c.kappa_relay = v;
    }
    if let Some(v) = db(f.beta_relay_db, "beta_relay_db")? {
        c.beta_relay = v;
    }
    if let Some(v) = db(f.beta_dest_db, "beta_dest_db")? {
        c.beta_dest = v;
    }
    if let Some(v) = db(f.theta_tx_source_db, "theta_tx_source_db")? {
        c.theta_tx_source.iter_mut().for_each(|t| *t = v);
    }
    if let Some(v) = f.rate_prefactor {
        c.rate_prefactor = v;
    }
    if let Err(Error::InvalidConfig(msg)) = c.validate() {
        return Err(Error::InvalidConfig(format!("{origin}: {msg}")));
    }

    let axis = match &f.sweep {
        Some(s) => s.parse::<SweepAxis>().map_err(|e| ctx.err("sweep", e))?,
        None => SweepAxis::Noise,
    };
    let mut spec = ExperimentSpec::new(c, axis);
    if let Some(v) = f.axis_values {
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(ctx.err("axis_values", "must be a nonempty list of finite numbers"));
        }
        spec.axis_values = v;
    }
    if let Some(r) = f.realizations {
        if r == 0 {
            return Err(ctx.err("realizations", "must be >= 1"));
        }
        spec.num_realizations = r;
    }
    if let Some(list) = f.schemes {
        spec.schemes = parse_schemes(list.iter().map(String::as_str)).map_err(|e| ctx.err("schemes", e))?;
    }
    if let Some(seed) = f.base_seed {
        spec.base_seed = seed;
    }

    let s = &mut spec.solver;
    if let Some(v) = f.max_outer_iters {
        s.max_outer_iters = v;
    }
    if let Some(v) = f.outer_tol {
        s.outer_tol = v;
    }
    if let Some(v) = f.inner_tol {
        s.inner_tol = v;
    }
    if let Some(v) = f.max_inner_iters {
        s.max_inner_iters = v;
    }
    if let Some(v) = &f.starts {
        s.starts = v.parse().map_err(|e| ctx.err("starts", strip(e)))?;
    }
    if let Some(v) = &f.reanchor {
        s.reanchor = v.parse().map_err(|e| ctx.err("reanchor", strip(e)))?;
    }
    spec.validate().map_err(|e| Error::InvalidConfig(format!("{origin}: {}", strip(e))))?;
    Ok(spec)
}

fn strip(e: Error) -> String {
    match e {
        Error::InvalidConfig(m) => m,
        other => other.to_string(),
    }
}

/// Parse scheme tokens, rejecting duplicates; order is kept.
pub fn parse_schemes<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Result<Vec<SchemeId>> {
    let mut out = Vec::new();
    for t in tokens {
        let s: SchemeId = t.parse()?;
        if out.contains(&s) {
            return Err(Error::InvalidConfig(format!("scheme {s} listed twice")));
        }
        out.push(s);
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig("at least one scheme is required".into()));
    }
    Ok(out)
}

pub fn load(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("{}: cannot read: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

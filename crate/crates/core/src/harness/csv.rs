use std::fs;
use std::io::Write;
use std::path::Path;

use super::SweepResult;
use crate::error::Result;

pub const HEADER: &str = "axis_value,scheme,mean_rate,std_rate,n_ok,n_fail";

/// Nine significant digits, fixed notation for decimal exponents in
/// `[-5, 9)` and scientific otherwise, trailing zeros removed.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Round first so that the exponent reflects the rounded mantissa.
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn write_csv<W: Write>(result: &SweepResult, mut out: W) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    for p in &result.points {
        for c in &p.cells {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                format_float(p.axis_value),
                c.scheme,
                format_float(c.mean),
                format_float(c.std),
                c.n_ok,
                c.n_fail
            )?;
        }
    }
    Ok(())
}

/// Write the CSV to `path`, creating parent directories.
pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut buf = Vec::new();
    write_csv(result, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

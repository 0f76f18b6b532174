//! Transfer-curve sample files: header `voltage_V,transmission`, then one
//! `volts,transmission` pair per line.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const TRANSFER_CURVE_HEADER: &str = "voltage_V,transmission";

pub fn parse_transfer_curve<T: Scalar>(text: &str) -> Result<Vec<(T, T)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRANSFER_CURVE_HEADER => {}
        Some((_, h)) => {
            return Err(Error::parse(
                1,
                format!(
                    "expected header `{TRANSFER_CURVE_HEADER}`, found `{}`",
                    h.trim()
                ),
            ))
        }
        None => return Err(Error::parse(1, "empty file")),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_pair(line, idx + 1)?);
    }
    Ok(out)
}

/// Parses `x,y` as two scalars; `line` is 1-based for error messages.
pub(crate) fn parse_pair<T: Scalar>(line: &str, line_no: usize) -> Result<(T, T)> {
    let mut fields = line.split(',');
    let (Some(x), Some(y), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(Error::parse(
            line_no,
            format!("expected two comma-separated values, found `{line}`"),
        ));
    };
    let parse = |s: &str| -> Result<T> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid number `{}`", s.trim())))?;
        T::from_f64(v).ok_or_else(|| Error::parse(line_no, format!("unrepresentable number `{v}`")))
    };
    Ok((parse(x)?, parse(y)?))
}

pub fn load_transfer_curve<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<(T, T)>> {
    parse_transfer_curve(&std::fs::read_to_string(path)?)
}

pub fn format_transfer_curve<T: Scalar>(samples: &[(T, T)]) -> String {
    let mut s = String::with_capacity(32 * (samples.len() + 1));
    s.push_str(TRANSFER_CURVE_HEADER);
    s.push('\n');
    for (v, t) in samples {
        let _ = writeln!(s, "{:.16e},{:.16e}", v.to_f64_lossy(), t.to_f64_lossy());
    }
    s
}

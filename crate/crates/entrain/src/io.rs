//! Small I/O helpers shared by the file-format writers.

use crate::error::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Format a float with `sig` significant digits, using plain decimal notation
/// where reasonable and exponent notation otherwise (printf `%g` style).
/// Trailing zeros are trimmed, so exact values stay short.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{:.*e}", sig - 1, v);
    let (mant, exp) = s.split_once('e').expect("exponent format");
    let exp: i32 = exp.parse().expect("exponent digits");
    let neg = mant.starts_with('-');
    let digits: Vec<u8> = mant.bytes().filter(|b| b.is_ascii_digit()).collect();
    if exp >= -4 && exp < sig as i32 {
        decimal_notation(neg, &digits, exp)
    } else {
        let m = trim_trailing_zeros(mant);
        format!("{m}e{exp}")
    }
}

fn decimal_notation(neg: bool, digits: &[u8], exp: i32) -> String {
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if exp >= 0 {
        let exp = exp as usize;
        for i in 0..=exp {
            out.push(*digits.get(i).unwrap_or(&b'0') as char);
        }
        if exp + 1 < digits.len() {
            let frac: String = digits[exp + 1..].iter().map(|&b| b as char).collect();
            let frac = frac.trim_end_matches('0');
            if !frac.is_empty() {
                out.push('.');
                out.push_str(frac);
            }
        }
    } else {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        let frac: String = digits.iter().map(|&b| b as char).collect();
        out.push_str(frac.trim_end_matches('0'));
    }
    out
}

fn trim_trailing_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn write_text(path: impl AsRef<Path>, content: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    f.write_all(content.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parse one float field of a CSV row, with file/line context on failure.
pub fn parse_f64(field: &str, path: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_string(),
        line,
        detail: format!("not a number: {field:?}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_digit_formatting() {
        assert_eq!(fmt_sig(0.0, 9), "0");
        assert_eq!(fmt_sig(1.0, 9), "1");
        assert_eq!(fmt_sig(-2.5, 9), "-2.5");
        assert_eq!(fmt_sig(123456789.0, 9), "123456789");
        assert_eq!(fmt_sig(1234567891.0, 9), "1.23456789e9");
        assert_eq!(fmt_sig(0.000123456789, 9), "0.000123456789");
        assert_eq!(fmt_sig(0.0000123456789, 9), "1.23456789e-5");
        assert_eq!(fmt_sig(std::f64::consts::PI, 9), "3.14159265");
    }

    #[test]
    fn formatting_round_trips_within_precision() {
        for &v in &[
            1.0 / 3.0,
            -98765.4321,
            1e-7,
            2.0f64.sqrt(),
            -0.001953125,
            6.25e11,
        ] {
            let s = fmt_sig(v, 9);
            let back: f64 = s.parse().unwrap();
            let rel = ((back - v) / v).abs();
            assert!(rel < 1e-8, "{v} -> {s} -> {back} (rel {rel})");
        }
    }
}

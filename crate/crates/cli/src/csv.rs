//! Plain CSV emission with fixed 9-significant-digit numbers.

use std::fmt::Write as _;

/// Shortest rendering of `x` rounded to 9 significant digits.
///
/// Positional notation for decimal exponents in [-5, 9), scientific otherwise;
/// trailing fractional zeros are dropped.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn opt_int<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Header plus rows, newline-terminated.
pub fn table(header: &str, rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    writeln!(out, "{header}").unwrap();
    for row in rows {
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    out
}

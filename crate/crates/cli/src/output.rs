use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::args::Format;

const SIG_DIGITS: usize = 12;

/// `%.12g`-style rendering: 12 significant digits, trailing zeros dropped.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
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

/// Rounds every non-integer number in a JSON tree to 12 significant digits.
fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            if let Some(r) = fmt_float(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("serializable report");
    round_numbers(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("valid JSON");
    s.push('\n');
    s
}

/// Picks the explicit format, else the one implied by the file extension, else CSV.
pub fn resolve_format(explicit: Option<Format>, out: Option<&Path>) -> Format {
    explicit.unwrap_or_else(|| match out.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Csv,
    })
}

/// Writes to `out`, or stdout when no path is given.
pub fn emit(text: &str, out: Option<&Path>) -> io::Result<()> {
    match out {
        Some(path) => fs::write(path, text),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_use_twelve_significant_digits() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(0.25), "0.25");
        assert_eq!(fmt_float(-2.5), "-2.5");
        assert_eq!(fmt_float(0.7660578937111111), "0.766057893711");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_float(123456.789), "123456.789");
        assert_eq!(fmt_float(9.999999999999999), "10");
        assert_eq!(fmt_float(1e-7), "1e-7");
        assert_eq!(fmt_float(1.5e-5), "1.5e-5");
        assert_eq!(fmt_float(1.5e-4), "0.00015");
        assert_eq!(fmt_float(1e12), "1e12");
        assert_eq!(fmt_float(123456789012.0), "123456789012");
        assert_eq!(fmt_float(f64::NAN), "nan");
    }

    #[test]
    fn json_numbers_are_rounded() {
        let s = to_json(&serde_json::json!({"a": 0.1 + 0.2, "n": 3, "v": [1.0 / 3.0]}));
        assert!(s.contains("\"a\": 0.3"), "{s}");
        assert!(s.contains("\"n\": 3"), "{s}");
        assert!(s.contains("0.333333333333"), "{s}");
        assert!(s.ends_with('\n') && !s.contains('\r'));
    }

    #[test]
    fn format_follows_extension() {
        assert_eq!(resolve_format(None, Some(Path::new("r.json"))), Format::Json);
        assert_eq!(resolve_format(None, Some(Path::new("r.csv"))), Format::Csv);
        assert_eq!(resolve_format(None, None), Format::Csv);
        assert_eq!(resolve_format(Some(Format::Json), Some(Path::new("r.csv"))), Format::Json);
    }
}

//! `name:key=value,...` parsing shared by the model, loss and estimator specs.

use crate::error::{Error, Result};

pub(crate) fn parse_err(input: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        input: input.to_string(),
        reason: reason.into(),
    }
}

/// Splits `head:rest` into `(head, rest)`; `rest` is empty when there is no colon.
pub(crate) fn split_head(input: &str) -> (&str, &str) {
    match input.split_once(':') {
        Some((h, r)) => (h.trim(), r.trim()),
        None => (input.trim(), ""),
    }
}

/// Parses `k1=v1,k2=v2` and requires exactly the listed keys.
pub(crate) fn keyed(input: &str, body: &str, keys: &[&str]) -> Result<Vec<f64>> {
    let mut out = vec![None; keys.len()];
    for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| parse_err(input, format!("expected key=value, found `{part}`")))?;
        let idx = keys
            .iter()
            .position(|key| *key == k.trim())
            .ok_or_else(|| parse_err(input, format!("unknown key `{}`; expected {}", k.trim(), keys.join(", "))))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| parse_err(input, format!("`{}` is not a number", v.trim())))?;
        if out[idx].replace(value).is_some() {
            return Err(parse_err(input, format!("key `{}` given twice", k.trim())));
        }
    }
    keys.iter()
        .zip(out)
        .map(|(k, v)| v.ok_or_else(|| parse_err(input, format!("missing key `{k}`"))))
        .collect()
}

pub(crate) fn no_params(input: &str, body: &str) -> Result<()> {
    if body.is_empty() {
        Ok(())
    } else {
        Err(parse_err(input, "takes no parameters"))
    }
}

//! Text formats for experiment parameters: scalar quantities, sweep grids
//! and `key = value` preset files.

use crate::error::{Error, Result};

/// Parses a scalar: a plain number, a ratio `a/b`, or a decibel value with
/// a `dB` suffix (converted to linear). `-inf dB` is exactly zero.
pub fn parse_quantity(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some(db) = s.strip_suffix("dB") {
        let x = parse_number(db.trim())?;
        if x == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        if !x.is_finite() {
            return Err(Error::parse(0, format!("non-finite decibel value `{s}`")));
        }
        return Ok(db_to_linear(x));
    }
    let x = if let Some((a, b)) = s.split_once('/') {
        let (a, b) = (parse_number(a.trim())?, parse_number(b.trim())?);
        if b == 0.0 {
            return Err(Error::parse(0, format!("zero denominator in `{s}`")));
        }
        a / b
    } else {
        parse_number(s)?
    };
    if !x.is_finite() {
        return Err(Error::parse(0, format!("non-finite value `{s}`")));
    }
    Ok(x)
}

/// A number as it appears on a dB axis; `-inf` is allowed.
pub fn parse_db(s: &str) -> Result<f64> {
    let x = parse_number(s.trim().trim_end_matches("dB").trim())?;
    if x.is_nan() || x == f64::INFINITY {
        return Err(Error::parse(0, format!("invalid decibel value `{s}`")));
    }
    Ok(x)
}

fn parse_number(s: &str) -> Result<f64> {
    match s {
        "-inf" => return Ok(f64::NEG_INFINITY),
        "inf" | "+inf" => return Ok(f64::INFINITY),
        _ => {}
    }
    // Rust's float parser also accepts spellings like "NaN" and "infinity".
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b)) {
        return Err(Error::parse(0, format!("not a number: `{s}`")));
    }
    s.parse::<f64>()
        .map_err(|_| Error::parse(0, format!("not a number: `{s}`")))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Parses a sweep grid: `lin:a:b:n`, `log:a:b:n` (geometric, `a, b > 0`)
/// or a comma-separated list. Values must be strictly increasing.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    let values = if let Some(rest) = s.strip_prefix("lin:").or_else(|| s.strip_prefix("log:")) {
        let log = s.starts_with("log:");
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::parse(0, format!("expected `{}:a:b:n`, got `{s}`", &s[..3])));
        }
        let a = parse_number(parts[0].trim())?;
        let b = parse_number(parts[1].trim())?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(0, format!("bad point count `{}`", parts[2])))?;
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::parse(0, "grid bounds must be finite"));
        }
        if n == 0 || n > 1_000_000 {
            return Err(Error::parse(0, format!("point count must lie in 1..=1000000, got {n}")));
        }
        if log && !(a > 0.0 && b > 0.0) {
            return Err(Error::parse(0, "log grid bounds must be positive"));
        }
        if n == 1 {
            vec![a]
        } else {
            let (lo, hi) = if log { (a.ln(), b.ln()) } else { (a, b) };
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        return b;
                    }
                    let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                    if log {
                        x.exp()
                    } else {
                        x
                    }
                })
                .collect()
        }
    } else {
        s.split(',').map(parse_db).collect::<Result<Vec<_>>>()?
    };
    check_grid(&values)?;
    Ok(values)
}

pub fn check_grid(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::parse(0, "grid is empty"));
    }
    if values.windows(2).any(|w| w[1].is_nan() || w[1] <= w[0]) {
        return Err(Error::parse(0, "grid must be strictly increasing"));
    }
    Ok(())
}

/// A parsed preset: ordered `key = value` entries. Repeated keys are kept
/// in order; [`Preset::get`] returns the last one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Preset {
    entries: Vec<(String, String, usize)>,
}

impl Preset {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(k) => &raw[..k],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
            let k = k.trim();
            if k.is_empty() || !k.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_') {
                return Err(Error::parse(line_no, format!("invalid key `{k}`")));
            }
            entries.push((k.to_string(), v.trim().to_string(), line_no));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|e| e.0 == key).map(|e| e.1.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries.iter().filter(move |e| e.0 == key).map(|e| e.1.as_str())
    }

    /// Entries in file order as `(key, value, line)`.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, usize)> {
        self.entries.iter().map(|(k, v, l)| (k.as_str(), v.as_str(), *l))
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entries.iter().rev().find(|e| e.0 == key).map_or(0, |e| e.2)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.push((key.to_string(), value.to_string(), 0));
    }
}

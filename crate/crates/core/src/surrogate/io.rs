//! Plain-text model files.
//!
//! ```text
//! rarebound-surrogate 1
//! family polynomial 3            # or: family network 8 8
//! dimension 2
//! offset 0
//! scale 1
//! params 10
//! 0.125
//! ...                            # one parameter per line
//! theta -0.031
//! certificate 400 0.05 6 0.13    # n_test alpha C bound, or: certificate none
//! ```
//!
//! Reals are written with the shortest representation that parses back to
//! the same `f64`, so a save/load round trip is exact. Blank lines and text
//! after `#` are ignored.

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::certify::{Certificate, ShiftedSurrogate};
use super::model::{RegressionSurrogate, SurrogateFamily};

const MAGIC: &str = "rarebound-surrogate 1";

pub fn save_model(model: &ShiftedSurrogate) -> String {
    let base = &model.base;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    match &base.family {
        SurrogateFamily::PolynomialTotalDegree { degree } => {
            let _ = writeln!(out, "family polynomial {degree}");
        }
        SurrogateFamily::SmallFeedforward { hidden } => {
            let sizes: Vec<String> = hidden.iter().map(|h| h.to_string()).collect();
            let _ = writeln!(out, "family network {}", sizes.join(" "));
        }
    }
    let _ = writeln!(out, "dimension {}", base.dimension);
    let _ = writeln!(out, "offset {}", base.offset);
    let _ = writeln!(out, "scale {}", base.scale);
    let _ = writeln!(out, "params {}", base.params.len());
    for p in &base.params {
        let _ = writeln!(out, "{p}");
    }
    let _ = writeln!(out, "theta {}", model.theta);
    match &model.certificate {
        Some(c) => {
            let _ = writeln!(out, "certificate {} {} {} {}", c.n_test, c.alpha, c.c, c.bernstein_bound);
        }
        None => {
            let _ = writeln!(out, "certificate none");
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Self {
            inner: it.peekable(),
            last: 0,
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((n, l)) => {
                self.last = n;
                Ok((n, l))
            }
            None => Err(Error::Parse {
                line: self.last + 1,
                message: "unexpected end of model file".into(),
            }),
        }
    }

    /// Next line, which must start with `key`; returns the remaining fields.
    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, l) = self.next()?;
        let mut fields = l.split_whitespace();
        if fields.next() != Some(key) {
            return Err(parse_err(n, format!("expected `{key}`")));
        }
        Ok((n, fields.collect()))
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| parse_err(line, format!("bad number `{s}`")))
}

fn single<T: std::str::FromStr>(line: usize, fields: &[&str]) -> Result<T> {
    match fields {
        [v] => num(line, v),
        _ => Err(parse_err(line, "expected exactly one value")),
    }
}

pub fn load_model(text: &str) -> Result<ShiftedSurrogate> {
    let mut lines = Lines::new(text);
    let (n, header) = lines.next()?;
    if header != MAGIC {
        return Err(parse_err(n, format!("expected header `{MAGIC}`")));
    }
    let (n, fields) = lines.keyed("family")?;
    let family = match fields.split_first() {
        Some((&"polynomial", rest)) => SurrogateFamily::PolynomialTotalDegree {
            degree: single(n, rest)?,
        },
        Some((&"network", rest)) if !rest.is_empty() => SurrogateFamily::SmallFeedforward {
            hidden: rest.iter().map(|s| num(n, s)).collect::<Result<_>>()?,
        },
        _ => return Err(parse_err(n, "family must be `polynomial <degree>` or `network <sizes>`")),
    };
    let (n, f) = lines.keyed("dimension")?;
    let dimension: usize = single(n, &f)?;
    let (n, f) = lines.keyed("offset")?;
    let offset: f64 = single(n, &f)?;
    let (n, f) = lines.keyed("scale")?;
    let scale: f64 = single(n, &f)?;
    let (params_line, f) = lines.keyed("params")?;
    let count: usize = single(params_line, &f)?;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, l) = lines.next()?;
        params.push(num(n, l)?);
    }
    let base = RegressionSurrogate::from_parts(family, dimension, params, offset, scale)
        .map_err(|e| parse_err(params_line, e.to_string()))?;
    let (n, f) = lines.keyed("theta")?;
    let theta: f64 = single(n, &f)?;
    if !(theta <= 0.0) {
        return Err(parse_err(n, "theta must be <= 0"));
    }
    let (n, f) = lines.keyed("certificate")?;
    let certificate = match f.as_slice() {
        ["none"] => None,
        [a, b, c, d] => Some(Certificate {
            n_test: num(n, a)?,
            alpha: num(n, b)?,
            c: num(n, c)?,
            bernstein_bound: num(n, d)?,
        }),
        _ => return Err(parse_err(n, "certificate must be `none` or four values")),
    };
    if let Some((n, _)) = lines.inner.next() {
        return Err(parse_err(n, "trailing content after certificate"));
    }
    Ok(ShiftedSurrogate {
        base,
        theta,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ShiftedSurrogate {
        let base = RegressionSurrogate::from_parts(
            SurrogateFamily::SmallFeedforward { hidden: vec![3, 2] },
            2,
            (0..SurrogateFamily::SmallFeedforward { hidden: vec![3, 2] }.param_count(2))
                .map(|i| (i as f64).sin() / 3.0)
                .collect(),
            0.1 + 0.2,
            1.0 / 7.0,
        )
        .unwrap();
        ShiftedSurrogate {
            base,
            theta: -0.031_415_926_535_897_93,
            certificate: Some(Certificate {
                n_test: 400,
                alpha: 0.05,
                c: 6.0,
                bernstein_bound: 0.1349,
            }),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample();
        let text = save_model(&m);
        let back = load_model(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(save_model(&back), text);
        let x = [0.3, 0.8];
        assert_eq!(back.predict(&x).to_bits(), m.predict(&x).to_bits());
    }

    #[test]
    fn polynomial_without_certificate() {
        let base = RegressionSurrogate::from_parts(
            SurrogateFamily::PolynomialTotalDegree { degree: 1 },
            2,
            vec![1.0, -2.5, 1e-300],
            0.0,
            1.0,
        )
        .unwrap();
        let m = ShiftedSurrogate {
            base,
            theta: 0.0,
            certificate: None,
        };
        assert_eq!(load_model(&save_model(&m)).unwrap(), m);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = save_model(&sample());
        let broken = text.replacen("dimension 2", "dimension two", 1);
        assert!(matches!(load_model(&broken), Err(Error::Parse { line: 3, .. })));
        let truncated: String = text.lines().take(7).map(|l| format!("{l}\n")).collect();
        assert!(matches!(load_model(&truncated), Err(Error::Parse { .. })));
        let positive = text.replacen("theta -", "theta ", 1);
        assert!(load_model(&positive).is_err());
        assert!(load_model("not a model").is_err());
    }
}

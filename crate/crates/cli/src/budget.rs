use std::fmt;
use std::str::FromStr;

use specseg::Error;

/// A channel count given either absolutely or relative to the tensor's `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Count(usize),
    /// `C/d`
    Divided(usize),
    /// A fraction of `C` in `(0, 1]`, rounded to the nearest count.
    Fraction(f64),
}

impl Budget {
    pub fn resolve(self, channels: usize) -> Result<usize, Error> {
        let n = match self {
            Budget::Count(n) => n,
            Budget::Divided(d) => channels / d,
            Budget::Fraction(f) => (f * channels as f64).round() as usize,
        };
        if n == 0 || n > channels {
            return Err(Error::Config(format!("channel budget {self} gives {n}, outside 1..={channels}")));
        }
        Ok(n)
    }
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::Config(format!("cannot read channel budget {s:?}; use an integer, a fraction or C/d"));
        let t = s.trim();
        if t.eq_ignore_ascii_case("c") {
            return Ok(Budget::Divided(1));
        }
        if let Some(d) = t.strip_prefix("C/").or_else(|| t.strip_prefix("c/")) {
            let d: usize = d.trim().parse().map_err(|_| bad())?;
            return if d == 0 { Err(bad()) } else { Ok(Budget::Divided(d)) };
        }
        if t.contains('.') {
            let f: f64 = t.parse().map_err(|_| bad())?;
            return if f > 0.0 && f <= 1.0 { Ok(Budget::Fraction(f)) } else { Err(bad()) };
        }
        t.parse().map(Budget::Count).map_err(|_| bad())
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Count(n) => write!(f, "{n}"),
            Budget::Divided(1) => f.write_str("C"),
            Budget::Divided(d) => write!(f, "C/{d}"),
            Budget::Fraction(x) => write!(f, "{x}"),
        }
    }
}

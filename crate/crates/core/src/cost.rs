//! Exact decimal edge costs.

use std::fmt;
use std::str::FromStr;

use crate::model::Assignment;

/// `mantissa · 10^(-scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decimal {
    mantissa: i128,
    scale: u32,
}

const MAX_SCALE: u32 = 18;

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // integer parts first, then fractions padded to the maximal scale
        let split = |d: &Decimal| {
            let unit = 10i128.pow(d.scale);
            let frac = d.mantissa.rem_euclid(unit) * 10i128.pow(MAX_SCALE - d.scale);
            (d.mantissa.div_euclid(unit), frac)
        };
        split(self).cmp(&split(other))
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Decimal {
    pub const ZERO: Decimal = Decimal { mantissa: 0, scale: 0 };

    pub fn new(mantissa: i128, scale: u32) -> Self {
        Decimal { mantissa, scale }.normalized()
    }

    pub fn from_int(v: i128) -> Self {
        Decimal { mantissa: v, scale: 0 }
    }

    pub fn mantissa(&self) -> i128 {
        self.mantissa
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    fn normalized(mut self) -> Self {
        while self.scale > 0 && self.mantissa % 10 == 0 {
            self.mantissa /= 10;
            self.scale -= 1;
        }
        self
    }

    /// The value times `10^scale`, when that is an integer that fits.
    pub fn at_scale(&self, scale: u32) -> Option<i128> {
        let up = scale.checked_sub(self.scale)?;
        10i128.checked_pow(up)?.checked_mul(self.mantissa)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            return write!(f, "{}", self.mantissa);
        }
        let sign = if self.mantissa < 0 { "-" } else { "" };
        let digits = self.mantissa.unsigned_abs().to_string();
        let scale = self.scale as usize;
        let padded = format!("{digits:0>width$}", width = scale + 1);
        let (int, frac) = padded.split_at(padded.len() - scale);
        write!(f, "{sign}{int}.{frac}")
    }
}

impl FromStr for Decimal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("`{s}` is not a finite decimal number");
        let (body, exponent) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let (negative, body) = match body.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, body.strip_prefix('+').unwrap_or(body)),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() && frac.is_empty()
            || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let mut mantissa: i128 = 0;
        for b in int.bytes().chain(frac.bytes()) {
            mantissa = mantissa
                .checked_mul(10)
                .and_then(|m| m.checked_add((b - b'0') as i128))
                .ok_or_else(bad)?;
        }
        if negative {
            mantissa = -mantissa;
        }
        let mut scale = frac.len() as i64 - exponent as i64;
        if scale < 0 {
            let factor = 10i128.checked_pow((-scale) as u32).ok_or_else(bad)?;
            mantissa = mantissa.checked_mul(factor).ok_or_else(bad)?;
            scale = 0;
        }
        let mut d = Decimal { mantissa, scale: scale as u32 }.normalized();
        if d.scale > MAX_SCALE {
            return Err(format!("`{s}` has more than {MAX_SCALE} decimal places"));
        }
        if d.mantissa == 0 {
            d.scale = 0;
        }
        Ok(d)
    }
}

/// Per-edge costs, indexed by canonical edge index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostVector(pub Vec<Decimal>);

impl CostVector {
    pub fn from_ints(values: &[i64]) -> Self {
        CostVector(values.iter().map(|&v| Decimal::from_int(v as i128)).collect())
    }

    /// Smallest scale at which every cost is an integer.
    pub fn common_scale(&self) -> u32 {
        self.0.iter().map(Decimal::scale).max().unwrap_or(0)
    }

    /// Costs multiplied by `10^common_scale`.
    pub fn scaled(&self) -> Option<(u32, Vec<i128>)> {
        let scale = self.common_scale();
        let values = self.0.iter().map(|d| d.at_scale(scale)).collect::<Option<Vec<_>>>()?;
        Some((scale, values))
    }

    /// `c · x`, exactly.
    pub fn dot(&self, x: &Assignment) -> Option<Decimal> {
        let (scale, values) = self.scaled()?;
        let mut total: i128 = 0;
        for (c, &v) in values.iter().zip(x.values()) {
            total = total.checked_add(c.checked_mul(v as i128)?)?;
        }
        Some(Decimal::new(total, scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn orders_across_scales() {
        assert!(d("-0.25") < d("-0.2"));
        assert!(d("-1") < d("-0.5"));
        assert!(d("1.05") > d("1"));
        assert_eq!(d("2.50").cmp(&d("2.5")), std::cmp::Ordering::Equal);
    }

    #[test]
    fn parses_and_prints_exactly() {
        assert_eq!(d("1.50").to_string(), "1.5");
        assert_eq!(d("-0.25").to_string(), "-0.25");
        assert_eq!(d("-0.05").to_string(), "-0.05");
        assert_eq!(d("3").to_string(), "3");
        assert_eq!(d("1e2").to_string(), "100");
        assert_eq!(d("2.5e-3").to_string(), "0.0025");
        assert_eq!(d("-0.0").to_string(), "0");
        assert!("abc".parse::<Decimal>().is_err());
        assert!("1.2.3".parse::<Decimal>().is_err());
        assert!("NaN".parse::<Decimal>().is_err());
    }

    #[test]
    fn dot_product_is_exact() {
        let c = CostVector(vec![d("0.1"), d("0.2"), d("-3")]);
        let x = Assignment(vec![1, 2, 1]);
        assert_eq!(c.dot(&x).unwrap().to_string(), "-2.5");
        assert_eq!(c.scaled().unwrap(), (1, vec![1, 2, -30]));
    }
}

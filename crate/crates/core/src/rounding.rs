//! Significant-digit rounding carried out on decimal digit strings.
//!
//! A value is first reduced to its shortest round-trip decimal form, then
//! canonicalized to [`CANONICAL_DIGITS`] significant digits, and only then
//! rounded to the requested depth. No step multiplies or divides in binary
//! floating point, so the rendered text of a key is identical on every
//! platform.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significant digits kept before depth rounding; absorbs float dust such as
/// `...99999999` left behind by averaging.
pub const CANONICAL_DIGITS: usize = 12;

/// Number of significant decimal digits kept by rounding. Always at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct RoundingDepth(u32);

impl RoundingDepth {
    pub fn new(depth: u32) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidDepth(depth));
        }
        Ok(RoundingDepth(depth))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for RoundingDepth {
    type Error = Error;

    fn try_from(value: u32) -> Result<Self> {
        RoundingDepth::new(value)
    }
}

impl From<RoundingDepth> for u32 {
    fn from(d: RoundingDepth) -> u32 {
        d.0
    }
}

impl fmt::Display for RoundingDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for RoundingDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let d: u32 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("invalid rounding depth {s:?}")))?;
        RoundingDepth::new(d)
    }
}

/// Sign, significant digits and decimal exponent.
///
/// The value is `d0.d1d2... * 10^exponent`. `digits` has no leading or
/// trailing zeros; an empty digit string is zero, which is never negative.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Decimal {
    negative: bool,
    digits: Vec<u8>,
    exponent: i32,
}

impl Decimal {
    fn zero() -> Self {
        Decimal {
            negative: false,
            digits: Vec::new(),
            exponent: 0,
        }
    }

    fn is_zero(&self) -> bool {
        self.digits.is_empty()
    }

    /// Shortest decimal that parses back to exactly `x`.
    fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        // `{:e}` yields shortest round-trip digits, e.g. "-1.358e3" or "5e-1".
        let text = format!("{:e}", x);
        let (mantissa, exp) = text.split_once('e').expect("exponent form");
        let exponent: i32 = exp.parse().expect("integer exponent");
        let (negative, mantissa) = match mantissa.strip_prefix('-') {
            Some(m) => (true, m),
            None => (false, mantissa),
        };
        let digits = mantissa.bytes().filter(u8::is_ascii_digit).map(|b| b - b'0').collect();
        Ok(Decimal::normalized(negative, digits, exponent))
    }

    /// Strips leading/trailing zeros; `exponent` refers to the first digit given.
    fn normalized(negative: bool, mut digits: Vec<u8>, mut exponent: i32) -> Self {
        let lead = digits.iter().take_while(|&&d| d == 0).count();
        if lead == digits.len() {
            return Decimal::zero();
        }
        digits.drain(..lead);
        exponent -= lead as i32;
        while digits.last() == Some(&0) {
            digits.pop();
        }
        Decimal {
            negative,
            digits,
            exponent,
        }
    }

    /// Rounds to `n` significant digits, half away from zero.
    fn round_sig(&self, n: usize) -> Decimal {
        if self.digits.len() <= n {
            return self.clone();
        }
        let mut kept = self.digits[..n].to_vec();
        let mut exponent = self.exponent;
        if self.digits[n] >= 5 {
            let mut i = n;
            loop {
                if i == 0 {
                    kept.insert(0, 1);
                    kept.pop();
                    exponent += 1;
                    break;
                }
                i -= 1;
                if kept[i] == 9 {
                    kept[i] = 0;
                } else {
                    kept[i] += 1;
                    break;
                }
            }
        }
        Decimal::normalized(self.negative, kept, exponent)
    }

    /// Plain positional rendering with at least one fractional digit.
    fn render(&self) -> String {
        if self.is_zero() {
            return "0.0".to_string();
        }
        let mut out = String::new();
        if self.negative {
            out.push('-');
        }
        let digit = |d: &u8| char::from(b'0' + d);
        if self.exponent < 0 {
            out.push_str("0.");
            for _ in 0..(-self.exponent - 1) {
                out.push('0');
            }
            out.extend(self.digits.iter().map(digit));
        } else {
            let int_len = self.exponent as usize + 1;
            for i in 0..int_len {
                out.push(self.digits.get(i).map_or('0', digit));
            }
            out.push('.');
            if self.digits.len() > int_len {
                out.extend(self.digits[int_len..].iter().map(digit));
            } else {
                out.push('0');
            }
        }
        out
    }

    /// Parses `[-]digits[.digits]`.
    fn parse(s: &str) -> Option<Decimal> {
        let (negative, body) = match s.strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let digits: Vec<u8> = int.bytes().chain(frac.bytes()).map(|b| b - b'0').collect();
        let exponent = i32::try_from(int.len()).ok()? - 1;
        let d = Decimal::normalized(negative, digits, exponent);
        Some(if d.is_zero() { Decimal::zero() } else { d })
    }

    fn cmp_magnitude(&self, other: &Decimal) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => self
                .exponent
                .cmp(&other.exponent)
                .then_with(|| self.digits.cmp(&other.digits)),
        }
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.negative, other.negative) {
            (false, true) => Ordering::Greater,
            (true, false) => Ordering::Less,
            (false, false) => self.cmp_magnitude(other),
            (true, true) => other.cmp_magnitude(self),
        }
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A decimal value together with its canonical text, e.g. `6000.0`, `5.3`,
/// `0.04`. Equality, ordering and hashing agree with the numeric value.
#[derive(Debug, Clone)]
pub struct CanonicalDecimal {
    text: String,
    value: Decimal,
}

impl CanonicalDecimal {
    fn from_decimal(value: Decimal) -> Self {
        CanonicalDecimal {
            text: value.render(),
            value,
        }
    }

    /// `x` reduced to at most [`CANONICAL_DIGITS`] significant digits.
    pub fn canonicalize(x: f64) -> Result<Self> {
        Ok(Self::from_decimal(Decimal::from_f64(x)?.round_sig(CANONICAL_DIGITS)))
    }

    /// Rounds to `depth` significant digits; identity when fewer digits exist.
    pub fn round(&self, depth: RoundingDepth) -> Self {
        Self::from_decimal(self.value.round_sig(depth.get() as usize))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn to_f64(&self) -> f64 {
        self.text.parse().expect("canonical text is a valid float literal")
    }

    pub fn significant_digits(&self) -> usize {
        self.value.digits.len()
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    /// Exact multiplication by `10^k`.
    pub fn scale_pow10(&self, k: i32) -> Self {
        if self.value.is_zero() {
            return self.clone();
        }
        let mut v = self.value.clone();
        v.exponent += k;
        Self::from_decimal(v)
    }

    pub fn negate(&self) -> Self {
        let mut v = self.value.clone();
        if !v.is_zero() {
            v.negative = !v.negative;
        }
        Self::from_decimal(v)
    }
}

/// Rounds `x` to `depth` significant digits, half away from zero.
pub fn round_to_depth(x: f64, depth: RoundingDepth) -> Result<CanonicalDecimal> {
    Ok(CanonicalDecimal::canonicalize(x)?.round(depth))
}

impl PartialEq for CanonicalDecimal {
    fn eq(&self, other: &Self) -> bool {
        self.text == other.text
    }
}

impl Eq for CanonicalDecimal {}

impl Hash for CanonicalDecimal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.text.hash(state);
    }
}

impl Ord for CanonicalDecimal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.cmp(&other.value)
    }
}

impl PartialOrd for CanonicalDecimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for CanonicalDecimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Accepts only canonical text: `"6000.0"` parses, `"6000"` and `"6000.00"` do not.
impl FromStr for CanonicalDecimal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let value = Decimal::parse(s).ok_or_else(|| Error::InvalidDecimal(s.to_string()))?;
        let c = Self::from_decimal(value);
        if c.text != s {
            return Err(Error::InvalidDecimal(s.to_string()));
        }
        Ok(c)
    }
}

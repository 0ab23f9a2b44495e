//! Extended-precision scalars, symbolic level magnitudes and the adaptive
//! precision driver.

use std::cmp::Ordering;
use std::fmt;

use rug::float::Round;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::cantor::CantorParams;
use crate::error::{param, Error, Result};

/// Arbitrary-precision binary float.
pub type BigReal = Float;

/// Hard cap on any working width.
pub const MAX_WIDTH_BITS: u32 = 1 << 23;
pub const DEFAULT_HEADROOM: u32 = 128;
/// Width used for products, quotients and sums of point differences.
pub const WORK_BITS: u32 = 192;
/// Relative rounding allowance applied when comparing floating results
/// against bounds.
pub const ROUNDING_ALLOWANCE_LOG2: i32 = -96;
/// Largest binary exponent magnitude a realised value may carry.
pub const EXP_LIMIT: f64 = 1.0e9;

/// Precision in bits; at least 64.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Width(u32);

impl Width {
    pub const MIN_BITS: u32 = 64;

    pub fn new(bits: u32) -> Result<Self> {
        if bits > MAX_WIDTH_BITS {
            return Err(Error::PrecisionBudget {
                needed: bits as u64,
                cap: MAX_WIDTH_BITS as u64,
            });
        }
        Ok(Width(bits.max(Self::MIN_BITS)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn doubled(self) -> Result<Self> {
        Width::new(self.0.saturating_mul(2))
    }

    pub fn work() -> Self {
        Width(WORK_BITS)
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} bits", self.0)
    }
}

pub fn zero(width: Width) -> BigReal {
    Float::new(width.bits())
}

pub fn one(width: Width) -> BigReal {
    Float::with_val(width.bits(), 1)
}

pub fn from_rational(r: &Rational, width: Width) -> BigReal {
    Float::with_val(width.bits(), r)
}

/// Parses `a/b`, integers and decimal or scientific notation into an exact
/// rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(param("empty number"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = parse_rational(num)?;
        let d = parse_rational(den)?;
        if d == 0 {
            return Err(param(format!("zero denominator in {text:?}")));
        }
        return Ok(n / d);
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => {
            let e: i32 = s[i + 1..]
                .parse()
                .map_err(|_| param(format!("bad exponent in {text:?}")))?;
            (&s[..i], e)
        }
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(param(format!("not a number: {text:?}")));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(param(format!("not a number: {text:?}")));
    }
    let all: String = format!("{int_part}{frac_part}");
    let n = Integer::from_str_radix(if all.is_empty() { "0" } else { &all }, 10)
        .map_err(|_| param(format!("not a number: {text:?}")))?;
    let scale = exp - frac_part.len() as i32;
    if scale.unsigned_abs() > 4000 {
        return Err(param(format!("exponent too large in {text:?}")));
    }
    let ten = Integer::from(10);
    let mut r = Rational::from(n);
    if scale >= 0 {
        r *= Rational::from(ten.pow(scale as u32));
    } else {
        r /= Rational::from(ten.pow((-scale) as u32));
    }
    if neg {
        r = -r;
    }
    Ok(r)
}

/// Formats a rational the way it is usually written: `2`, `1/4`, `5/2`.
pub fn format_rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Fixed 24-significant-digit decimal rendering; deterministic across runs.
pub fn fmt_big(x: &BigReal) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let s = x.to_string_radix(10, Some(24));
    // rug renders as d.ddd...e±x; normalise the exponent marker
    s.replace('e', "e")
}

/// log2|x| as f64, `None` for zero.
pub fn log2_abs(x: &BigReal) -> Option<f64> {
    if x.is_zero() {
        return None;
    }
    if x.is_infinite() {
        return Some(f64::INFINITY);
    }
    // exponent plus log2 of the normalised mantissa in [0.5, 1)
    let e = x.get_exp().unwrap_or(0) as f64;
    let m = Float::with_val(64, x.abs_ref()) >> x.get_exp().unwrap_or(0);
    Some(e + m.to_f64().log2())
}

/// Smallest number of bits resolving the level-`depth` scale, plus headroom:
/// `ceil(alpha^depth * log2(1/ell1)) + headroom`.
pub fn required_bits(params: &CantorParams, depth: u32, headroom: u32) -> Result<Width> {
    let apow = params.alpha_pow(depth);
    let lg = params.log2_inv_ell1();
    let core: u64 = match lg {
        Log2Inv::Exact(m) => {
            let v = apow * Rational::from(m);
            let c = v.ceil();
            c.numer().to_u64().ok_or(Error::PrecisionBudget {
                needed: u64::MAX,
                cap: MAX_WIDTH_BITS as u64,
            })?
        }
        Log2Inv::Approx(l) => {
            let v = Float::with_val(256, &apow) * l;
            if v > MAX_WIDTH_BITS {
                return Err(Error::PrecisionBudget {
                    needed: v.to_f64().min(u64::MAX as f64) as u64,
                    cap: MAX_WIDTH_BITS as u64,
                });
            }
            v.to_integer_round(Round::Up)
                .map(|(i, _)| i)
                .and_then(|i| i.to_u64())
                .unwrap_or(u64::MAX)
        }
    };
    let needed = core.saturating_add(headroom as u64);
    if needed > MAX_WIDTH_BITS as u64 {
        return Err(Error::PrecisionBudget {
            needed,
            cap: MAX_WIDTH_BITS as u64,
        });
    }
    Width::new(needed as u32)
}

/// `log2(1/ell1)`, exact when `ell1` is a power of two.
pub enum Log2Inv {
    Exact(u32),
    Approx(BigReal),
}

/// Outcome of an adaptive evaluation: the stabilised value and the width at
/// which it was produced. Re-running at `width` reproduces `value`.
#[derive(Clone, Debug)]
pub struct Stabilized<T> {
    pub value: T,
    pub width: Width,
}

/// Driver that reruns a computation at doubling widths until two consecutive
/// results agree.
#[derive(Clone, Debug)]
pub struct AdaptiveEval {
    pub start: Width,
    /// log2 of the relative tolerance.
    pub rel_tol_log2: i32,
    pub max_doublings: u32,
    pub context: String,
}

impl AdaptiveEval {
    pub fn new(start: Width, rel_tol_log2: i32) -> Self {
        AdaptiveEval {
            start,
            rel_tol_log2,
            max_doublings: 8,
            context: "adaptive evaluation".to_string(),
        }
    }

    pub fn context(mut self, ctx: impl Into<String>) -> Self {
        self.context = ctx.into();
        self
    }

    fn agree(&self, a: &BigReal, b: &BigReal, abs_tol: Option<&BigReal>) -> bool {
        if a == b {
            return true;
        }
        let diff = Float::with_val(64, a - b).abs();
        let scale = Float::with_val(64, a.abs_ref()).max(&Float::with_val(64, b.abs_ref()));
        let rel = scale << self.rel_tol_log2;
        if diff <= rel {
            return true;
        }
        match abs_tol {
            Some(t) => diff <= *t,
            None => false,
        }
    }

    /// Scalar form.
    pub fn run<F>(&self, abs_tol: Option<&BigReal>, mut f: F) -> Result<Stabilized<BigReal>>
    where
        F: FnMut(Width) -> Result<BigReal>,
    {
        let tols: Vec<Option<BigReal>> = vec![abs_tol.cloned()];
        let out = self.run_vec(&tols, |w| Ok(vec![f(w)?]))?;
        Ok(Stabilized {
            value: out.value.into_iter().next().expect("one value"),
            width: out.width,
        })
    }

    /// Vector form: every entry must agree, entry `i` with absolute floor
    /// `abs_tol[i]`.
    pub fn run_vec<F>(
        &self,
        abs_tol: &[Option<BigReal>],
        mut f: F,
    ) -> Result<Stabilized<Vec<BigReal>>>
    where
        F: FnMut(Width) -> Result<Vec<BigReal>>,
    {
        let mut w = self.start;
        let mut prev = f(w)?;
        let mut disagreement = None;
        for _ in 0..self.max_doublings {
            let next_w = w.doubled()?;
            let next = f(next_w)?;
            if next.len() != prev.len() {
                return Err(Error::Consistency("adaptive result length changed".into()));
            }
            let worst = prev
                .iter()
                .zip(&next)
                .enumerate()
                .find(|(i, (a, b))| !self.agree(a, b, abs_tol.get(*i).and_then(|t| t.as_ref())));
            match worst {
                None => {
                    return Ok(Stabilized {
                        value: next,
                        width: next_w,
                    })
                }
                Some((_, (a, b))) if w.bits() * 2 > MAX_WIDTH_BITS / 2 => {
                    return Err(Error::Unstable {
                        context: self.context.clone(),
                        previous: fmt_big(a),
                        last: fmt_big(b),
                    })
                }
                Some((_, (a, b))) => disagreement = Some((fmt_big(a), fmt_big(b))),
            }
            prev = next;
            w = next_w;
        }
        let (previous, last) = disagreement.unwrap_or_default();
        Err(Error::Unstable {
            context: self.context.clone(),
            previous,
            last,
        })
    }
}

/// Convenience wrapper: starts at 128 bits.
pub fn adaptive_eval<F>(computation: F, rel_tol_log2: i32) -> Result<Stabilized<BigReal>>
where
    F: FnMut(Width) -> Result<BigReal>,
{
    AdaptiveEval::new(Width(128), rel_tol_log2).run(None, computation)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Neg,
    Zero,
    Pos,
}

/// Signed product of level lengths `sign * prod_j ell_j^{c_j}`. Its magnitude
/// is `ell_1^E` with `E = sum_j c_j alpha^{j-1}`; level 0 has length 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LogMag {
    pub sign: Sign,
    /// `powers[j]` is the multiplicity of `ell_j`; index 0 is unused.
    pub powers: Vec<i64>,
}

impl LogMag {
    pub fn one() -> Self {
        LogMag {
            sign: Sign::Pos,
            powers: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        LogMag {
            sign: Sign::Zero,
            powers: Vec::new(),
        }
    }

    pub fn level(j: usize) -> Self {
        let mut m = Self::one();
        m.add_power(j, 1);
        m
    }

    /// `prod_j ell_j^{deg[j]}`.
    pub fn from_degrees(deg: &[u64]) -> Self {
        let mut m = Self::one();
        for (j, &c) in deg.iter().enumerate() {
            m.add_power(j, c as i64);
        }
        m
    }

    pub fn add_power(&mut self, j: usize, c: i64) {
        if j == 0 || c == 0 {
            return;
        }
        if self.powers.len() <= j {
            self.powers.resize(j + 1, 0);
        }
        self.powers[j] += c;
        while self.powers.last() == Some(&0) {
            self.powers.pop();
        }
    }

    pub fn mul(&self, other: &LogMag) -> LogMag {
        let sign = match (self.sign, other.sign) {
            (Sign::Zero, _) | (_, Sign::Zero) => Sign::Zero,
            (a, b) if a == b => Sign::Pos,
            _ => Sign::Neg,
        };
        let mut m = LogMag {
            sign,
            powers: self.powers.clone(),
        };
        for (j, &c) in other.powers.iter().enumerate() {
            m.add_power(j, c);
        }
        m
    }

    pub fn recip(&self) -> Result<LogMag> {
        if self.sign == Sign::Zero {
            return Err(Error::Range("reciprocal of zero".into()));
        }
        Ok(LogMag {
            sign: self.sign,
            powers: self.powers.iter().map(|c| -c).collect(),
        })
    }

    pub fn max_level(&self) -> usize {
        self.powers.len().saturating_sub(1)
    }

    /// Exponent `E` scaled by `weights.scale`, exact.
    pub fn exponent_scaled(&self, weights: &ExponentWeights) -> Result<i128> {
        let mut e: i128 = 0;
        for (j, &c) in self.powers.iter().enumerate().skip(1) {
            let w = weights.weight(j)?;
            e = (c as i128)
                .checked_mul(w)
                .and_then(|t| e.checked_add(t))
                .ok_or_else(|| Error::Range("exponent overflow".into()))?;
        }
        Ok(e)
    }

    /// Real exponent `E` as a float.
    pub fn exponent(&self, params: &CantorParams) -> f64 {
        let mut e = 0.0;
        for (j, &c) in self.powers.iter().enumerate().skip(1) {
            e += c as f64 * params.alpha_f64().powi(j as i32 - 1);
        }
        e
    }

    /// Magnitude comparison, exact. `Greater` means `|self| > |other|`.
    pub fn cmp_magnitude(&self, other: &LogMag, weights: &ExponentWeights) -> Result<Ordering> {
        match (self.sign, other.sign) {
            (Sign::Zero, Sign::Zero) => return Ok(Ordering::Equal),
            (Sign::Zero, _) => return Ok(Ordering::Less),
            (_, Sign::Zero) => return Ok(Ordering::Greater),
            _ => {}
        }
        let a = self.exponent_scaled(weights)?;
        let b = other.exponent_scaled(weights)?;
        // larger exponent means smaller magnitude since ell_1 < 1
        Ok(b.cmp(&a))
    }

    /// Signed comparison of the values.
    pub fn cmp_value(&self, other: &LogMag, weights: &ExponentWeights) -> Result<Ordering> {
        let rank = |s: Sign| match s {
            Sign::Neg => -1,
            Sign::Zero => 0,
            Sign::Pos => 1,
        };
        let (ra, rb) = (rank(self.sign), rank(other.sign));
        if ra != rb {
            return Ok(ra.cmp(&rb));
        }
        let m = self.cmp_magnitude(other, weights)?;
        Ok(if ra < 0 { m.reverse() } else { m })
    }

    pub fn to_bigreal(&self, params: &CantorParams, width: Width) -> Result<BigReal> {
        logmag_to_bigreal(self, params, width)
    }
}

impl fmt::Display for LogMag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Zero => return write!(f, "0"),
            Sign::Neg => write!(f, "-")?,
            Sign::Pos => {}
        }
        let parts: Vec<String> = self
            .powers
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0)
            .map(|(j, c)| if *c == 1 { format!("l{j}") } else { format!("l{j}^{c}") })
            .collect();
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

/// Integer weights `w_j = a^{j-1} b^{D-j}` for `alpha = a/b`, so that
/// `sum_j c_j w_j = scale * sum_j c_j alpha^{j-1}` with `scale = b^{D-1}`.
#[derive(Clone, Debug)]
pub struct ExponentWeights {
    w: Vec<i128>,
    pub scale: i128,
}

impl ExponentWeights {
    pub fn new(params: &CantorParams, max_level: usize) -> Result<Self> {
        let d = max_level.max(1);
        let a = params
            .alpha()
            .numer()
            .to_i128()
            .ok_or_else(|| param("alpha numerator too large"))?;
        let b = params
            .alpha()
            .denom()
            .to_i128()
            .ok_or_else(|| param("alpha denominator too large"))?;
        let overflow = || Error::Range(format!("exponent weights overflow at depth {d}"));
        let mut w = vec![0i128; d + 1];
        for (j, slot) in w.iter_mut().enumerate().skip(1) {
            let ap = a.checked_pow(j as u32 - 1).ok_or_else(overflow)?;
            let bp = b.checked_pow((d - j) as u32).ok_or_else(overflow)?;
            *slot = ap.checked_mul(bp).ok_or_else(overflow)?;
        }
        let scale = b.checked_pow(d as u32 - 1).ok_or_else(overflow)?;
        // keep headroom for sums of a few million terms
        if w[d] > i128::MAX >> 40 {
            return Err(overflow());
        }
        Ok(ExponentWeights { w, scale })
    }

    pub fn weight(&self, j: usize) -> Result<i128> {
        if j == 0 {
            return Ok(0);
        }
        self.w
            .get(j)
            .copied()
            .ok_or_else(|| Error::Range(format!("level {j} beyond exponent weights")))
    }

    pub fn max_level(&self) -> usize {
        self.w.len() - 1
    }

    /// Scaled exponent as a float exponent.
    pub fn unscale(&self, e: i128) -> f64 {
        e as f64 / self.scale as f64
    }
}

/// Realises a symbolic magnitude as a float at `width`.
pub fn logmag_to_bigreal(m: &LogMag, params: &CantorParams, width: Width) -> Result<BigReal> {
    if m.sign == Sign::Zero {
        return Ok(zero(width));
    }
    let e2 = m.exponent(params) * params.log2_inv_ell1_f64();
    if e2.abs() > EXP_LIMIT {
        return Err(Error::Range(format!(
            "{m} has binary exponent about {:.3e}",
            -e2
        )));
    }
    let guard = Width::new(width.bits() + 32)?;
    let mut acc = one(guard);
    for (j, &c) in m.powers.iter().enumerate().skip(1) {
        if c == 0 {
            continue;
        }
        let l = params.ell(j as u32, guard);
        acc *= l.pow(c);
    }
    if m.sign == Sign::Neg {
        acc = -acc;
    }
    Ok(Float::with_val(width.bits(), acc))
}

/// Relative comparison with the rounding allowance: `a <= b (1 + 2^k)`.
pub fn le_with_allowance(a: &BigReal, b: &BigReal) -> bool {
    if a <= b {
        return true;
    }
    let slack = Float::with_val(b.prec(), b.abs_ref()) >> -ROUNDING_ALLOWANCE_LOG2;
    let lhs = Float::with_val(a.prec().max(b.prec()), a - b);
    lhs <= slack
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: &str, l: &str) -> CantorParams {
        CantorParams::parse(a, l).unwrap()
    }

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("1/4").unwrap(), Rational::from((1, 4)));
        assert_eq!(parse_rational("2.5").unwrap(), Rational::from((5, 2)));
        assert_eq!(parse_rational("1e-4").unwrap(), Rational::from((1, 10000)));
        assert_eq!(parse_rational("-3").unwrap(), Rational::from(-3));
        assert_eq!(parse_rational(".5").unwrap(), Rational::from((1, 2)));
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn required_bits_examples() {
        assert_eq!(required_bits(&params("2", "1/4"), 5, 128).unwrap().bits(), 192);
        assert_eq!(required_bits(&params("2", "1/4"), 0, 64).unwrap().bits(), 66);
        assert_eq!(required_bits(&params("3", "1/4"), 8, 128).unwrap().bits(), 13250);
    }

    #[test]
    fn required_bits_budget() {
        let err = required_bits(&params("3", "1/4"), 30, 128).unwrap_err();
        assert!(matches!(err, Error::PrecisionBudget { .. }));
    }

    #[test]
    fn width_floor_and_cap() {
        assert_eq!(Width::new(10).unwrap().bits(), 64);
        assert!(Width::new(MAX_WIDTH_BITS + 1).is_err());
    }

    #[test]
    fn thirds_sum_exactly() {
        for bits in [64u32, 128, 1024, 4096] {
            let t = Float::with_val(bits, 1) / 3u32;
            let s = Float::with_val(bits, &t + &t) + &t - 1u32;
            // correctly rounded thirds cancel on the final step
            assert!(s.is_zero() || s.abs() <= Float::with_val(bits, 1) >> (bits - 2));
        }
    }

    #[test]
    fn adaptive_converges_on_stable_input() {
        let r = adaptive_eval(|w| Ok(Float::with_val(w.bits(), 1) / 3u32), -64).unwrap();
        assert_eq!(r.width.bits(), 256);
        let again = Float::with_val(r.width.bits(), 1) / 3u32;
        assert_eq!(again, r.value);
    }

    #[test]
    fn adaptive_reports_instability() {
        let mut k = 0u32;
        let err = adaptive_eval(
            |w| {
                k += 1;
                Ok(Float::with_val(w.bits(), k))
            },
            -64,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
    }

    #[test]
    fn logmag_realisation() {
        let p = params("2", "1/4");
        let mut m = LogMag::one();
        m.add_power(1, 2);
        m.add_power(2, 1);
        let v = m.to_bigreal(&p, Width::work()).unwrap();
        assert_eq!(v, Float::with_val(64, 1) >> 8);
    }

    #[test]
    fn logmag_range_check() {
        let p = params("2", "1/4");
        let mut m = LogMag::one();
        m.add_power(40, 1);
        assert!(matches!(m.to_bigreal(&p, Width::work()), Err(Error::Range(_))));
    }

    #[test]
    fn exponent_weights_are_exact() {
        let p = params("5/2", "1/4");
        let w = ExponentWeights::new(&p, 6).unwrap();
        let m = LogMag::level(3);
        // alpha^2 = 25/4
        let e = m.exponent_scaled(&w).unwrap();
        assert_eq!(Rational::from((e, w.scale)), Rational::from((25, 4)));
    }
}

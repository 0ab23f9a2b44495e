//! Geometry of the Cantor-type set: level lengths, gaps, basic intervals,
//! exact endpoint algebra and evaluation grids.

use std::collections::BTreeMap;
use std::fmt;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::numerics::{format_rational, parse_rational, BigReal, Log2Inv, LogMag, Width};

/// A named hypothesis on `(alpha, ell1)` that some experiments require.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    Ell1AtMost(String),
    AlphaEquals(String),
    AlphaAtLeast(String),
    AlphaAbove(String),
    AlphaAtMost(String),
}

impl Constraint {
    fn bound(&self) -> Rational {
        let s = match self {
            Constraint::Ell1AtMost(s)
            | Constraint::AlphaEquals(s)
            | Constraint::AlphaAtLeast(s)
            | Constraint::AlphaAbove(s)
            | Constraint::AlphaAtMost(s) => s,
        };
        parse_rational(s).expect("constraint bounds are literals")
    }

    pub fn holds(&self, p: &CantorParams) -> bool {
        let b = self.bound();
        match self {
            Constraint::Ell1AtMost(_) => *p.ell1() <= b,
            Constraint::AlphaEquals(_) => *p.alpha() == b,
            Constraint::AlphaAtLeast(_) => *p.alpha() >= b,
            Constraint::AlphaAbove(_) => *p.alpha() > b,
            Constraint::AlphaAtMost(_) => *p.alpha() <= b,
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Ell1AtMost(b) => write!(f, "ell1 <= {b}"),
            Constraint::AlphaEquals(b) => write!(f, "alpha = {b}"),
            Constraint::AlphaAtLeast(b) => write!(f, "alpha >= {b}"),
            Constraint::AlphaAbove(b) => write!(f, "alpha > {b}"),
            Constraint::AlphaAtMost(b) => write!(f, "alpha <= {b}"),
        }
    }
}

/// Shape parameters: `ell_s = ell1^(alpha^(s-1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct CantorParams {
    alpha: Rational,
    ell1: Rational,
}

impl CantorParams {
    pub fn new(alpha: Rational, ell1: Rational) -> Result<Self> {
        if alpha <= 1 {
            return Err(param(format!("alpha must exceed 1, got {}", format_rational(&alpha))));
        }
        if ell1 <= 0 || ell1 >= Rational::from((1, 2)) {
            return Err(param(format!(
                "ell1 must lie in (0, 1/2), got {}",
                format_rational(&ell1)
            )));
        }
        let p = CantorParams { alpha, ell1 };
        if !p.two_ell_pow_below_one() {
            return Err(param(format!(
                "2 * ell1^(alpha-1) < 1 fails for alpha = {}, ell1 = {}",
                p.alpha_str(),
                p.ell1_str()
            )));
        }
        Ok(p)
    }

    pub fn parse(alpha: &str, ell1: &str) -> Result<Self> {
        Self::new(parse_rational(alpha)?, parse_rational(ell1)?)
    }

    fn two_ell_pow_below_one(&self) -> bool {
        let e = Rational::from(&self.alpha - 1u32);
        if *e.denom() == 1 {
            if let Some(k) = e.numer().to_u32() {
                let v = Rational::from(self.ell1.clone().pow(k as i32)) * 2u32;
                return v < 1;
            }
        }
        // (alpha-1) ln ell1 + ln 2 < 0
        let w = 256;
        let lhs = Float::with_val(w, &e) * Float::with_val(w, &self.ell1).ln()
            + Float::with_val(w, 2).ln();
        lhs < 0
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn ell1(&self) -> &Rational {
        &self.ell1
    }

    pub fn alpha_str(&self) -> String {
        format_rational(&self.alpha)
    }

    pub fn ell1_str(&self) -> String {
        format_rational(&self.ell1)
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.to_f64()
    }

    pub fn alpha_is_integer(&self) -> bool {
        *self.alpha.denom() == 1
    }

    /// `alpha^k` exactly.
    pub fn alpha_pow(&self, k: u32) -> Rational {
        Rational::from((&self.alpha).pow(k as i32))
    }

    pub fn log2_inv_ell1(&self) -> Log2Inv {
        if *self.ell1.numer() == 1 && self.ell1.denom().is_power_of_two() {
            Log2Inv::Exact(self.ell1.denom().significant_bits() - 1)
        } else {
            let w = 256;
            Log2Inv::Approx(Float::with_val(w, &self.ell1).recip().log2())
        }
    }

    pub fn log2_inv_ell1_f64(&self) -> f64 {
        -self.ell1.to_f64().log2()
    }

    /// `ell_j` at `width`, correctly rounded for integer `alpha`.
    pub fn ell(&self, j: u32, width: Width) -> BigReal {
        if j == 0 {
            return Float::with_val(width.bits(), 1);
        }
        if self.alpha_is_integer() {
            if let Some(a) = self.alpha.numer().to_u32() {
                let e = Integer::from(a).pow(j - 1);
                if let Some(e) = e.to_u32() {
                    let num = Integer::from(self.ell1.numer().pow(e));
                    let den = Integer::from(self.ell1.denom().pow(e));
                    return Float::with_val(width.bits(), Rational::from((num, den)));
                }
            }
        }
        let apow = self.alpha_pow(j - 1);
        let scale = apow.to_f64() * self.log2_inv_ell1_f64();
        let guard = width.bits() + 64 + scale.max(2.0).log2().ceil() as u32;
        let e = Float::with_val(guard, &apow) * Float::with_val(guard, &self.ell1).ln();
        Float::with_val(width.bits(), e.exp())
    }

    /// Fails with the named hypothesis when any constraint does not hold.
    pub fn require(&self, statement: &str, constraints: &[Constraint]) -> Result<()> {
        for c in constraints {
            if !c.holds(self) {
                return Err(Error::Hypothesis {
                    requirement: format!(
                        "{statement} requires {c} (alpha = {}, ell1 = {})",
                        self.alpha_str(),
                        self.ell1_str()
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Level lengths and gaps realised at a fixed width.
#[derive(Clone, Debug)]
pub struct LevelData {
    pub params: CantorParams,
    pub depth: u32,
    pub width: Width,
    ell: Vec<BigReal>,
    gaps: Vec<BigReal>,
}

/// Builds `ell_0..ell_depth` and `h_0..h_{depth-1}` at `width`.
pub fn build_levels(params: &CantorParams, depth: u32, width: Width) -> Result<LevelData> {
    let ell: Vec<BigReal> = (0..=depth).map(|j| params.ell(j, width)).collect();
    let gaps: Vec<BigReal> = (0..depth as usize)
        .map(|s| {
            Float::with_val(width.bits(), &ell[s] - Float::with_val(width.bits(), &ell[s + 1] * 2u32))
        })
        .collect();
    if let Some(s) = gaps.iter().position(|h| *h <= 0) {
        return Err(param(format!("gap h_{s} is not positive")));
    }
    Ok(LevelData {
        params: params.clone(),
        depth,
        width,
        ell,
        gaps,
    })
}

impl LevelData {
    /// Levels up to `depth` at the width that resolves them.
    pub fn for_depth(params: &CantorParams, depth: u32, headroom: u32) -> Result<Self> {
        let w = crate::numerics::required_bits(params, depth, headroom)?;
        build_levels(params, depth, w)
    }

    /// Same set at another width.
    pub fn with_width(&self, width: Width) -> Result<Self> {
        if width == self.width {
            return Ok(self.clone());
        }
        build_levels(&self.params, self.depth, width)
    }

    pub fn ell(&self, s: u32) -> Result<&BigReal> {
        self.ell.get(s as usize).ok_or(Error::LevelOutOfRange {
            level: s,
            depth: self.depth,
        })
    }

    pub fn gap(&self, s: u32) -> Result<&BigReal> {
        self.gaps.get(s as usize).ok_or(Error::LevelOutOfRange {
            level: s,
            depth: self.depth,
        })
    }

    pub fn ell_logmag(&self, s: u32) -> LogMag {
        LogMag::level(s as usize)
    }

    /// `h_s / ell_s` for `s < depth`.
    pub fn gap_ratios(&self) -> Vec<BigReal> {
        self.gaps
            .iter()
            .zip(&self.ell)
            .map(|(h, l)| Float::with_val(self.width.bits(), h / l))
            .collect()
    }

    pub fn h0(&self) -> &BigReal {
        &self.gaps[0]
    }
}

/// Exact real `sum_j c_j ell_j` with `ell_0 = 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointExpr {
    coeffs: BTreeMap<u32, i64>,
}

impl PointExpr {
    pub fn zero() -> Self {
        PointExpr::default()
    }

    pub fn one() -> Self {
        PointExpr::level(0)
    }

    pub fn level(j: u32) -> Self {
        let mut p = PointExpr::zero();
        p.add_term(j, 1);
        p
    }

    pub fn from_terms(terms: &[(u32, i64)]) -> Self {
        let mut p = PointExpr::zero();
        for &(j, c) in terms {
            p.add_term(j, c);
        }
        p
    }

    pub fn add_term(&mut self, j: u32, c: i64) {
        if c == 0 {
            return;
        }
        let e = self.coeffs.entry(j).or_insert(0);
        *e += c;
        if *e == 0 {
            self.coeffs.remove(&j);
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<u32, i64> {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_level(&self) -> u32 {
        self.coeffs.keys().next_back().copied().unwrap_or(0)
    }

    pub fn sub(&self, other: &PointExpr) -> PointExpr {
        let mut r = self.clone();
        for (&j, &c) in &other.coeffs {
            r.add_term(j, -c);
        }
        r
    }

    pub fn add(&self, other: &PointExpr) -> PointExpr {
        let mut r = self.clone();
        for (&j, &c) in &other.coeffs {
            r.add_term(j, c);
        }
        r
    }
}

impl fmt::Display for PointExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&j, &c) in &self.coeffs {
            let mag = c.unsigned_abs();
            let body = match (j, mag) {
                (0, m) => m.to_string(),
                (_, 1) => format!("l{j}"),
                (_, m) => format!("{m}*l{j}"),
            };
            match (first, c < 0) {
                (true, true) => write!(f, "-{body}")?,
                (true, false) => write!(f, "{body}")?,
                (false, true) => write!(f, " - {body}")?,
                (false, false) => write!(f, " + {body}")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl Serialize for PointExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `sum_j c_j ell_j` at `width`.
pub fn eval_point(x: &PointExpr, levels: &LevelData, width: Width) -> Result<BigReal> {
    if x.max_level() > levels.depth {
        return Err(Error::LevelOutOfRange {
            level: x.max_level(),
            depth: levels.depth,
        });
    }
    let guard = width.bits().max(levels.width.bits()) + 64;
    let mut acc = Float::new(guard);
    for (&j, &c) in x.coeffs() {
        acc += Float::with_val(guard, &levels.ell[j as usize] * c);
    }
    Ok(Float::with_val(width.bits(), acc))
}

/// Binary address of an endpoint: the basic interval of level `prefix_len`
/// selected by the bits of `prefix` (most significant first) and the side.
/// Canonical form: the last prefix bit differs from `right`, so `prefix_len`
/// is the type level of the point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Address {
    pub prefix: u64,
    pub prefix_len: u32,
    pub right: bool,
}

impl Address {
    pub fn new(prefix: u64, prefix_len: u32, right: bool) -> Self {
        let mut a = Address {
            prefix,
            prefix_len,
            right,
        };
        while a.prefix_len > 0 && ((a.prefix & 1) == 1) == a.right {
            a.prefix >>= 1;
            a.prefix_len -= 1;
        }
        a
    }

    pub fn type_level(&self) -> u32 {
        self.prefix_len
    }

    /// 0-based index of the level-`t` basic interval containing the point.
    pub fn index_at(&self, t: u32) -> u64 {
        if t <= self.prefix_len {
            self.prefix >> (self.prefix_len - t)
        } else {
            let shift = t - self.prefix_len;
            let base = self.prefix << shift;
            if self.right {
                base | ((1u64 << shift) - 1)
            } else {
                base
            }
        }
    }

    /// Length of the common address prefix with `other`, capped at `cap`.
    pub fn common_depth(&self, other: &Address, cap: u32) -> u32 {
        let a = self.index_at(cap);
        let b = other.index_at(cap);
        let x = a ^ b;
        if x == 0 {
            cap
        } else {
            cap - (64 - x.leading_zeros())
        }
    }

    pub fn to_point(&self) -> PointExpr {
        let mut p = PointExpr::zero();
        for t in 1..=self.prefix_len {
            let bit = (self.prefix >> (self.prefix_len - t)) & 1;
            if bit == 1 {
                p.add_term(t - 1, 1);
                p.add_term(t, -1);
            }
        }
        if self.right {
            p.add_term(self.prefix_len, 1);
        }
        p
    }
}

/// `I_{j,s}` with exact endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasicInterval {
    pub j: u64,
    pub s: u32,
    pub a: PointExpr,
    pub b: PointExpr,
}

/// The `j`-th (1-based) basic interval of level `s`.
pub fn basic_interval(j: u64, s: u32, levels: &LevelData) -> Result<BasicInterval> {
    if s > levels.depth {
        return Err(Error::LevelOutOfRange {
            level: s,
            depth: levels.depth,
        });
    }
    if s >= 63 || j == 0 || j > 1u64 << s {
        return Err(Error::IndexOutOfRange(format!("interval {j} at level {s}")));
    }
    let left = Address::new(j - 1, s, false).to_point();
    let right = Address::new(j - 1, s, true).to_point();
    Ok(BasicInterval { j, s, a: left, b: right })
}

/// All endpoints of level-`depth` intervals in ascending order.
#[derive(Clone, Debug)]
pub struct Grid {
    pub depth: u32,
    pub points: Vec<PointExpr>,
    pub addresses: Vec<Address>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self, levels: &LevelData) -> Result<Vec<BigReal>> {
        self.points
            .iter()
            .map(|p| eval_point(p, levels, levels.width))
            .collect()
    }
}

pub fn grid(levels: &LevelData, depth: u32) -> Result<Grid> {
    if depth > levels.depth || depth > 40 {
        return Err(Error::LevelOutOfRange {
            level: depth,
            depth: levels.depth,
        });
    }
    let mut points = Vec::with_capacity(2usize << depth);
    let mut addresses = Vec::with_capacity(2usize << depth);
    for j in 0..(1u64 << depth) {
        for right in [false, true] {
            let a = Address::new(j, depth, right);
            points.push(a.to_point());
            addresses.push(a);
        }
    }
    Ok(Grid {
        depth,
        points,
        addresses,
    })
}

/// Chain of 1-based interval indices `(j, level)` from level `s` to 0
/// containing `x`, decided numerically from exact differences.
pub fn locate_chain(x: &PointExpr, levels: &LevelData, s: u32) -> Result<Vec<(u64, u32)>> {
    if s > levels.depth || s >= 63 {
        return Err(Error::LevelOutOfRange {
            level: s,
            depth: levels.depth,
        });
    }
    let w = levels.width;
    let sign_of = |e: &PointExpr| -> Result<std::cmp::Ordering> {
        if e.is_zero() {
            return Ok(std::cmp::Ordering::Equal);
        }
        let v = eval_point(e, levels, w)?;
        Ok(v.cmp0().expect("finite"))
    };
    let mut a = PointExpr::zero();
    let mut idx: u64 = 0;
    let outside = || Error::NotInSet(format!("{x} at depth {s}"));
    if sign_of(&x.sub(&a))? == std::cmp::Ordering::Less
        || sign_of(&x.sub(&PointExpr::one()))? == std::cmp::Ordering::Greater
    {
        return Err(outside());
    }
    for t in 0..s {
        // left child [a, a + ell_{t+1}], right child [a + ell_t - ell_{t+1}, a + ell_t]
        let left_end = a.add(&PointExpr::level(t + 1));
        let mut right_start = a.add(&PointExpr::level(t));
        right_start.add_term(t + 1, -1);
        if sign_of(&x.sub(&left_end))? != std::cmp::Ordering::Greater {
            idx <<= 1;
        } else if sign_of(&x.sub(&right_start))? != std::cmp::Ordering::Less {
            idx = (idx << 1) | 1;
            a = right_start;
        } else {
            return Err(outside());
        }
    }
    Ok((0..=s).rev().map(|t| ((idx >> (s - t)) + 1, t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(depth: u32) -> LevelData {
        let p = CantorParams::parse("2", "1/4").unwrap();
        LevelData::for_depth(&p, depth, 128).unwrap()
    }

    fn val(x: &PointExpr, l: &LevelData) -> f64 {
        eval_point(x, l, l.width).unwrap().to_f64()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(CantorParams::parse("1", "1/4").is_err());
        assert!(CantorParams::parse("2", "1/2").is_err());
        // 2 * (0.45)^(1.1 - 1) >= 1
        assert!(CantorParams::parse("1.1", "0.45").is_err());
        assert!(CantorParams::parse("5/2", "1/4").is_ok());
    }

    #[test]
    fn constraint_names_failure() {
        let p = CantorParams::parse("2", "1/3").unwrap();
        let err = p
            .require("Jackson bound", &[Constraint::Ell1AtMost("1/4".into())])
            .unwrap_err();
        assert!(err.to_string().contains("ell1 <= 1/4"));
    }

    #[test]
    fn levels_and_gaps() {
        let l = lv(4);
        assert_eq!(l.ell(2).unwrap().to_f64(), 1.0 / 16.0);
        assert_eq!(l.ell(3).unwrap().to_f64(), 1.0 / 256.0);
        assert_eq!(l.gap(0).unwrap().to_f64(), 0.5);
        assert_eq!(l.gap(1).unwrap().to_f64(), 0.125);
        assert_eq!(l.gap(2).unwrap().to_f64(), 7.0 / 128.0);
        let r = l.gap_ratios();
        assert_eq!(r[0].to_f64(), 0.5);
        assert_eq!(r[1].to_f64(), 0.5);
        assert_eq!(r[2].to_f64(), 0.875);
        assert!(r.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn non_integer_alpha_levels() {
        let p = CantorParams::parse("5/2", "1/4").unwrap();
        let l = LevelData::for_depth(&p, 4, 128).unwrap();
        let want = 0.25f64.powf(2.5);
        assert!((l.ell(2).unwrap().to_f64() - want).abs() < 1e-15);
        let r = l.gap_ratios();
        assert!(r.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn point_evaluation() {
        let l = lv(3);
        assert_eq!(val(&PointExpr::from_terms(&[(0, 1), (1, -1)]), &l), 0.75);
        assert_eq!(val(&PointExpr::level(2), &l), 1.0 / 16.0);
        assert_eq!(val(&PointExpr::from_terms(&[(0, 1), (1, -1), (2, 1)]), &l), 13.0 / 16.0);
        assert!(eval_point(&PointExpr::level(9), &l, l.width).is_err());
    }

    #[test]
    fn canonical_form() {
        let mut p = PointExpr::level(1);
        p.add_term(1, -1);
        assert!(p.is_zero());
        assert_eq!(p, PointExpr::zero());
    }

    #[test]
    fn basic_intervals() {
        let l = lv(3);
        let i = basic_interval(1, 0, &l).unwrap();
        assert_eq!((val(&i.a, &l), val(&i.b, &l)), (0.0, 1.0));
        let i = basic_interval(2, 1, &l).unwrap();
        assert_eq!((val(&i.a, &l), val(&i.b, &l)), (0.75, 1.0));
        let i = basic_interval(3, 2, &l).unwrap();
        assert_eq!((val(&i.a, &l), val(&i.b, &l)), (0.75, 13.0 / 16.0));
        assert!(basic_interval(5, 2, &l).is_err());
        assert!(basic_interval(0, 2, &l).is_err());
    }

    #[test]
    fn interval_lengths_are_exact() {
        let l = lv(6);
        for s in 0..=6 {
            for j in 1..=(1u64 << s) {
                let i = basic_interval(j, s, &l).unwrap();
                assert_eq!(i.b.sub(&i.a), PointExpr::level(s));
            }
        }
    }

    #[test]
    fn grids() {
        let l = lv(3);
        let g0 = grid(&l, 0).unwrap();
        assert_eq!(g0.points, vec![PointExpr::zero(), PointExpr::one()]);
        let g1 = grid(&l, 1).unwrap();
        let v: Vec<f64> = g1.points.iter().map(|p| val(p, &l)).collect();
        assert_eq!(v, vec![0.0, 0.25, 0.75, 1.0]);
        let g2 = grid(&l, 2).unwrap();
        assert_eq!(g2.len(), 8);
        assert_eq!(val(&g2.points[3], &l), 0.25);
    }

    #[test]
    fn grids_ascend_and_chains_nest() {
        let l = lv(10);
        for d in 0..=10 {
            let g = grid(&l, d).unwrap();
            let v = g.values(&l).unwrap();
            assert!(v.windows(2).all(|w| w[0] < w[1]), "depth {d}");
            if d <= 6 {
                for (p, a) in g.points.iter().zip(&g.addresses) {
                    let chain = locate_chain(p, &l, d).unwrap();
                    for (j, t) in &chain {
                        assert_eq!(j - 1, a.index_at(*t));
                    }
                }
            }
        }
    }

    #[test]
    fn chains() {
        let l = lv(3);
        assert_eq!(
            locate_chain(&PointExpr::zero(), &l, 2).unwrap(),
            vec![(1, 2), (1, 1), (1, 0)]
        );
        assert_eq!(
            locate_chain(&PointExpr::one(), &l, 2).unwrap(),
            vec![(4, 2), (2, 1), (1, 0)]
        );
        let x = PointExpr::from_terms(&[(0, 1), (1, -1), (2, 1)]);
        assert_eq!(locate_chain(&x, &l, 2).unwrap(), vec![(3, 2), (2, 1), (1, 0)]);
        // 1/2 lies in the first gap
        let half = PointExpr::from_terms(&[(1, 2)]);
        assert!(matches!(locate_chain(&half, &l, 1), Err(Error::NotInSet(_))));
    }

    #[test]
    fn address_indices() {
        // x = ell_1 - ell_2: prefix 01 right-tail-free -> left endpoint of I_{2,2}
        let a = Address::new(0b01, 2, false);
        assert_eq!(a.to_point(), PointExpr::from_terms(&[(1, 1), (2, -1)]));
        assert_eq!(a.index_at(4), 0b0100);
        let b = Address::new(0b0, 1, true);
        assert_eq!(b.index_at(3), 0b011);
        assert_eq!(Address::new(0b011, 3, true), b);
    }
}

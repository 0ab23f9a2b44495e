//! Node ordering by increasing type, its uniform distribution, and the
//! exponent combinatorics of the products bounding `|omega_N|`.

use serde::Serialize;

use crate::cantor::{locate_chain, Address, CantorParams, LevelData, PointExpr};
use crate::error::{Error, Result};
use crate::numerics::{ExponentWeights, LogMag};
use crate::report::{Check, Relation, Report, ReportKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct NodeMeta {
    /// `k` with `x in X_k`: the level at which the point first appears.
    pub type_level: u32,
    /// 0-based index of the node this one was derived from.
    pub origin: Option<usize>,
    #[serde(skip)]
    pub address: Address,
}

/// `x_1, x_2, ...` stored 0-based.
#[derive(Clone, Debug, Default)]
pub struct NodeSeq {
    pub points: Vec<PointExpr>,
    pub meta: Vec<NodeMeta>,
}

impl NodeSeq {
    /// First `n` nodes, symbolic.
    pub fn first(n: usize) -> NodeSeq {
        let mut seq = NodeSeq {
            points: Vec::with_capacity(n),
            meta: Vec::with_capacity(n),
        };
        for i in 1..=n {
            seq.push_next(i);
        }
        seq
    }

    fn push_next(&mut self, i: usize) {
        if i <= 2 {
            let right = i == 2;
            let a = Address::new(0, 0, right);
            self.points.push(a.to_point());
            self.meta.push(NodeMeta {
                type_level: 0,
                origin: None,
                address: a,
            });
            return;
        }
        // i = 2^k + j with 1 <= j <= 2^k
        let k = usize::BITS - 1 - (i - 1).leading_zeros();
        let j = i - (1 << k);
        let plus = (i - 1).count_ones() % 2 == 1;
        let src = self.meta[j - 1].address;
        assert_eq!(plus, !src.right, "sign rule disagrees with endpoint side");
        let a = Address::new(src.index_at(k), k, plus);
        let mut p = self.points[j - 1].clone();
        p.add_term(k, if plus { 1 } else { -1 });
        debug_assert_eq!(p, a.to_point());
        self.points.push(p);
        self.meta.push(NodeMeta {
            type_level: k,
            origin: Some(j - 1),
            address: a,
        });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_type(&self) -> u32 {
        self.meta.iter().map(|m| m.type_level).max().unwrap_or(0)
    }

    pub fn prefix(&self, n: usize) -> NodeSeq {
        NodeSeq {
            points: self.points[..n].to_vec(),
            meta: self.meta[..n].to_vec(),
        }
    }

    /// Builds a sequence from arbitrary endpoints (not necessarily in
    /// rule order), locating each one at level `depth`.
    pub fn from_points(points: Vec<PointExpr>, levels: &LevelData, depth: u32) -> Result<NodeSeq> {
        let mut meta = Vec::with_capacity(points.len());
        for p in &points {
            let chain = locate_chain(p, levels, depth)?;
            let idx = chain[0].0 - 1;
            // an endpoint of type <= depth is the left or right end of its interval
            let left = Address::new(idx, depth, false);
            let right = Address::new(idx, depth, true);
            let address = if left.to_point() == *p {
                left
            } else if right.to_point() == *p {
                right
            } else {
                return Err(Error::NotInSet(format!("{p} is not an endpoint of level {depth}")));
            };
            meta.push(NodeMeta {
                type_level: address.type_level(),
                origin: None,
                address,
            });
        }
        Ok(NodeSeq { points, meta })
    }
}

/// Levels needed to realise the first `n` nodes.
pub fn node_levels_needed(n: usize) -> u32 {
    if n <= 2 {
        0
    } else {
        usize::BITS - 1 - (n - 1).leading_zeros()
    }
}

/// First `n` nodes; fails when `levels` cannot realise them.
pub fn enumerate_nodes(n: usize, levels: &LevelData) -> Result<NodeSeq> {
    if n == 0 {
        return Err(Error::Parameter("node count must be positive".into()));
    }
    let need = node_levels_needed(n);
    if need > levels.depth {
        return Err(Error::LevelOutOfRange {
            level: need,
            depth: levels.depth,
        });
    }
    Ok(NodeSeq::first(n))
}

/// Exponents of `m` in binary, strictly decreasing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BinaryDecomp {
    pub exponents: Vec<u32>,
}

impl BinaryDecomp {
    pub fn top(&self) -> u32 {
        self.exponents[0]
    }

    /// Number of terms after the top one.
    pub fn m(&self) -> usize {
        self.exponents.len() - 1
    }
}

pub fn binary_decomp(m: u64) -> BinaryDecomp {
    assert!(m > 0, "binary decomposition of zero");
    let exponents = (0..64u32).rev().filter(|b| (m >> b) & 1 == 1).collect();
    BinaryDecomp { exponents }
}

/// `x_{N+2}` in closed form: `ell_{s_m} - ell_{s_{m-1}} + ... +- ell_{s_0}`
/// from the binary decomposition of `N+1`.
pub fn next_node(n_big: u64) -> PointExpr {
    let d = binary_decomp(n_big + 1);
    let mut p = PointExpr::zero();
    for (i, &e) in d.exponents.iter().rev().enumerate() {
        p.add_term(e, if i % 2 == 0 { 1 } else { -1 });
    }
    p
}

/// Interval counts at one level, with a histogram for O(1) spread updates.
struct LevelCounts {
    counts: Vec<u32>,
    hist: Vec<u32>,
    min: u32,
    max: u32,
}

impl LevelCounts {
    fn new(level: u32) -> Self {
        let n = 1usize << level;
        LevelCounts {
            counts: vec![0; n],
            hist: vec![n as u32],
            min: 0,
            max: 0,
        }
    }

    fn add(&mut self, idx: usize) {
        let c = self.counts[idx] as usize;
        self.counts[idx] += 1;
        self.hist[c] -= 1;
        if self.hist.len() <= c + 1 {
            self.hist.push(0);
        }
        self.hist[c + 1] += 1;
        self.max = self.max.max(c as u32 + 1);
        while self.hist[self.min as usize] == 0 {
            self.min += 1;
        }
    }
}

/// `floor(log2 n)`.
fn uniform_levels(n: usize) -> u32 {
    if n == 0 {
        0
    } else {
        usize::BITS - 1 - n.leading_zeros()
    }
}

/// Deepest level the uniformity condition needs to look at: below one level
/// past the largest type, distinct endpoints sit in distinct intervals.
fn spread_top(z: &NodeSeq) -> u32 {
    uniform_levels(z.len()).max(z.max_type() + 1)
}

/// Per-level count spreads `max_i m_{i,k} - min_i m_{i,k}`; deeper levels
/// hold at most one point per interval.
pub fn level_spreads(z: &NodeSeq) -> Vec<(u32, u32, u32)> {
    let top = spread_top(z);
    (0..=top)
        .map(|k| {
            let mut c = LevelCounts::new(k);
            for m in &z.meta {
                c.add(m.address.index_at(k) as usize);
            }
            (k, c.min, c.max)
        })
        .collect()
}

/// Exact uniform-distribution check of `Z` over the basic intervals of every
/// level.
pub fn check_uniform(z: &NodeSeq, params: &CantorParams) -> Report {
    let mut r = Report::new(
        "uniform-distribution",
        "node counts in basic intervals of one level differ by at most one",
        ReportKind::Assertion,
        params,
    );
    r.param("points", z.len() as u64);
    for (k, min, max) in level_spreads(z) {
        let spread = max - min;
        r.push(
            Check::exact(
                format!("level {k}: max count - min count"),
                spread.to_string(),
                Relation::Le,
                "1",
                spread <= 1,
                None,
            )
            .n(z.len() as u64),
        );
    }
    r
}

/// Checks every prefix of `z` incrementally; returns the length of the first
/// prefix that is not uniformly distributed.
pub fn first_nonuniform_prefix(z: &NodeSeq) -> Option<usize> {
    let top = spread_top(z);
    let mut levels: Vec<LevelCounts> = (0..=top).map(LevelCounts::new).collect();
    for (i, m) in z.meta.iter().enumerate() {
        for (k, lc) in levels.iter_mut().enumerate() {
            lc.add(m.address.index_at(k as u32) as usize);
        }
        if levels.iter().any(|lc| lc.max - lc.min > 1) {
            return Some(i + 1);
        }
    }
    None
}

/// Multiplicities of `ell_j` indexed by level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeVector {
    pub degrees: Vec<u64>,
}

impl DegreeVector {
    pub fn zeros(top: u32) -> Self {
        DegreeVector {
            degrees: vec![0; top as usize + 1],
        }
    }

    pub fn total(&self) -> u64 {
        self.degrees.iter().sum()
    }

    pub fn top(&self) -> u32 {
        self.degrees.len() as u32 - 1
    }

    pub fn product(&self) -> LogMag {
        LogMag::from_degrees(&self.degrees)
    }

    /// Factor levels sorted deepest first.
    pub fn rho(&self) -> RhoProfile {
        let mut levels = Vec::with_capacity(self.total() as usize);
        for (j, &c) in self.degrees.iter().enumerate().rev() {
            levels.extend(std::iter::repeat(j as u32).take(c as usize));
        }
        RhoProfile { levels }
    }

    /// `sum_{j >= i} degrees[j]` for each `i`.
    pub fn tail_sums(&self) -> Vec<u64> {
        let mut out = vec![0; self.degrees.len()];
        let mut acc = 0;
        for j in (0..self.degrees.len()).rev() {
            acc += self.degrees[j];
            out[j] = acc;
        }
        out
    }
}

/// `rho_1 <= rho_2 <= ...` recorded as the level of each factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RhoProfile {
    pub levels: Vec<u32>,
}

impl RhoProfile {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `rho_{from+1} ... rho_{to}` (1-based, inclusive of `to`).
    pub fn range_product(&self, from: usize, to: usize) -> LogMag {
        let mut m = LogMag::one();
        for &l in &self.levels[from..to] {
            m.add_power(l as usize, 1);
        }
        m
    }

    pub fn full(&self) -> LogMag {
        self.range_product(0, self.levels.len())
    }
}

/// `lambda_j(n)`: a block of size `2^t` in the decomposition of `n`
/// contributes `ell_t ell_{t-1} ell_{t-2}^2 ... ell_0^{2^{t-1}}`.
pub fn lambda_profile(n: u64) -> (DegreeVector, RhoProfile) {
    let d = binary_decomp(n);
    let mut deg = DegreeVector::zeros(d.top());
    for &t in &d.exponents {
        deg.degrees[t as usize] += 1;
        for i in 1..=t {
            deg.degrees[(t - i) as usize] += 1u64 << (i - 1);
        }
    }
    let rho = deg.rho();
    (deg, rho)
}

/// `floor(log2 |Z|)`, the chain depth used for the profiles of `Z`.
pub fn profile_level(z_len: usize) -> u32 {
    uniform_levels(z_len)
}

fn separation_degrees(anchor: &Address, k: usize, z: &NodeSeq, s: u32) -> DegreeVector {
    let mut deg = DegreeVector::zeros(s);
    for (i, m) in z.meta.iter().enumerate() {
        if i == k {
            continue;
        }
        deg.degrees[m.address.common_depth(anchor, s) as usize] += 1;
    }
    deg
}

/// `mu_n`: nodes other than `x_k` (0-based `k`) whose chain separates from the
/// chain of `x_k` exactly at level `n`; `mu_s` counts those sharing
/// `x_k`'s level-`s` interval.
pub fn mu_profile(k: usize, z: &NodeSeq) -> Result<DegreeVector> {
    if k >= z.len() {
        return Err(Error::IndexOutOfRange(format!("node {k} of {}", z.len())));
    }
    let s = profile_level(z.len());
    Ok(separation_degrees(&z.meta[k].address, k, z, s))
}

/// `nu_n`: as `mu_profile` with the chain of the point `x` instead.
pub fn nu_profile(x: &PointExpr, k: usize, z: &NodeSeq, levels: &LevelData) -> Result<DegreeVector> {
    if k >= z.len() {
        return Err(Error::IndexOutOfRange(format!("node {k} of {}", z.len())));
    }
    let s = profile_level(z.len());
    let chain = locate_chain(x, levels, s)?;
    let anchor = Address::new(chain[0].0 - 1, s, false);
    // every point of a level-s interval shares its first s address bits
    let mut deg = DegreeVector::zeros(s);
    for (i, m) in z.meta.iter().enumerate() {
        if i == k {
            continue;
        }
        deg.degrees[m.address.common_depth(&anchor, s) as usize] += 1;
    }
    Ok(deg)
}

/// Product of the `p` smallest factors.
pub fn p_smallest(profile: &RhoProfile, p: usize) -> Result<LogMag> {
    if p > profile.len() {
        return Err(Error::IndexOutOfRange(format!("p = {p} of {}", profile.len())));
    }
    Ok(profile.range_product(0, p))
}

/// Product without its `p` smallest factors.
pub fn p_removed(profile: &RhoProfile, p: usize) -> Result<LogMag> {
    if p > profile.len() {
        return Err(Error::IndexOutOfRange(format!("p = {p} of {}", profile.len())));
    }
    Ok(profile.range_product(p, profile.len()))
}

/// Exponent of the `p` smallest factors of `deg`, scaled.
pub fn smallest_exponent(deg: &[u64], p: u64, w: &[i128]) -> i128 {
    let mut left = p;
    let mut e = 0i128;
    for j in (0..deg.len()).rev() {
        if left == 0 {
            break;
        }
        let take = deg[j].min(left);
        e += take as i128 * w[j];
        left -= take;
    }
    e
}

/// `(min, max)` over integer `p` in `[0, p_max]` of
/// `E_a(p) - E_b(p)`, where `E_d(p)` is the scaled exponent of the `p`
/// smallest factors. Both sides are piecewise linear in `p` with breaks at
/// cumulative counts, so visiting the merged breaks is exhaustive.
pub fn smallest_exponent_gap(a: &[u64], b: &[u64], w: &[i128], p_max: u64) -> (i128, i128) {
    let mut ia = a.len();
    let mut ib = b.len();
    let mut ra = 0u64;
    let mut rb = 0u64;
    let mut p = 0u64;
    let mut d = 0i128;
    let (mut lo, mut hi) = (0i128, 0i128);
    while p < p_max {
        while ra == 0 && ia > 0 {
            ia -= 1;
            ra = a[ia];
        }
        while rb == 0 && ib > 0 {
            ib -= 1;
            rb = b[ib];
        }
        if ra == 0 || rb == 0 {
            // one side ran out of factors; callers keep p_max within both
            break;
        }
        let step = ra.min(rb).min(p_max - p);
        d += step as i128 * (w[ia] - w[ib]);
        p += step;
        ra -= step;
        rb -= step;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Worst slacks of the exponent inequalities for one `N`, in scaled exponent
/// units (counts for the partial-sum inequalities). Nonnegative means the
/// inequality holds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExponentSlacks {
    pub n: u64,
    /// `sum_{j>=i} mu_j <= sum_{j>=i} lambda_j`.
    pub mu_vs_lambda_tails: i64,
    /// `p` smallest of `lambda` no larger than `p` smallest of `mu`.
    pub smallest_lambda_vs_mu: i128,
    /// `lambda` without `p` smallest no larger than `mu` without `p` smallest.
    pub removed_lambda_vs_mu: i128,
    /// `nu` without `p` smallest no larger than `mu` without `p` smallest.
    pub removed_nu_vs_mu: i128,
    /// `sum_{j>=i} mu_j <= sum_{j>=i} nu_j`.
    pub mu_vs_nu_tails: i64,
    /// Pairs of level-`s` intervals (point, node) examined.
    pub pairs: u64,
}

impl ExponentSlacks {
    pub fn all_hold(&self) -> bool {
        self.mu_vs_lambda_tails >= 0
            && self.smallest_lambda_vs_mu >= 0
            && self.removed_lambda_vs_mu >= 0
            && self.removed_nu_vs_mu >= 0
            && self.mu_vs_nu_tails >= 0
    }
}

/// Checks the exponent inequalities among the `lambda`, `mu` and `nu`
/// profiles of the first `N+1` nodes for every node `x_k`, every point `x`
/// of the set and every `p <= N`, exactly.
///
/// `nu` depends on `x` only through its level-`s` interval, so points are
/// enumerated by interval; this covers every grid point of any depth.
pub fn exponent_slacks(n_big: u64, z: &NodeSeq, weights: &ExponentWeights) -> Result<ExponentSlacks> {
    let n_pts = n_big as usize + 1;
    if z.len() < n_pts {
        return Err(Error::IndexOutOfRange(format!("need {n_pts} nodes")));
    }
    let s = profile_level(n_pts);
    if weights.max_level() < s as usize {
        return Err(Error::Range(format!("exponent weights stop below level {s}")));
    }
    let w: Vec<i128> = (0..=s as usize).map(|j| weights.weight(j)).collect::<Result<_>>()?;
    // counts[t][i]: nodes in the i-th level-t interval
    let counts: Vec<Vec<u64>> = (0..=s)
        .map(|t| {
            let mut c = vec![0u64; 1 << t];
            for m in &z.meta[..n_pts] {
                c[m.address.index_at(t) as usize] += 1;
            }
            c
        })
        .collect();
    let n_int = 1usize << s;
    let base: Vec<Vec<u64>> = (0..n_int)
        .map(|i| {
            let mut d = vec![0u64; s as usize + 1];
            for n in 0..s {
                let sib = (i >> (s - n - 1)) ^ 1;
                d[n as usize] = counts[(n + 1) as usize][sib];
            }
            d[s as usize] = counts[s as usize][i];
            d
        })
        .collect();
    let (lambda, _) = lambda_profile(n_pts as u64);
    let lam_tails = lambda.tail_sums();
    let lam_total: i128 = lambda
        .degrees
        .iter()
        .zip(&w)
        .map(|(&c, &wj)| c as i128 * wj)
        .sum();

    let mut out = ExponentSlacks {
        n: n_big,
        mu_vs_lambda_tails: i64::MAX,
        smallest_lambda_vs_mu: i128::MAX,
        removed_lambda_vs_mu: i128::MAX,
        removed_nu_vs_mu: i128::MAX,
        mu_vs_nu_tails: i64::MAX,
        pairs: 0,
    };
    let total = |d: &[u64]| -> i128 { d.iter().zip(&w).map(|(&c, &wj)| c as i128 * wj).sum() };
    let tails = |d: &[u64]| -> Vec<i64> {
        let mut acc = 0i64;
        let mut t = vec![0i64; d.len()];
        for j in (0..d.len()).rev() {
            acc += d[j] as i64;
            t[j] = acc;
        }
        t
    };

    let mut nu = vec![0u64; s as usize + 1];
    for ik in 0..n_int {
        if counts[s as usize][ik] == 0 {
            continue;
        }
        let mut mu = base[ik].clone();
        mu[s as usize] -= 1;
        let mu_total = total(&mu);
        let mu_tails = tails(&mu);
        for (mt, lt) in mu_tails.iter().zip(&lam_tails) {
            out.mu_vs_lambda_tails = out.mu_vs_lambda_tails.min(*lt as i64 - mt);
        }
        let (lo, hi) = smallest_exponent_gap(&lambda.degrees, &mu, &w, n_big);
        out.smallest_lambda_vs_mu = out.smallest_lambda_vs_mu.min(lo);
        // (tot_l - E_l(p)) - (tot_m - E_m(p)) = (tot_l - tot_m) - gap(p)
        out.removed_lambda_vs_mu = out.removed_lambda_vs_mu.min(lam_total - mu_total - hi);

        for (ix, bx) in base.iter().enumerate() {
            let x = (ix ^ ik) as u64;
            let sep = if x == 0 { s } else { s - (64 - x.leading_zeros()) };
            nu.copy_from_slice(bx);
            nu[sep as usize] -= 1;
            let nu_total = total(&nu);
            let (_, hi) = smallest_exponent_gap(&nu, &mu, &w, n_big);
            out.removed_nu_vs_mu = out.removed_nu_vs_mu.min(nu_total - mu_total - hi);
            let mut acc_nu = 0i64;
            let mut acc_mu = 0i64;
            for j in (0..=s as usize).rev() {
                acc_nu += nu[j] as i64;
                acc_mu += mu[j] as i64;
                out.mu_vs_nu_tails = out.mu_vs_nu_tails.min(acc_nu - acc_mu);
            }
            out.pairs += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::eval_point;

    fn lv(depth: u32) -> LevelData {
        let p = CantorParams::parse("2", "1/4").unwrap();
        LevelData::for_depth(&p, depth, 128).unwrap()
    }

    #[test]
    fn first_eight_nodes() {
        let l = lv(3);
        let z = enumerate_nodes(8, &l).unwrap();
        let v: Vec<f64> = z
            .points
            .iter()
            .map(|p| eval_point(p, &l, l.width).unwrap().to_f64())
            .collect();
        assert_eq!(
            v,
            vec![0.0, 1.0, 0.25, 0.75, 1.0 / 16.0, 15.0 / 16.0, 3.0 / 16.0, 13.0 / 16.0]
        );
        // x_6 = x_2 - l2, x_5 = x_1 + l2
        assert_eq!(z.meta[5].origin, Some(1));
        assert_eq!(z.points[5], z.points[1].sub(&PointExpr::level(2)));
        assert_eq!(z.meta[4].origin, Some(0));
        assert_eq!(z.points[4], PointExpr::level(2));
        assert_eq!(z.meta[7].type_level, 2);
    }

    #[test]
    fn enumeration_checks_levels() {
        let l = lv(2);
        assert!(enumerate_nodes(9, &l).is_err());
        assert!(enumerate_nodes(8, &l).is_ok());
    }

    #[test]
    fn next_node_examples() {
        let z = NodeSeq::first(9);
        // N+1 = 4, 5, 6, 7
        assert_eq!(next_node(3), PointExpr::level(2));
        assert_eq!(next_node(4), PointExpr::from_terms(&[(0, 1), (2, -1)]));
        assert_eq!(next_node(5), PointExpr::from_terms(&[(1, 1), (2, -1)]));
        assert_eq!(next_node(6), PointExpr::from_terms(&[(0, 1), (1, -1), (2, 1)]));
        for n in 0..=7u64 {
            assert_eq!(next_node(n), z.points[n as usize + 1]);
        }
    }

    #[test]
    fn decompositions() {
        assert_eq!(binary_decomp(7).exponents, vec![2, 1, 0]);
        assert_eq!(binary_decomp(1024).exponents, vec![10]);
        assert_eq!(binary_decomp(1027).exponents, vec![10, 1, 0]);
    }

    #[test]
    fn uniformity() {
        let p = CantorParams::parse("2", "1/4").unwrap();
        let z4 = NodeSeq::first(4);
        assert_eq!(level_spreads(&z4)[1], (1, 2, 2));
        assert!(check_uniform(&z4, &p).pass);
        let z5 = NodeSeq::first(5);
        let l = lv(3);
        let c: Vec<u64> = (0..2)
            .map(|i| z5.meta.iter().filter(|m| m.address.index_at(1) == i).count() as u64)
            .collect();
        assert_eq!(c, vec![3, 2]);
        assert!(check_uniform(&z5, &p).pass);
        let bad = NodeSeq::from_points(
            vec![PointExpr::zero(), PointExpr::level(1), PointExpr::level(2)],
            &l,
            3,
        )
        .unwrap();
        assert_eq!(level_spreads(&bad)[1], (1, 0, 3));
        assert!(!check_uniform(&bad, &p).pass);
        assert_eq!(first_nonuniform_prefix(&bad), Some(2));
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_profile(4).0.degrees, vec![2, 1, 1]);
        assert_eq!(lambda_profile(6).1.levels, vec![2, 1, 1, 0, 0, 0]);
        assert_eq!(lambda_profile(7).0.degrees, vec![4, 2, 1]);
        for n in 1..=300u64 {
            let (d, rho) = lambda_profile(n);
            assert_eq!(d.total(), n);
            assert_eq!(rho.len() as u64, n);
            let r = d.top() as usize;
            assert_eq!(d.degrees[r], 1);
            for j in 0..r {
                let lo = 1u64 << (r - j - 1);
                let hi = 1u64 << (r - j);
                assert!(lo <= d.degrees[j] && d.degrees[j] <= hi, "n={n} j={j}");
            }
        }
    }

    #[test]
    fn mu_examples() {
        let z4 = NodeSeq::first(4);
        assert_eq!(mu_profile(0, &z4).unwrap().degrees, vec![2, 1, 0]);
        let z8 = NodeSeq::first(8);
        assert_eq!(mu_profile(0, &z8).unwrap().degrees, vec![4, 2, 1, 0]);
        let l = lv(4);
        for k in 0..8 {
            let nu = nu_profile(&z8.points[k], k, &z8, &l).unwrap();
            assert_eq!(nu, mu_profile(k, &z8).unwrap());
            assert_eq!(nu.total(), 7);
        }
    }

    #[test]
    fn p_products() {
        let rho = lambda_profile(4).1;
        assert_eq!(p_smallest(&rho, 0).unwrap(), LogMag::one());
        let mut want = LogMag::level(2);
        want.add_power(1, 1);
        assert_eq!(p_smallest(&rho, 2).unwrap(), want);
        assert_eq!(p_removed(&rho, 4).unwrap(), LogMag::one());
        assert!(p_smallest(&rho, 5).is_err());
        for p in 0..=4 {
            let prod = p_smallest(&rho, p).unwrap().mul(&p_removed(&rho, p).unwrap());
            assert_eq!(prod, rho.full());
        }
    }

    #[test]
    fn breakpoint_walk_matches_brute_force() {
        let p = CantorParams::parse("5/2", "1/4").unwrap();
        let w = ExponentWeights::new(&p, 5).unwrap();
        let wv: Vec<i128> = (0..=5).map(|j| w.weight(j).unwrap()).collect();
        let a = [3u64, 0, 2, 1, 1, 1];
        let b = [1u64, 4, 1, 0, 2, 0];
        let pm = 8;
        let brute: Vec<i128> = (0..=pm)
            .map(|p| smallest_exponent(&a, p, &wv) - smallest_exponent(&b, p, &wv))
            .collect();
        let (lo, hi) = smallest_exponent_gap(&a, &b, &wv, pm);
        assert_eq!(lo, *brute.iter().min().unwrap());
        assert_eq!(hi, *brute.iter().max().unwrap());
    }

    #[test]
    fn exponent_inequalities_small() {
        let p = CantorParams::parse("2", "1/4").unwrap();
        let w = ExponentWeights::new(&p, 8).unwrap();
        let z = NodeSeq::first(130);
        for n in 0..129u64 {
            let sl = exponent_slacks(n, &z, &w).unwrap();
            assert!(sl.all_hold(), "{sl:?}");
        }
    }
}

//! Desk-scale numeric checks of the node-polynomial inequalities: product
//! bounds, the Lagrange numerator maximum, Lebesgue constants, Markov factors,
//! the non-Leja example, the Leja trend for `alpha > 2`, and the lower bound on
//! high derivatives of `omega_{N+1}` at the origin.

use std::collections::BTreeMap;

use rug::ops::Pow;
use rug::Float;
use serde_json::json;

use crate::cantor::{eval_point, grid, CantorParams, Constraint, LevelData, PointExpr};
use crate::error::{param, Error, Result};
use crate::nodes::{
    exponent_slacks, lambda_profile, mu_profile, node_levels_needed, p_removed, p_smallest, profile_level, NodeSeq,
};
use crate::numerics::{fmt_big, logmag_to_bigreal, one, BigReal, ExponentWeights, LogMag, Width};
use crate::polyops::{diff, lagrange_scan, omega_grid_max, omega_grid_max_all, product_derivs, realize};
use crate::report::{Check, Relation, Report, ReportKind};

/// Grid depth used when none is given: two levels below the profile level.
pub fn default_grid_depth(points: usize) -> u32 {
    profile_level(points) + 2
}

/// Realised levels, nodes and grid shared by the checks at one `N`.
pub struct Setup {
    pub levels: LevelData,
    pub z: NodeSeq,
    pub nodes: Vec<BigReal>,
    pub grid: Vec<BigReal>,
    pub grid_depth: u32,
    pub work: Width,
}

impl Setup {
    /// `n_nodes` nodes (plus `extra` following ones realised) and the grid at
    /// `grid_depth`.
    pub fn new(params: &CantorParams, n_nodes: usize, extra: usize, grid_depth: u32) -> Result<Setup> {
        let depth = node_levels_needed(n_nodes + extra).max(grid_depth).max(1);
        let levels = LevelData::for_depth(params, depth, 128)?;
        let z = NodeSeq::first(n_nodes + extra);
        let nodes = realize(&z.points, &levels)?;
        let grid = grid(&levels, grid_depth)?.values(&levels)?;
        Ok(Setup {
            levels,
            z,
            nodes,
            grid,
            grid_depth,
            work: Width::work(),
        })
    }

    fn real(&self, m: &LogMag) -> Result<BigReal> {
        logmag_to_bigreal(m, &self.levels.params, self.work)
    }

    fn h0_pow(&self, e: i64) -> BigReal {
        let h0 = Float::with_val(self.work.bits(), self.levels.h0());
        Float::with_val(self.work.bits(), (&h0).pow(e as i32))
    }
}

/// Asserted check with the smallest margin, failures first.
fn worst_of(checks: Vec<Check>) -> Option<Check> {
    checks.into_iter().min_by(|a, b| {
        let ma = a.margin_log2.unwrap_or(f64::INFINITY);
        let mb = b.margin_log2.unwrap_or(f64::INFINITY);
        (a.pass, ma).partial_cmp(&(b.pass, mb)).unwrap_or(std::cmp::Ordering::Equal)
    })
}

fn labelled(mut c: Check, k: usize) -> Check {
    c.label = format!("{} (worst k = {})", c.label, k + 1);
    c
}

fn base_report(id: &str, description: &str, params: &CantorParams, setup: &Setup, n_big: usize) -> Report {
    let mut r = Report::new(id, description, ReportKind::Assertion, params);
    r.param("N", n_big as u64);
    r.width_bits = setup.levels.width.bits();
    r.grid_depth = Some(setup.grid_depth);
    r
}

/// Reports of the product-bound, numerator-maximum and Lebesgue checks at
/// one `N`, sharing a single grid scan.
pub struct ScanReports {
    pub pi: Report,
    pub lemma: Report,
    pub lebesgue: Report,
}

/// Runs the product bounds, the numerator maximum and the Lebesgue bound for
/// the first `N+1` nodes.
pub fn scan_checks(params: &CantorParams, n_big: usize, grid_depth: Option<u32>) -> Result<ScanReports> {
    let n_pts = n_big + 1;
    let depth = grid_depth.unwrap_or_else(|| default_grid_depth(n_pts));
    let st = Setup::new(params, n_pts, 1, depth)?;
    let nodes = &st.nodes[..n_pts];
    let w = st.work;
    let scan = lagrange_scan(nodes, &st.grid, w)?;
    let z = st.z.prefix(n_pts);

    let (lambda, _) = lambda_profile(n_pts as u64);
    let lam = st.real(&lambda.product())?;

    let mut pi = base_report(
        "node-product-bounds",
        "|omega_{N+1}| on the set against the profile product, at the next node, and |a_k(x_k)| against the mu-profile",
        params,
        &st,
        n_big,
    );
    pi.push(Check::real("max |omega_{N+1}| on grid <= profile product", &scan.omega_max, Relation::Le, &lam).n(n_big as u64));
    let mut at_next = one(w);
    for r in nodes {
        at_next *= diff(&st.nodes[n_pts], r, w);
    }
    let at_next = at_next.abs();
    let lo = Float::with_val(w.bits(), st.h0_pow(n_pts as i64) * &lam);
    pi.push(Check::real("|omega_{N+1}(x_{N+2})| >= h0^{N+1} * profile product", &at_next, Relation::Ge, &lo).n(n_big as u64));
    pi.push(Check::real("|omega_{N+1}(x_{N+2})| <= profile product", &at_next, Relation::Le, &lam).n(n_big as u64));
    let h0n = st.h0_pow(n_big as i64);
    let mut lower = Vec::with_capacity(n_pts);
    let mut upper = Vec::with_capacity(n_pts);
    for (k, ak) in scan.numerators.iter().enumerate() {
        let mu = st.real(&mu_profile(k, &z)?.product())?;
        let lo = Float::with_val(w.bits(), &h0n * &mu);
        lower.push(labelled(Check::real("|a_k(x_k)| >= h0^N * mu product", ak, Relation::Ge, &lo), k).n(n_big as u64));
        upper.push(labelled(Check::real("|a_k(x_k)| <= mu product", ak, Relation::Le, &mu), k).n(n_big as u64));
    }
    pi.push(worst_of(lower).expect("nonempty"));
    pi.push(worst_of(upper).expect("nonempty"));

    let mut lemma = base_report(
        "numerator-max",
        "max of |a_k| on the set is at most h0^{-N} |a_k(x_k)|",
        params,
        &st,
        n_big,
    );
    let bound = st.h0_pow(-(n_big as i64));
    let per_k: Vec<Check> = scan
        .ratio_max
        .iter()
        .enumerate()
        .map(|(k, r)| labelled(Check::real("max |a_k| / |a_k(x_k)| <= h0^{-N}", r, Relation::Le, &bound), k).n(n_big as u64))
        .collect();
    lemma.push(worst_of(per_k).expect("nonempty"));

    let mut leb = base_report(
        "lebesgue-bound",
        "grid Lebesgue constant (a lower estimate of the sup) is at most h0^{-N} (N+1)",
        params,
        &st,
        n_big,
    );
    let lb = Float::with_val(w.bits(), &bound * n_pts as u32);
    leb.push(Check::real("grid Lebesgue constant <= h0^{-N} (N+1)", &scan.lebesgue, Relation::Le, &lb).n(n_big as u64));
    leb.datum("lebesgue_grid", fmt_big(&scan.lebesgue));

    Ok(ScanReports {
        pi,
        lemma,
        lebesgue: leb,
    })
}

pub fn verify_pi_bounds(params: &CantorParams, n_big: usize, grid_depth: Option<u32>) -> Result<Report> {
    Ok(scan_checks(params, n_big, grid_depth)?.pi)
}

pub fn verify_lemma_max(params: &CantorParams, n_big: usize, grid_depth: Option<u32>) -> Result<Report> {
    Ok(scan_checks(params, n_big, grid_depth)?.lemma)
}

pub fn verify_lebesgue(params: &CantorParams, n_big: usize, grid_depth: Option<u32>) -> Result<Report> {
    Ok(scan_checks(params, n_big, grid_depth)?.lebesgue)
}

/// `h0^{-N} (N+1) N^p / (rho_1 ... rho_p)` with the profile of `N+1`.
pub fn markov_upper(n_big: u64, p: u64, levels: &LevelData) -> Result<BigReal> {
    let w = Width::new(levels.width.bits().max(crate::numerics::WORK_BITS))?;
    let (_, rho) = lambda_profile(n_big + 1);
    let small = logmag_to_bigreal(&p_smallest(&rho, p as usize)?, &levels.params, w)?;
    let h0 = Float::with_val(w.bits(), levels.h0());
    let mut v = Float::with_val(w.bits(), (&h0).pow(-(n_big as i64) as i32));
    v *= n_big + 1;
    v *= Float::with_val(w.bits(), n_big).pow(p as u32);
    Ok(v / small)
}

/// `|omega_N^{(p)}(0)| / max |omega_N|` for `N = 2^s` between
/// `h0^{N-p} / (rho_1 ... rho_p)` and the Markov factor bound.
pub fn verify_markov(params: &CantorParams, s: u32, p: usize, grid_depth: Option<u32>) -> Result<Report> {
    if s == 0 || s > 20 {
        return Err(param(format!("s = {s} out of range")));
    }
    let n = 1usize << s;
    if p == 0 || p >= n {
        return Err(param(format!("need 1 <= p < N = {n}, got p = {p}")));
    }
    let depth = grid_depth.unwrap_or(s + 2);
    let st = Setup::new(params, n, 0, depth)?;
    let w = st.work;
    let d = product_derivs(&st.nodes, &Float::new(w.bits()), p, w);
    let deriv = Float::with_val(w.bits(), d.values[p].abs_ref());
    let sup = omega_grid_max(&st.nodes, &st.grid, w);
    if sup.is_zero() {
        return Err(Error::Consistency("grid maximum of |omega_N| is zero".into()));
    }
    let ratio = Float::with_val(w.bits(), &deriv / &sup);
    let (_, rho_n) = lambda_profile(n as u64);
    let small = st.real(&p_smallest(&rho_n, p)?)?;
    let lower = Float::with_val(w.bits(), st.h0_pow((n - p) as i64) / &small);
    let upper = markov_upper(n as u64, p as u64, &st.levels)?;
    let mut r = base_report(
        "markov-factor",
        "|omega_N^{(p)}(0)| / max |omega_N| (a lower estimate of the Markov factor) between the two profile bounds",
        params,
        &st,
        n,
    );
    r.param("p", p as u64);
    r.param("s", s);
    r.push(Check::real("ratio >= h0^{N-p} / (rho_1...rho_p)", &ratio, Relation::Ge, &lower).n(n as u64).p(p as u64));
    r.push(Check::real("ratio <= h0^{-N} (N+1) N^p / (rho_1...rho_p)", &ratio, Relation::Le, &upper).n(n as u64).p(p as u64));
    r.push(Check::real("lower bound <= upper bound", &lower, Relation::Le, &upper).n(n as u64).p(p as u64));
    r.datum("ratio", fmt_big(&ratio));
    r.datum("grid_max_omega", fmt_big(&sup));
    Ok(r)
}

/// `sigma` of the non-Leja example at `ell_1`, `ell_2`.
pub fn not_leja_sigma(l1: &BigReal, l2: &BigReal) -> BigReal {
    let b = l1.prec().max(l2.prec());
    let a = Float::with_val(b, 1 - Float::with_val(b, l1))
        / Float::with_val(b, 1 - Float::with_val(b, l1 * 2u32));
    let c = Float::with_val(b, 1 - Float::with_val(b, l1 * 2u32)) + l2;
    let c = c / Float::with_val(b, 1 - Float::with_val(b, l1));
    let e = Float::with_val(b, 1 - Float::with_val(b, l2));
    let e = e / (Float::with_val(b, 1 + Float::with_val(b, l1)) - Float::with_val(b, l2 * 2u32));
    a * c * e
}

/// For each `s`: the numerator ratio at `x_k = ell_1 - ell_s` against
/// `y = ell_2 - ell_s` for the first `2^s + 2` nodes.
pub fn verify_not_leja(params: &CantorParams, s_list: &[u32]) -> Result<Report> {
    params.require(
        "not-leja",
        &[
            Constraint::AlphaEquals("2".into()),
            Constraint::Ell1AtMost("1/4".into()),
        ],
    )?;
    if s_list.iter().any(|&s| !(4..=16).contains(&s)) {
        return Err(param("s must lie in 4..=16"));
    }
    let s_max = *s_list.iter().max().ok_or_else(|| param("empty s list"))?;
    let levels = LevelData::for_depth(params, s_max, 128)?;
    let w = Width::work();
    let l1 = Float::with_val(w.bits(), levels.ell(1)?);
    let l2 = Float::with_val(w.bits(), levels.ell(2)?);
    let sigma = not_leja_sigma(&l1, &l2);
    let sigma1 = Float::with_val(w.bits(), &sigma + 1u32) / 2u32;
    let m = Float::with_val(w.bits(), 2u32) / (Float::with_val(w.bits(), &l1 * (1 - Float::with_val(w.bits(), &l2))));
    let mut r = Report::new(
        "not-leja",
        "numerator ratio at the node x_{N+1} against the competitor point y; non-Leja inequality",
        ReportKind::Assertion,
        params,
    );
    r.width_bits = levels.width.bits();
    r.datum("sigma", fmt_big(&sigma));
    r.datum("sigma1", fmt_big(&sigma1));
    r.datum("M", fmt_big(&m));
    r.push(Check::real("sigma < 1", &sigma, Relation::Lt, &one(w)));
    let mut first_poly: Option<u32> = None;
    let mut rows = Vec::new();
    for &s in s_list {
        let n = (1usize << s) + 2;
        let z = NodeSeq::first(n + 1);
        let xk_expr = PointExpr::from_terms(&[(1, 1), (s, -1)]);
        if z.points[n] != xk_expr {
            return Err(Error::Consistency(format!("x_{} is {}, expected {xk_expr}", n + 1, z.points[n])));
        }
        let y_expr = PointExpr::from_terms(&[(2, 1), (s, -1)]);
        let nodes = realize(&z.points[..n], &levels)?;
        let xk = eval_point(&xk_expr, &levels, levels.width)?;
        let y = eval_point(&y_expr, &levels, levels.width)?;
        let mut ax = one(w);
        let mut ay = one(w);
        for t in &nodes {
            ax *= diff(&xk, t, w);
            ay *= diff(&y, t, w);
        }
        let ratio = Float::with_val(w.bits(), ax.abs_ref()) / Float::with_val(w.bits(), ay.abs_ref());
        let bound = Float::with_val(w.bits(), &m * Float::with_val(w.bits(), (&sigma1).pow(1u32 << (s - 2))));
        r.push(Check::real("|a_k(x_k)| / |a_k(y)| < M sigma1^{2^{s-2}}", &ratio, Relation::Lt, &bound).n(n as u64));
        r.push(Check::real("|omega_N(x_{N+1})| < |omega_N(y)|", &ratio, Relation::Lt, &one(w)).n(n as u64));
        let poly = Float::with_val(w.bits(), &ratio * Float::with_val(w.bits(), n as u32).pow(5u32));
        let c = Check::real("N^5 |a_k(x_k)| < |a_k(y)|", &poly, Relation::Lt, &one(w)).n(n as u64).finding();
        if c.pass && first_poly.is_none() {
            first_poly = Some(s);
        }
        r.push(c);
        rows.push(json!({"s": s, "N": n, "ratio": fmt_big(&ratio), "bound": fmt_big(&bound)}));
    }
    r.datum("rows", serde_json::Value::Array(rows));
    r.datum("first_s_with_n5_inequality", first_poly.map_or(serde_json::Value::Null, |s| json!(s)));
    Ok(r)
}

/// Whether each next node maximises `|omega_n|` over the grid, `n <= n_max`.
pub fn verify_leja_trend(params: &CantorParams, n_max: usize, grid_depth: Option<u32>) -> Result<Report> {
    if n_max == 0 {
        return Err(param("n_max must be positive"));
    }
    let need = node_levels_needed(n_max + 1);
    let depth = grid_depth.unwrap_or(need + 2).max(need);
    let st = Setup::new(params, n_max + 1, 0, depth)?;
    let w = st.work;
    let maxes = omega_grid_max_all(&st.nodes, n_max, &st.grid, w);
    let mut r = Report::new(
        "leja-trend",
        "|omega_n(x_{n+1})| against the grid maximum of |omega_n|",
        ReportKind::Finding,
        params,
    );
    r.param("n_max", n_max as u64);
    r.width_bits = st.levels.width.bits();
    r.grid_depth = Some(depth);
    let mut violations = Vec::new();
    for n in 1..=n_max {
        let mut v = one(w);
        for t in &st.nodes[..n] {
            v *= diff(&st.nodes[n], t, w);
        }
        let v = v.abs();
        let c = Check::real("|omega_n(x_{n+1})| >= grid max |omega_n|", &v, Relation::Ge, &maxes[n]).n(n as u64);
        if !c.pass {
            violations.push(n as u64);
        }
        r.push(c);
    }
    r.datum("violations", json!(violations));
    Ok(r)
}

/// `|omega_{N+1}^{(q)}(0)| >= h0^{N+1-q} rho_q ... rho_{N+1}` with
/// `q = 2^w + 1 < N + 1`, and the sharper intermediate bound built from the
/// profile of `a_1`.
pub fn verify_qqq(params: &CantorParams, n_big: usize, q: usize) -> Result<Report> {
    let n_pts = n_big + 1;
    if q < 2 || !(q - 1).is_power_of_two() || q >= n_pts {
        return Err(param(format!("need q = 2^w + 1 < N + 1, got q = {q}, N = {n_big}")));
    }
    let st = Setup::new(params, n_pts, 0, node_levels_needed(n_pts).max(1))?;
    let w = st.work;
    let d = product_derivs(&st.nodes, &Float::new(w.bits()), q, w);
    let v = Float::with_val(w.bits(), d.values[q].abs_ref());
    let (_, rho) = lambda_profile(n_pts as u64);
    let tail = st.real(&p_removed(&rho, q - 1)?)?;
    let h = st.h0_pow((n_pts - q) as i64);
    let bound = Float::with_val(w.bits(), &h * &tail);
    let mu = mu_profile(0, &st.z)?;
    let mu_tail = st.real(&p_removed(&mu.rho(), q - 1)?)?;
    let witness = Float::with_val(w.bits(), &h * &mu_tail);
    let mut r = base_report(
        "origin-derivative-lower",
        "|omega_{N+1}^{(q)}(0)| against h0^{N+1-q} times the profile without its q-1 smallest factors",
        params,
        &st,
        n_big,
    );
    r.param("q", q as u64);
    r.push(Check::real("|omega^{(q)}(0)| >= h0^{N+1-q} rho_q...rho_{N+1}", &v, Relation::Ge, &bound).n(n_big as u64).q(q as u64));
    r.push(Check::real("|omega^{(q)}(0)| >= h0^{N+1-q} (a_1 profile without q-1 smallest)", &v, Relation::Ge, &witness).n(n_big as u64).q(q as u64));
    Ok(r)
}

/// Exact exponent inequalities between the `lambda`, `mu` and `nu` profiles
/// for `N+1` in `range`.
pub fn verify_exponents(params: &CantorParams, n_plus_1: std::ops::RangeInclusive<usize>) -> Result<Report> {
    let top = *n_plus_1.end();
    if *n_plus_1.start() < 2 {
        return Err(param("N+1 must start at 2"));
    }
    let z = NodeSeq::first(top);
    let weights = ExponentWeights::new(params, profile_level(top) as usize)?;
    let mut r = Report::new(
        "profile-exponents",
        "exponent inequalities between the node-product profiles, in exact arithmetic",
        ReportKind::Assertion,
        params,
    );
    r.param("N+1 from", *n_plus_1.start() as u64);
    r.param("N+1 to", top as u64);
    let mut worst: BTreeMap<&str, (i128, u64)> = BTreeMap::new();
    let mut pairs = 0u64;
    for m in n_plus_1 {
        let sl = exponent_slacks((m - 1) as u64, &z, &weights)?;
        pairs += sl.pairs;
        for (name, v) in [
            ("mu tails <= lambda tails", sl.mu_vs_lambda_tails as i128),
            ("p smallest of lambda <= p smallest of mu", sl.smallest_lambda_vs_mu),
            ("lambda without p smallest <= mu without p smallest", sl.removed_lambda_vs_mu),
            ("nu without p smallest <= mu without p smallest", sl.removed_nu_vs_mu),
            ("mu tails <= nu tails", sl.mu_vs_nu_tails as i128),
        ] {
            let e = worst.entry(name).or_insert((i128::MAX, 0));
            if v < e.0 {
                *e = (v, sl.n);
            }
        }
    }
    for (name, (slack, n)) in worst {
        r.push(Check::exact(
            format!("{name}: smallest slack"),
            slack.to_string(),
            Relation::Ge,
            "0",
            slack >= 0,
            None,
        )
        .n(n));
    }
    r.datum("pairs", pairs);
    r.note("exponents compared as exact integers scaled by the denominator of alpha");
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> CantorParams {
        CantorParams::parse("2", "1/4").unwrap()
    }

    #[test]
    fn small_scan_passes() {
        for n in 1..=8 {
            let s = scan_checks(&p2(), n, None).unwrap();
            assert!(s.pi.pass, "{n}: {:?}", s.pi.failures().collect::<Vec<_>>());
            assert!(s.lemma.pass);
            assert!(s.lebesgue.pass);
        }
    }

    #[test]
    fn two_node_numerator_example() {
        // x_1 = 0: max |x - 1| over the set is 1; bound 2
        let s = scan_checks(&p2(), 1, Some(4)).unwrap();
        assert!(s.lemma.pass);
        let leb = scan_checks(&p2(), 0, Some(3)).unwrap().lebesgue;
        let v: f64 = leb.checks[0].computed.parse().unwrap();
        assert!((v - 1.0).abs() < 1e-20);
    }

    #[test]
    fn markov_small() {
        let r = verify_markov(&p2(), 2, 1, None).unwrap();
        assert!(r.pass, "{:?}", r.checks);
        let r = verify_markov(&p2(), 4, 2, None).unwrap();
        assert!(r.pass, "{:?}", r.checks);
    }

    #[test]
    fn sigma_at_quarter() {
        let w = 128;
        let l1 = Float::with_val(w, 0.25);
        let l2 = Float::with_val(w, 0.0625);
        let s = not_leja_sigma(&l1, &l2);
        assert_eq!(s, Float::with_val(w, 0.9375));
    }

    #[test]
    fn qqq_small() {
        let r = verify_qqq(&p2(), 7, 3).unwrap();
        assert!(r.pass, "{:?}", r.checks);
        assert!(verify_qqq(&p2(), 3, 4).is_err());
    }
}

//! Test functions with exact derivatives, estimates of the best uniform
//! approximation on the set, Whitney seminorms, and the Jackson-type checks.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rug::ops::Pow;
use rug::{Float, Rational};

use crate::cantor::{build_levels, grid, CantorParams, Constraint, LevelData, PointExpr};
use crate::error::{param, Error, Result};
use crate::nodes::{lambda_profile, node_levels_needed, p_smallest, NodeSeq};
use crate::numerics::{
    fmt_big, format_rational, logmag_to_bigreal, one, parse_rational, required_bits, zero,
    AdaptiveEval, BigReal, Width,
};
use crate::polyops::{diff, divided_differences, omega_grid_max_all, product_derivs, realize};
use crate::report::{Check, Relation, Report, ReportKind};

#[derive(Clone)]
enum Kind {
    Exp(Rational),
    Sin(Rational),
    /// Ascending coefficients.
    Poly(Vec<Rational>),
    /// `1 / (x + a)`, `a > 0`.
    Recip(Rational),
    NodePoly(NodePoly),
}

#[derive(Clone)]
struct NodePoly {
    m: usize,
    roots: Vec<PointExpr>,
    params: CantorParams,
    min_width: Width,
    cache: Arc<Mutex<HashMap<u32, Arc<Vec<BigReal>>>>>,
}

impl NodePoly {
    fn roots_at(&self, bits: u32) -> Result<Arc<Vec<BigReal>>> {
        let bits = bits.max(self.min_width.bits());
        if let Some(r) = self.cache.lock().expect("cache lock").get(&bits) {
            return Ok(r.clone());
        }
        let depth = node_levels_needed(self.m.max(1));
        let levels = build_levels(&self.params, depth, Width::new(bits)?)?;
        let r = Arc::new(realize(&self.roots, &levels)?);
        self.cache.lock().expect("cache lock").insert(bits, r.clone());
        Ok(r)
    }
}

/// A smooth function with closed-form derivatives of every order and
/// bounds `B_k >= sup_{[0,1]} |f^{(k)}|`.
#[derive(Clone)]
pub struct JetFn {
    id: String,
    kind: Kind,
}

impl fmt::Debug for JetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetFn({})", self.id)
    }
}

impl JetFn {
    pub fn id(&self) -> &str {
        &self.id
    }

    /// `exp(c x)`.
    pub fn exp(c: Rational) -> JetFn {
        let id = if c == 1 { "exp".to_string() } else { format!("exp:{}", format_rational(&c)) };
        JetFn { id, kind: Kind::Exp(c) }
    }

    /// `sin(c x)`.
    pub fn sin(c: Rational) -> JetFn {
        JetFn {
            id: format!("sin:{}", format_rational(&c)),
            kind: Kind::Sin(c),
        }
    }

    /// `sum_i coeffs[i] x^i`.
    pub fn poly(mut coeffs: Vec<Rational>) -> JetFn {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| *c == 0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Rational::new());
        }
        let id = format!(
            "poly:{}",
            coeffs.iter().map(format_rational).collect::<Vec<_>>().join(",")
        );
        JetFn { id, kind: Kind::Poly(coeffs) }
    }

    /// `1 / (x + a)`, `a > 0`.
    pub fn recip(a: Rational) -> Result<JetFn> {
        if a <= 0 {
            return Err(param("recip shift must be positive"));
        }
        Ok(JetFn {
            id: format!("recip:{}", format_rational(&a)),
            kind: Kind::Recip(a),
        })
    }

    /// `omega_m`, the node polynomial of the first `m` nodes.
    pub fn node_poly(m: usize, params: &CantorParams) -> Result<JetFn> {
        let z = NodeSeq::first(m);
        let depth = node_levels_needed(m.max(1));
        Ok(JetFn {
            id: format!("omega:{m}"),
            kind: Kind::NodePoly(NodePoly {
                m,
                roots: z.points,
                params: params.clone(),
                min_width: required_bits(params, depth, 64)?,
                cache: Arc::new(Mutex::new(HashMap::new())),
            }),
        })
    }

    /// `exp`, `exp:c`, `sin:c`, `poly:a0,a1,...`, `recip:a`, `omega:m`.
    pub fn parse(spec: &str, params: &CantorParams) -> Result<JetFn> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec.trim(), None),
        };
        let rat = |a: Option<&str>, default: i32| -> Result<Rational> {
            match a {
                Some(t) => parse_rational(t),
                None => Ok(Rational::from(default)),
            }
        };
        match name {
            "exp" => Ok(JetFn::exp(rat(arg, 1)?)),
            "sin" => Ok(JetFn::sin(rat(arg, 1)?)),
            "recip" => JetFn::recip(rat(arg, 2)?),
            "poly" => {
                let a = arg.ok_or_else(|| param("poly needs coefficients"))?;
                let coeffs = a.split(',').map(parse_rational).collect::<Result<Vec<_>>>()?;
                Ok(JetFn::poly(coeffs))
            }
            "omega" => {
                let m: usize = arg
                    .ok_or_else(|| param("omega needs a node count"))?
                    .parse()
                    .map_err(|_| param(format!("bad node count in {spec:?}")))?;
                JetFn::node_poly(m, params)
            }
            _ => Err(param(format!("unknown function {spec:?}"))),
        }
    }

    /// Polynomial degree, when `f` is a polynomial.
    pub fn degree(&self) -> Option<usize> {
        match &self.kind {
            Kind::Poly(c) => Some(if c.len() == 1 && c[0] == 0 { 0 } else { c.len() - 1 }),
            Kind::NodePoly(p) => Some(p.m),
            _ => None,
        }
    }

    /// `f(x)`.
    pub fn value(&self, x: &BigReal, width: Width) -> Result<BigReal> {
        Ok(self.derivs(x, 0, width)?.swap_remove(0))
    }

    /// `f(x), f'(x), ..., f^{(k_max)}(x)`.
    pub fn derivs(&self, x: &BigReal, k_max: usize, width: Width) -> Result<Vec<BigReal>> {
        let b = width.bits();
        match &self.kind {
            Kind::Exp(c) => {
                let cf = Float::with_val(b + 32, c);
                let e = Float::with_val(b + 32, &cf * x).exp();
                let mut out = Vec::with_capacity(k_max + 1);
                let mut ck = Float::with_val(b + 32, 1);
                for _ in 0..=k_max {
                    out.push(Float::with_val(b, &e * &ck));
                    ck *= &cf;
                }
                Ok(out)
            }
            Kind::Sin(c) => {
                let cf = Float::with_val(b + 32, c);
                let (s, co) = Float::with_val(b + 32, &cf * x).sin_cos(Float::new(b + 32));
                let mut out = Vec::with_capacity(k_max + 1);
                let mut ck = Float::with_val(b + 32, 1);
                for j in 0..=k_max {
                    let t = match j % 4 {
                        0 => s.clone(),
                        1 => co.clone(),
                        2 => -s.clone(),
                        _ => -co.clone(),
                    };
                    out.push(Float::with_val(b, t * &ck));
                    ck *= &cf;
                }
                Ok(out)
            }
            Kind::Poly(coeffs) => {
                let mut out = Vec::with_capacity(k_max + 1);
                for j in 0..=k_max {
                    let mut acc = zero(width);
                    for i in (j..coeffs.len()).rev() {
                        acc *= x;
                        acc += Float::with_val(b, &coeffs[i]) * falling(i, j, width);
                    }
                    out.push(acc);
                }
                Ok(out)
            }
            Kind::Recip(a) => {
                let t = Float::with_val(b + 32, x + Float::with_val(b + 32, a)).recip();
                let mut out = Vec::with_capacity(k_max + 1);
                let mut cur = t.clone();
                for j in 0..=k_max {
                    out.push(Float::with_val(b, &cur));
                    cur *= &t;
                    cur *= -((j + 1) as i64);
                }
                Ok(out)
            }
            Kind::NodePoly(p) => {
                let roots = p.roots_at(x.prec().max(b))?;
                Ok(product_derivs(&roots, x, k_max, width).values)
            }
        }
    }

    /// `B_k` with `|f^{(k)}| <= B_k` on `[0, 1]`.
    pub fn bound(&self, k: u64, width: Width) -> Result<BigReal> {
        let b = width.bits();
        match &self.kind {
            Kind::Exp(c) => {
                let cf = Float::with_val(b, c);
                let base = Float::with_val(b, cf.abs_ref()).pow(k);
                let e = if *c > 0 { Float::with_val(b, &cf).exp() } else { one(width) };
                Ok(base * e)
            }
            Kind::Sin(c) => Ok(Float::with_val(b, Float::with_val(b, c).abs()).pow(k)),
            Kind::Poly(coeffs) => {
                let k = k as usize;
                let mut acc = zero(width);
                for (i, c) in coeffs.iter().enumerate().skip(k) {
                    acc += Float::with_val(b, c).abs() * falling(i, k, width);
                }
                Ok(acc)
            }
            Kind::Recip(a) => {
                let fact = Float::with_val(b, Float::factorial(k as u32));
                let af = Float::with_val(b, a);
                Ok(fact / af.pow(k + 1))
            }
            Kind::NodePoly(p) => {
                // every root lies in [0, 1], so each product term is at most 1
                let k = k as usize;
                if k > p.m {
                    Ok(zero(width))
                } else {
                    Ok(falling(p.m, k, width))
                }
            }
        }
    }
}

/// `i! / (i - j)!`.
fn falling(i: usize, j: usize, width: Width) -> BigReal {
    let mut acc = one(width);
    for t in 0..j {
        acc *= (i - t) as u32;
    }
    acc
}

/// `E_N` from above and below for one function.
#[derive(Clone, Debug)]
pub struct ApproxEstimate {
    pub n: usize,
    pub upper: BigReal,
    pub lower: BigReal,
    pub f_id: String,
}

/// `xi_n(f)` and grid maxima of `|omega_n|` for `n <= n_max`, shared by
/// tail estimates at several `N`.
#[derive(Clone, Debug)]
pub struct FaberExpansion {
    pub f_id: String,
    pub xi: Vec<BigReal>,
    pub omega_max: Vec<BigReal>,
    pub width: Width,
    pub grid_depth: u32,
}

#[derive(Clone, Debug)]
pub struct TailEstimate {
    pub value: BigReal,
    pub last_term: BigReal,
    /// Last term below `2^-32` of the sum.
    pub converged: bool,
}

impl FaberExpansion {
    pub fn build(f: &JetFn, params: &CantorParams, n_max: usize, grid_depth: u32) -> Result<Self> {
        let depth = node_levels_needed(n_max + 1).max(grid_depth);
        let levels = LevelData::for_depth(params, depth, 128)?;
        let z = NodeSeq::first(n_max + 1);
        let xi: Vec<BigReal> = divided_differences(f, &z, n_max, &levels, -96)?
            .into_iter()
            .map(|d| d.value)
            .collect();
        let g = grid(&levels, grid_depth)?.values(&levels)?;
        let nodes = realize(&z.points, &levels)?;
        let w = Width::new(levels.width.bits().max(192))?;
        let omega_max = omega_grid_max_all(&nodes, n_max, &g, w);
        Ok(FaberExpansion {
            f_id: f.id().to_string(),
            xi,
            omega_max,
            width: w,
            grid_depth,
        })
    }

    pub fn n_max(&self) -> usize {
        self.xi.len() - 1
    }

    /// `sum_{n = N+1}^{N+n_tail} |xi_n| max_grid |omega_n|`.
    pub fn tail_upper(&self, n_big: usize, n_tail: usize) -> Result<TailEstimate> {
        let hi = n_big + n_tail;
        if hi > self.n_max() || n_tail == 0 {
            return Err(Error::IndexOutOfRange(format!(
                "tail to {hi} exceeds expansion order {}",
                self.n_max()
            )));
        }
        let terms: Vec<BigReal> = (n_big + 1..=hi)
            .map(|n| Float::with_val(self.width.bits(), self.xi[n].abs_ref()) * &self.omega_max[n])
            .collect();
        let mut sum = zero(self.width);
        for t in &terms {
            sum += t;
        }
        let last = terms.last().expect("nonempty tail").clone();
        if sum.is_zero() {
            return Ok(TailEstimate {
                value: sum,
                last_term: last,
                converged: true,
            });
        }
        if last > terms[0] {
            return Err(Error::NoConvergence(format!(
                "tail not converged for {} at N = {n_big}: last term {} exceeds first {}",
                self.f_id,
                fmt_big(&last),
                fmt_big(&terms[0])
            )));
        }
        let converged = last < Float::with_val(64, &sum >> 32);
        Ok(TailEstimate {
            value: sum,
            last_term: last,
            converged,
        })
    }
}

/// Upper estimate of `E_N(f)` from the truncated Newton tail.
pub fn en_tail_upper(
    f: &JetFn,
    params: &CantorParams,
    n_big: usize,
    n_tail: usize,
    grid_depth: u32,
) -> Result<TailEstimate> {
    FaberExpansion::build(f, params, n_big + n_tail, grid_depth)?.tail_upper(n_big, n_tail)
}

/// Outcome of the discrete exchange.
#[derive(Clone, Debug)]
pub struct ExchangeResult {
    /// Levelled error of the final reference; a lower bound for the grid
    /// best approximation at every step.
    pub value: BigReal,
    /// Largest error of the final polynomial on the grid.
    pub max_error: BigReal,
    pub iterations: usize,
    pub reference: Vec<usize>,
}

const EXCHANGE_CAP: usize = 2000;

/// Best uniform approximation by degree-`N` polynomials on a finite point set,
/// by single-point exchange.
pub fn en_grid_exchange(f: &JetFn, n_big: usize, points: &[BigReal], width: Width) -> Result<ExchangeResult> {
    if points.len() < n_big + 2 {
        return Err(param(format!("exchange needs {} points, have {}", n_big + 2, points.len())));
    }
    let mut pts: Vec<BigReal> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    pts.dedup();
    if pts.len() < n_big + 2 {
        return Err(param("exchange needs distinct points"));
    }
    // values that vanish to rounding compare against the size of f
    let lw = Width::new(64)?;
    let mut scale = zero(lw);
    for x in &pts {
        let v = f.value(x, lw)?.abs();
        if v > scale {
            scale = v;
        }
    }
    let floor = Float::with_val(64, &scale >> 100u32);
    let driver = AdaptiveEval::new(width, -64).context("discrete exchange");
    let mut last = None;
    let out = driver.run(Some(&floor), |w| {
        let r = exchange_at(f, n_big, &pts, w)?;
        let v = r.value.clone();
        last = Some(r);
        Ok(v)
    })?;
    let mut r = last.expect("exchange ran");
    r.value = out.value;
    Ok(r)
}

fn exchange_at(f: &JetFn, n_big: usize, pts: &[BigReal], w: Width) -> Result<ExchangeResult> {
    let m = n_big + 2;
    let fv: Vec<BigReal> = pts.iter().map(|x| f.value(x, w)).collect::<Result<_>>()?;
    let last_idx = pts.len() - 1;
    let mut refs: Vec<usize> = (0..m).map(|i| i * last_idx / (m - 1)).collect();
    let tol = Float::with_val(64, 1) >> 40u32;
    for it in 0..EXCHANGE_CAP {
        let rp: Vec<&BigReal> = refs.iter().map(|&i| &pts[i]).collect();
        let weights: Vec<BigReal> = (0..m)
            .map(|i| {
                let mut acc = one(w);
                for j in 0..m {
                    if j != i {
                        acc *= diff(rp[i], rp[j], w);
                    }
                }
                acc.recip()
            })
            .collect();
        let mut num = zero(w);
        let mut den = zero(w);
        for (i, wi) in weights.iter().enumerate() {
            num += Float::with_val(w.bits(), wi * &fv[refs[i]]);
            if i % 2 == 0 {
                den += wi;
            } else {
                den -= wi;
            }
        }
        let h = Float::with_val(w.bits(), &num / &den);
        // residual values g_i = f_i - (-1)^i h, interpolated at the reference
        let g: Vec<BigReal> = (0..m)
            .map(|i| {
                if i % 2 == 0 {
                    Float::with_val(w.bits(), &fv[refs[i]] - &h)
                } else {
                    Float::with_val(w.bits(), &fv[refs[i]] + &h)
                }
            })
            .collect();
        let mut worst = (zero(w), 0usize, zero(w));
        for (idx, x) in pts.iter().enumerate() {
            let e = if let Some(i) = refs.iter().position(|&r| r == idx) {
                if i % 2 == 0 {
                    h.clone()
                } else {
                    Float::with_val(w.bits(), -&h)
                }
            } else {
                let mut a = zero(w);
                let mut b = zero(w);
                for i in 0..m {
                    let t = Float::with_val(w.bits(), &weights[i] / diff(x, rp[i], w));
                    a += Float::with_val(w.bits(), &t * &g[i]);
                    b += t;
                }
                Float::with_val(w.bits(), &fv[idx] - Float::with_val(w.bits(), &a / &b))
            };
            let ae = Float::with_val(w.bits(), e.abs_ref());
            if ae > worst.0 {
                worst = (ae, idx, e);
            }
        }
        let habs = Float::with_val(w.bits(), h.abs_ref());
        let limit = Float::with_val(w.bits(), &habs * (Float::with_val(64, 1) + &tol));
        if worst.0 <= limit || worst.0.is_zero() {
            return Ok(ExchangeResult {
                value: habs,
                max_error: worst.0,
                iterations: it,
                reference: refs,
            });
        }
        let (_, star, e_star) = worst;
        let sign_at = |i: usize| -> bool { (i % 2 == 0) == (h >= 0) };
        let pos = e_star >= 0;
        if star < refs[0] {
            if sign_at(0) == pos {
                refs[0] = star;
            } else {
                refs.pop();
                refs.insert(0, star);
            }
        } else if star > refs[m - 1] {
            if sign_at(m - 1) == pos {
                refs[m - 1] = star;
            } else {
                refs.remove(0);
                refs.push(star);
            }
        } else {
            let i = refs.iter().position(|&r| r > star).expect("interior point") - 1;
            if sign_at(i) == pos {
                refs[i] = star;
            } else {
                refs[i + 1] = star;
            }
        }
    }
    Err(Error::NoConvergence(format!(
        "exchange for {} at N = {n_big} did not settle in {EXCHANGE_CAP} steps",
        f.id()
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMode {
    /// Grid values and grid pairs; `q <= 16`.
    Empirical,
    /// From the derivative bounds, any `q`.
    Analytic,
}

pub const EMPIRICAL_Q_MAX: u64 = 16;

/// `||f||_q` on the set: the largest derivative up to order `q` plus the
/// scaled Taylor remainder term over pairs of points.
pub fn whitney_norm(f: &JetFn, q: u64, points: &[BigReal], mode: NormMode, width: Width) -> Result<BigReal> {
    match mode {
        NormMode::Analytic => {
            let mut m = zero(width);
            for k in 0..=q {
                let b = f.bound(k, width)?;
                if b > m {
                    m = b;
                }
            }
            let e = Float::with_val(width.bits(), 1).exp();
            Ok(m + f.bound(q + 1, width)? * e)
        }
        NormMode::Empirical => {
            if q > EMPIRICAL_Q_MAX {
                return Err(param(format!("empirical norm supports q <= {EMPIRICAL_Q_MAX}, got {q}")));
            }
            let q = q as usize;
            let jets: Vec<Vec<BigReal>> = points.iter().map(|x| f.derivs(x, q, width)).collect::<Result<_>>()?;
            let mut sup = zero(width);
            for j in &jets {
                for v in j {
                    if v.clone().abs() > sup {
                        sup = v.clone().abs();
                    }
                }
            }
            let mut rem = zero(width);
            for (a, x) in points.iter().enumerate() {
                for (b, y) in points.iter().enumerate() {
                    if a == b {
                        continue;
                    }
                    let d = diff(x, y, width);
                    let ad = Float::with_val(width.bits(), d.abs_ref());
                    for k in 0..=q {
                        // f^{(k)}(x) - sum_j f^{(k+j)}(y) d^j / j!
                        let mut t = jets[a][k].clone();
                        let mut pw = one(width);
                        for j in 0..=(q - k) {
                            t -= Float::with_val(width.bits(), &jets[b][k + j] * &pw);
                            pw *= &d;
                            pw /= (j + 1) as u32;
                        }
                        let scaled = t.abs() / Float::with_val(width.bits(), (&ad).pow((q - k) as u32));
                        if scaled > rem {
                            rem = scaled;
                        }
                    }
                }
            }
            Ok(sup + rem)
        }
    }
}

/// `rho_1 ... rho_q` of the profile of `n`, as a float.
pub fn rho_smallest(params: &CantorParams, n: u64, q: usize, width: Width) -> Result<BigReal> {
    let (_, rho) = lambda_profile(n);
    logmag_to_bigreal(&p_smallest(&rho, q)?, params, width)
}

/// `rho_{p+1} ... rho_r` of the profile of `n`.
pub fn rho_range(params: &CantorParams, n: u64, p: usize, r: usize, width: Width) -> Result<BigReal> {
    let (_, rho) = lambda_profile(n);
    if r > rho.len() || p > r {
        return Err(Error::IndexOutOfRange(format!("rho range {p}..{r} of {}", rho.len())));
    }
    logmag_to_bigreal(&rho.range_product(p, r), params, width)
}

pub const DEFAULT_TAIL: usize = 24;

/// Ratio of the upper `E_N` estimate to `rho_1 ... rho_q ||f||_{q_1}` with
/// `q = 2^w`, `q_1 = 2^{w+8} + 1`; asserts finiteness and that the ratios do
/// not increase after the first one.
pub fn verify_jackson(
    f: &JetFn,
    params: &CantorParams,
    w: u32,
    n_list: &[usize],
    grid_depth: u32,
) -> Result<Report> {
    params.require(
        "jackson-rate",
        &[
            Constraint::AlphaAtLeast("2".into()),
            Constraint::Ell1AtMost("1/4".into()),
        ],
    )?;
    if n_list.is_empty() {
        return Err(param("empty N list"));
    }
    let q = 1usize << w;
    let q1 = (1u64 << (w + 8)) + 1;
    let mut rep = Report::new(
        "jackson-rate",
        "best approximation against the q smallest profile factors times the q1-norm",
        ReportKind::Assertion,
        params,
    );
    rep.param("w", w);
    rep.param("q", q as u64);
    rep.param("q1", q1);
    rep.param("n_tail", DEFAULT_TAIL as u64);
    rep.param("f", f.id());
    rep.grid_depth = Some(grid_depth);
    let n_max = *n_list.iter().max().expect("nonempty");
    let exp = FaberExpansion::build(f, params, n_max + DEFAULT_TAIL, grid_depth)?;
    let wd = exp.width;
    rep.width_bits = wd.bits();
    let norm = whitney_norm(f, q1, &[], NormMode::Analytic, wd)?;
    rep.datum("norm_q1", fmt_big(&norm));
    let mut ratios: Vec<(usize, BigReal)> = Vec::new();
    for &n in n_list {
        let s = 63 - (n.max(1) as u64).leading_zeros();
        if (w as i64) >= s as i64 - 8 {
            rep.note(format!("N = {n}: w = {w} is outside the stated hypothesis w < s - 8 (s = {s})"));
        }
        let tail = exp.tail_upper(n, DEFAULT_TAIL)?;
        if !tail.converged {
            rep.note(format!("N = {n}: tail truncation not settled"));
        }
        let rho = rho_smallest(params, n as u64 + 1, q, wd)?;
        let denom = Float::with_val(wd.bits(), &rho * &norm);
        let r = Float::with_val(wd.bits(), &tail.value / &denom);
        rep.push(
            Check::exact(
                "ratio is finite",
                fmt_big(&r),
                Relation::Lt,
                "inf",
                r.is_finite(),
                None,
            )
            .n(n as u64)
            .q(q as u64),
        );
        ratios.push((n, r));
    }
    for pair in ratios.windows(2).skip(1) {
        let (_, a) = &pair[0];
        let (n, b) = &pair[1];
        rep.push(Check::real("ratio does not increase", b, Relation::Le, a).n(*n as u64).q(q as u64));
    }
    rep.datum(
        "ratios",
        serde_json::Value::Array(
            ratios
                .iter()
                .map(|(n, r)| serde_json::json!({"N": n, "ratio": fmt_big(r)}))
                .collect(),
        ),
    );
    Ok(rep)
}

/// `M_N^{(p)} E_{N-1}(f) <= rho_{p+1} ... rho_r ||f||_{r_1}` with the
/// Markov factor replaced by its upper bound, `r = 2^w`, `r_1 = 2^{w+10}`.
/// Checks from the first `N` after which every listed `N` passes are
/// asserted; earlier ones are recorded.
pub fn verify_mf_jt(
    f: &JetFn,
    params: &CantorParams,
    p: usize,
    w: u32,
    n_list: &[usize],
    grid_depth: u32,
) -> Result<Report> {
    params.require(
        "markov-jackson-product",
        &[
            Constraint::AlphaEquals("2".into()),
            Constraint::Ell1AtMost("1/3".into()),
        ],
    )?;
    let r = 1usize << w;
    if r <= p {
        return Err(Error::Hypothesis {
            requirement: format!("markov-jackson-product requires 2^w > p (w = {w}, p = {p})"),
        });
    }
    if n_list.is_empty() || n_list.iter().any(|&n| n < 1) {
        return Err(param("N list must be nonempty and positive"));
    }
    let r1 = 1u64 << (w + 10);
    let mut rep = Report::new(
        "markov-jackson-product",
        "Markov factor bound times best approximation against the profile factors p+1..r",
        ReportKind::Assertion,
        params,
    );
    rep.param("p", p as u64);
    rep.param("w", w);
    rep.param("r", r as u64);
    rep.param("r1", r1);
    rep.param("f", f.id());
    rep.grid_depth = Some(grid_depth);
    let n_max = *n_list.iter().max().expect("nonempty");
    let exp = FaberExpansion::build(f, params, n_max + DEFAULT_TAIL, grid_depth)?;
    let wd = exp.width;
    rep.width_bits = wd.bits();
    let depth = node_levels_needed(n_max + 2).max(1);
    let levels = LevelData::for_depth(params, depth, 128)?.with_width(wd)?;
    let norm = whitney_norm(f, r1, &[], NormMode::Analytic, wd)?;
    let mut rows = Vec::new();
    for &n in n_list {
        if r > n + 1 {
            rep.note(format!("N = {n}: profile has fewer than r = {r} factors; skipped"));
            continue;
        }
        let markov = crate::verify::markov_upper(n as u64, p as u64, &levels)?;
        let e = exp.tail_upper(n - 1, DEFAULT_TAIL)?;
        let lhs = Float::with_val(wd.bits(), &markov * &e.value);
        let rhs = Float::with_val(wd.bits(), rho_range(params, n as u64 + 1, p, r, wd)? * &norm);
        rows.push((n, Check::real("product bound", &lhs, Relation::Le, &rhs).n(n as u64).p(p as u64)));
    }
    let n0 = rows
        .iter()
        .rposition(|(_, c)| !c.pass)
        .map_or(rows.first().map(|(n, _)| *n), |i| rows.get(i + 1).map(|(n, _)| *n));
    match n0 {
        Some(n0) => rep.datum("first_passing_n", n0 as u64),
        None => rep.datum("first_passing_n", serde_json::Value::Null),
    }
    rep.push(Check::exact(
        "some tail of the N list passes",
        n0.map_or("none".to_string(), |n| n.to_string()),
        Relation::Le,
        n_max.to_string(),
        n0.is_some(),
        None,
    ));
    for (n, c) in rows {
        if n0.is_some_and(|n0| n >= n0) {
            rep.push(c);
        } else {
            rep.push(c.finding());
        }
    }
    Ok(rep)
}

/// Grid of `K` at `depth` realised at `width`.
pub fn set_grid(params: &CantorParams, depth: u32, headroom: u32) -> Result<(LevelData, Vec<BigReal>)> {
    let levels = LevelData::for_depth(params, depth, headroom)?;
    let g = grid(&levels, depth)?.values(&levels)?;
    Ok((levels, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CantorParams {
        CantorParams::parse("2", "1/4").unwrap()
    }

    fn w() -> Width {
        Width::new(256).unwrap()
    }

    fn close(a: &BigReal, b: &BigReal, rel: f64) -> bool {
        let d = Float::with_val(64, a - b).abs();
        let s = Float::with_val(64, a.abs_ref()).max(&Float::with_val(64, b.abs_ref()));
        d <= s * rel || d < 1e-70
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = params();
        let fs = [
            JetFn::exp(Rational::from(1)),
            JetFn::exp(Rational::from((-1, 2))),
            JetFn::sin(Rational::from(3)),
            JetFn::poly(vec![Rational::from(1), Rational::from(0), Rational::from(-2), Rational::from(5)]),
            JetFn::recip(Rational::from(2)).unwrap(),
            JetFn::node_poly(5, &p).unwrap(),
        ];
        let x = Float::with_val(256, 0.3);
        let h = Float::with_val(256, 1e-20);
        for f in &fs {
            let d = f.derivs(&x, 5, w()).unwrap();
            for k in 0..4 {
                let up = f.derivs(&Float::with_val(256, &x + &h), k, w()).unwrap();
                let dn = f.derivs(&Float::with_val(256, &x - &h), k, w()).unwrap();
                let fd = Float::with_val(256, &up[k] - &dn[k]) / Float::with_val(256, &h * 2u32);
                assert!(close(&fd, &d[k + 1], 1e-30), "{} order {}", f.id(), k + 1);
            }
        }
    }

    #[test]
    fn bounds_dominate_derivatives() {
        let p = params();
        let fs = [
            JetFn::exp(Rational::from(2)),
            JetFn::sin(Rational::from(3)),
            JetFn::recip(Rational::from(2)).unwrap(),
            JetFn::node_poly(6, &p).unwrap(),
        ];
        for f in &fs {
            for i in 0..=20 {
                let x = Float::with_val(256, i) / 20u32;
                let d = f.derivs(&x, 7, w()).unwrap();
                for (k, v) in d.iter().enumerate() {
                    assert!(v.clone().abs() <= f.bound(k as u64, w()).unwrap(), "{} k={k}", f.id());
                }
            }
        }
    }

    #[test]
    fn parse_catalog() {
        let p = params();
        assert_eq!(JetFn::parse("exp", &p).unwrap().id(), "exp");
        assert_eq!(JetFn::parse("poly:1,0,0", &p).unwrap().degree(), Some(0));
        assert_eq!(JetFn::parse("omega:5", &p).unwrap().degree(), Some(5));
        assert!(JetFn::parse("recip:-1", &p).is_err());
        assert!(JetFn::parse("tan", &p).is_err());
    }

    #[test]
    fn exchange_on_four_points() {
        // x^2 on {0, 1/4, 3/4, 1} by lines: the levelled error is 3/32
        let pts: Vec<BigReal> = [0.0, 0.25, 0.75, 1.0].iter().map(|v| Float::with_val(128, *v)).collect();
        let f = JetFn::poly(vec![Rational::new(), Rational::new(), Rational::from(1)]);
        let r = en_grid_exchange(&f, 1, &pts, Width::new(128).unwrap()).unwrap();
        assert_eq!(r.value, Float::with_val(128, 3) / 32u32);
        let lin = JetFn::poly(vec![Rational::from(1), Rational::from(3)]);
        assert!(en_grid_exchange(&lin, 1, &pts, Width::new(128).unwrap()).unwrap().value < 1e-30);
    }

    #[test]
    fn whitney_examples() {
        let g: Vec<BigReal> = [0.0, 0.25, 0.75, 1.0].iter().map(|v| Float::with_val(256, *v)).collect();
        let one = JetFn::poly(vec![Rational::from(1)]);
        assert_eq!(whitney_norm(&one, 3, &g, NormMode::Empirical, w()).unwrap(), 1);
        let x = JetFn::poly(vec![Rational::new(), Rational::from(1)]);
        assert_eq!(whitney_norm(&x, 0, &g, NormMode::Empirical, w()).unwrap(), 2);
        let e = JetFn::exp(Rational::from(1));
        let a = whitney_norm(&e, 40, &g, NormMode::Analytic, w()).unwrap();
        let ee = Float::with_val(256, 1).exp();
        assert_eq!(a, Float::with_val(256, &ee + Float::with_val(256, &ee * &ee)));
        for q in 0..=4 {
            let em = whitney_norm(&e, q, &g, NormMode::Empirical, w()).unwrap();
            assert!(em <= whitney_norm(&e, q, &g, NormMode::Analytic, w()).unwrap());
        }
    }
}

//! The extension operator `W(f, x) = sum_N xi_N(f) omega_N(x) u_{delta_N}(x)`
//! with `delta_N = ell_s` for `2^s <= N < 2^{s+1}`, its derivatives, and the
//! checks built on it: term decay, the simultaneous bound on extended node
//! polynomials, its failure for `alpha > 2`, and the interval example.

use std::io::Write;

use rayon::prelude::*;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::approx::{whitney_norm, JetFn, NormMode};
use crate::cantor::{grid, CantorParams, Constraint, LevelData};
use crate::cutoff::{phi_deriv, theta_constants, CutoffFn};
use crate::error::{param, Result};
use crate::nodes::{node_levels_needed, NodeSeq};
use crate::numerics::{fmt_big, from_rational, one, zero, BigReal, Width, WORK_BITS};
use crate::polyops::{diff, divided_differences, product_derivs, realize};
use crate::report::{Check, Relation, Report, ReportKind};
use crate::verify::default_grid_depth;

/// Samples per collar when none is given.
pub const DEFAULT_PER_COLLAR: usize = 64;
/// Relative size of the upper half of the series below which it counts as
/// converged.
pub const DEFAULT_TAIL_REL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub alpha: String,
    pub ell1: String,
    pub n_max: usize,
    pub p_max: usize,
    pub grid_depth: u32,
    pub per_collar: usize,
    pub tail_rel: f64,
}

impl OperatorConfig {
    pub fn new(params: &CantorParams, n_max: usize, p_max: usize) -> Self {
        OperatorConfig {
            alpha: params.alpha_str(),
            ell1: params.ell1_str(),
            n_max,
            p_max,
            grid_depth: default_grid_depth(n_max + 1),
            per_collar: DEFAULT_PER_COLLAR,
            tail_rel: DEFAULT_TAIL_REL,
        }
    }

    pub fn params(&self) -> Result<CantorParams> {
        CantorParams::parse(&self.alpha, &self.ell1)
    }
}

/// `s` with `delta_N = ell_s`; the first two terms share `ell_0 = 1`.
pub fn delta_level(n: usize) -> u32 {
    if n < 2 {
        0
    } else {
        usize::BITS - 1 - n.leading_zeros()
    }
}

/// `W(f)` and its derivatives at one point, with the moduli of every term.
#[derive(Clone, Debug)]
pub struct ExtensionResult {
    pub x: BigReal,
    /// `W^{(j)}(f)(x)`, `j <= p_max`.
    pub values: Vec<BigReal>,
    /// `|G_N^{(j)}(x)|` indexed `[N][j]`.
    pub terms: Vec<Vec<BigReal>>,
    /// Per `j`: the terms past `N_max / 2` sum to at most `tail_rel` of all.
    pub converged: Vec<bool>,
}

/// Coefficients, nodes and cutoffs of `W(f)` truncated at `N_max`.
pub struct Operator {
    pub config: OperatorConfig,
    pub f_id: String,
    pub levels: LevelData,
    /// The first `N_max + 2` nodes.
    pub nodes: Vec<BigReal>,
    pub xi: Vec<BigReal>,
    /// `u_{ell_s}` for `s = 0 ..= delta_level(N_max)`.
    pub cutoffs: Vec<CutoffFn>,
    pub work: Width,
    binom: Vec<Vec<Integer>>,
}

fn pascal(p: usize) -> Vec<Vec<Integer>> {
    (0..=p)
        .map(|j| (0..=j).map(|i| Integer::from(Integer::binomial_u(j as u32, i as u32))).collect())
        .collect()
}

/// `(omega u)^{(j)} = sum_i C(j, i) omega^{(i)} u^{(j-i)}`.
fn leibniz(binom: &[Vec<Integer>], omega: &[BigReal], u: &[BigReal], j: usize, width: Width) -> BigReal {
    let b = width.bits();
    let mut acc = zero(width);
    for i in 0..=j {
        if omega[i].is_zero() || u[j - i].is_zero() {
            continue;
        }
        let t = Float::with_val(b, &omega[i] * &u[j - i]);
        acc += t * &binom[j][i];
    }
    acc
}

fn push_factor(omega: &mut [BigReal], d: &BigReal, width: Width) {
    let mut t = zero(width);
    for j in (1..omega.len()).rev() {
        t.assign_mul_u(&omega[j - 1], j as u32);
        omega[j] *= d;
        omega[j] += &t;
    }
    omega[0] *= d;
}

trait MulU {
    fn assign_mul_u(&mut self, a: &BigReal, k: u32);
}

impl MulU for BigReal {
    fn assign_mul_u(&mut self, a: &BigReal, k: u32) {
        use rug::Assign;
        self.assign(a * k);
    }
}

fn max_into(acc: &mut [Vec<BigReal>], row: Vec<Vec<BigReal>>) {
    for (a, r) in acc.iter_mut().zip(row) {
        for (x, y) in a.iter_mut().zip(r) {
            if y > *x {
                *x = y;
            }
        }
    }
}

impl Operator {
    pub fn build(f: &JetFn, config: OperatorConfig) -> Result<Operator> {
        let params = config.params()?;
        let n_max = config.n_max;
        let s_max = delta_level(n_max);
        let depth = node_levels_needed(n_max + 2).max(config.grid_depth).max(s_max + 1);
        let levels = LevelData::for_depth(&params, depth, 128)?;
        let z = NodeSeq::first(n_max + 2);
        let nodes = realize(&z.points, &levels)?;
        let xi = divided_differences(f, &z, n_max, &levels, -96)?
            .into_iter()
            .map(|d| d.value)
            .collect();
        let cutoffs = (0..=s_max)
            .map(|s| CutoffFn::for_set(&params, levels.ell(s)?, levels.width))
            .collect::<Result<Vec<_>>>()?;
        Ok(Operator {
            binom: pascal(config.p_max),
            config,
            f_id: f.id().to_string(),
            levels,
            nodes,
            xi,
            cutoffs,
            work: Width::new(WORK_BITS)?,
        })
    }

    pub fn delta(&self, n: usize) -> &BigReal {
        &self.cutoffs[delta_level(n) as usize].delta
    }

    /// Terms `N = 0 ..= N_max` at `x`.
    pub fn eval(&self, x: &BigReal) -> ExtensionResult {
        let p = self.config.p_max;
        let w = self.work;
        let mut u: Vec<Option<Vec<BigReal>>> = vec![None; self.cutoffs.len()];
        let mut omega = vec![zero(w); p + 1];
        omega[0] = one(w);
        let mut values = vec![zero(w); p + 1];
        let mut terms = Vec::with_capacity(self.config.n_max + 1);
        for n in 0..=self.config.n_max {
            let s = delta_level(n) as usize;
            let us = u[s].get_or_insert_with(|| self.cutoffs[s].eval(x, p, w));
            let mut row = Vec::with_capacity(p + 1);
            for (j, v) in values.iter_mut().enumerate() {
                let g = leibniz(&self.binom, &omega, us, j, w) * &self.xi[n];
                *v += &g;
                row.push(g.abs());
            }
            terms.push(row);
            if n < self.config.n_max {
                push_factor(&mut omega, &diff(x, &self.nodes[n], w), w);
            }
        }
        let half = self.config.n_max / 2;
        let converged = (0..=p)
            .map(|j| {
                let mut all = zero(w);
                let mut tail = zero(w);
                for (n, r) in terms.iter().enumerate() {
                    all += &r[j];
                    if n > half {
                        tail += &r[j];
                    }
                }
                all.is_zero() || tail <= all * self.config.tail_rel
            })
            .collect();
        ExtensionResult {
            x: x.clone(),
            values,
            terms,
            converged,
        }
    }

    /// The set grid at the configured depth.
    pub fn set_grid(&self) -> Result<Vec<BigReal>> {
        grid(&self.levels, self.config.grid_depth)?.values(&self.levels)
    }

    /// Set grid and collar samples of every cutoff in use.
    pub fn samples(&self) -> Result<Vec<BigReal>> {
        let mut out = self.set_grid()?;
        for u in &self.cutoffs {
            out.extend(u.collar_samples(self.config.per_collar));
        }
        Ok(out)
    }

    /// `max_x |G_N^{(j)}(x)|` over `points`, indexed `[N][j]`.
    pub fn term_sups(&self, points: &[BigReal]) -> Vec<Vec<BigReal>> {
        let (n, p, w) = (self.config.n_max, self.config.p_max, self.work);
        points
            .par_iter()
            .fold(
                || vec![vec![zero(w); p + 1]; n + 1],
                |mut acc, x| {
                    max_into(&mut acc, self.eval(x).terms);
                    acc
                },
            )
            .reduce(
                || vec![vec![zero(w); p + 1]; n + 1],
                |mut a, b| {
                    max_into(&mut a, b);
                    a
                },
            )
    }
}

/// `W(f)` at `x` for the configured operator.
pub fn w_eval(f: &JetFn, x: &BigReal, config: &OperatorConfig) -> Result<ExtensionResult> {
    if *x < -2 || *x > 2 {
        return Err(param(format!("x = {} outside [-2, 2]", fmt_big(x))));
    }
    Ok(Operator::build(f, config.clone())?.eval(x))
}

/// One row of the per-term table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub delta: String,
    pub xi_abs: String,
    pub term_sup: String,
    pub cumulative: String,
}

pub fn write_term_csv<W: Write>(rows: &[TermRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// First index from which every later check passes.
fn first_passing(passes: &[bool]) -> Option<usize> {
    let last_fail = passes.iter().rposition(|p| !p);
    match last_fail {
        None => Some(0),
        Some(i) if i + 1 < passes.len() => Some(i + 1),
        _ => None,
    }
}

/// Sups `T_N` of the `p`-th derivative of every term over the set grid and
/// the collars; checks that dyadic block maxima of `T_N` fall from `N = 16`
/// on, that the series is Cauchy, and that `W` reproduces `f` on the nodes
/// and the grid. Compares `T_N` with `ell_s ||f||_{r_1}` as findings.
pub fn verify_term_decay(f: &JetFn, p: usize, config: &OperatorConfig) -> Result<(Report, Vec<TermRow>)> {
    let params = config.params()?;
    params.require(
        "operator-term-decay",
        &[
            Constraint::AlphaEquals("2".into()),
            Constraint::Ell1AtMost("1/3".into()),
        ],
    )?;
    let mut cfg = config.clone();
    cfg.p_max = p;
    let op = Operator::build(f, cfg)?;
    let w = op.work;
    let n_max = op.config.n_max;

    let mut rep = Report::new(
        "operator-term-decay",
        "per-term sups of the extension series and reproduction of f on the set",
        ReportKind::Assertion,
        &params,
    );
    rep.param("f", f.id());
    rep.param("p", p as u64);
    rep.param("N_max", n_max as u64);
    rep.param("per_collar", op.config.per_collar as u64);
    rep.width_bits = op.levels.width.bits();
    rep.grid_depth = Some(op.config.grid_depth);

    let grid_pts = op.set_grid()?;
    let mut samples = grid_pts.clone();
    for u in &op.cutoffs {
        samples.extend(u.collar_samples(op.config.per_collar));
    }
    rep.datum("samples", samples.len() as u64);
    let sups = op.term_sups(&samples);
    let t: Vec<BigReal> = sups.iter().map(|r| r[p].clone()).collect();

    // dyadic blocks from [16, 32) on
    let mut prev: Option<(u32, BigReal)> = None;
    let mut s = 4u32;
    while (1usize << s) <= n_max {
        let lo = 1usize << s;
        let hi = ((1usize << (s + 1)) - 1).min(n_max);
        let m = t[lo..=hi].iter().max_by(|a, b| a.partial_cmp(b).expect("finite")).expect("nonempty");
        if let Some((ps, pm)) = &prev {
            rep.push(
                Check::real(
                    format!("max T_N over [{lo}, {hi}] < max over block {ps}"),
                    m,
                    Relation::Lt,
                    pm,
                )
                .n(hi as u64)
                .p(p as u64),
            );
        }
        prev = Some((s, m.clone()));
        s += 1;
    }
    let past16 = (17..=n_max).filter(|&n| t[n] > t[n - 1]).count();
    rep.datum("increases_past_16", past16 as u64);

    let mut total = zero(w);
    let mut tail = zero(w);
    let mut rows = Vec::with_capacity(n_max + 1);
    for (n, tn) in t.iter().enumerate() {
        total += tn;
        if n > n_max / 2 {
            tail += tn;
        }
        rows.push(TermRow {
            n,
            delta: fmt_big(op.delta(n)),
            xi_abs: fmt_big(&Float::with_val(64, op.xi[n].abs_ref())),
            term_sup: fmt_big(tn),
            cumulative: fmt_big(&total),
        });
    }
    let cauchy = Float::with_val(w.bits(), &total * op.config.tail_rel);
    rep.push(Check::real("sum of T_N past N_max/2 <= tail_rel * sum T_N", &tail, Relation::Le, &cauchy).p(p as u64));

    // reproduction on nodes and grid; cutoffs are one on the set
    let repro = |pts: &[BigReal]| -> Result<(BigReal, BigReal)> {
        let mut worst = zero(w);
        let mut at = zero(w);
        for x in pts {
            let v = op.eval(x).values.swap_remove(0);
            let fx = f.value(x, w)?;
            let e = Float::with_val(w.bits(), &v - &fx).abs();
            let rel = if fx.is_zero() { e } else { e / fx.abs() };
            if rel > worst {
                worst = rel;
                at = x.clone();
            }
        }
        Ok((worst, at))
    };
    let eps = Float::with_val(w.bits(), 1) >> 64u32;
    let (node_err, node_at) = repro(&op.nodes)?;
    rep.push(Check::real("max relative |W(f) - f| on the nodes <= 2^-64", &node_err, Relation::Le, &eps));
    rep.datum("node_worst_at", fmt_big(&node_at));
    let (grid_err, _) = repro(&grid_pts)?;
    rep.push(Check::real("max relative |W(f) - f| on the set grid <= 2^-64", &grid_err, Relation::Le, &eps));

    // T_N against ell_s ||f||_{r_1}, r_1 = 2^{w+10} with w = 2p + 6
    let r1 = 1u64 << (2 * p + 16);
    let norm = whitney_norm(f, r1, &[], NormMode::Analytic, w)?;
    rep.param("r1", r1);
    rep.datum("norm_r1", fmt_big(&norm));
    let mut passes = Vec::with_capacity(n_max + 1);
    for (n, tn) in t.iter().enumerate() {
        let bound = Float::with_val(w.bits(), op.delta(n) * &norm);
        let c = Check::real("T_N <= ell_s ||f||_{r_1}", tn, Relation::Le, &bound)
            .n(n as u64)
            .p(p as u64)
            .finding();
        passes.push(c.pass);
        rep.push(c);
    }
    rep.datum("first_passing_n", first_passing(&passes).map(|v| v as u64));
    rep.datum("total", fmt_big(&total));
    rep.datum("tail", fmt_big(&tail));
    rep.datum("t_n", rows.iter().map(|r| r.term_sup.clone()).collect::<Vec<_>>());
    Ok((rep, rows))
}

/// `q` used against `omega_n` for derivative order `p`: `2^{2p+6} + 1` when
/// below `n`, else the largest `2^w + 1 < n`, else `0`. The flag marks a
/// reduced `q`.
pub fn seom_q(p: usize, n: usize) -> (usize, bool) {
    let full = (1usize << (2 * p + 6)) + 1;
    if full < n {
        return (full, false);
    }
    let mut q = 0;
    let mut k = 0;
    while (1usize << k) + 1 < n {
        q = (1usize << k) + 1;
        k += 1;
    }
    (q, true)
}

/// For each `n <= n_max`, `|omega~_n|_p` (set grid and collars of
/// `u_{delta_n}`) against `|omega_n|_q` on the set grid; reports the ratios
/// and their running maximum.
pub fn verify_seom(params: &CantorParams, p: usize, n_max: usize, per_collar: usize) -> Result<Report> {
    params.require(
        "extended-node-bound",
        &[
            Constraint::AlphaEquals("2".into()),
            Constraint::Ell1AtMost("1/3".into()),
        ],
    )?;
    if n_max == 0 {
        return Err(param("n_max must be positive"));
    }
    let gd = default_grid_depth(n_max + 1);
    let s_max = delta_level(n_max);
    let depth = node_levels_needed(n_max + 1).max(gd).max(s_max + 1);
    let levels = LevelData::for_depth(params, depth, 128)?;
    let nodes = realize(&NodeSeq::first(n_max).points, &levels)?;
    let g = grid(&levels, gd)?.values(&levels)?;
    let cutoffs = (0..=s_max)
        .map(|s| CutoffFn::for_set(params, levels.ell(s)?, levels.width))
        .collect::<Result<Vec<_>>>()?;
    let w = Width::new(WORK_BITS)?;
    let binom = pascal(p);

    // samples: (x, Some(s)) feed only the block of delta level s
    let mut samples: Vec<(BigReal, Option<u32>)> = g.iter().map(|x| (x.clone(), None)).collect();
    for (s, u) in cutoffs.iter().enumerate() {
        samples.extend(u.collar_samples(per_collar).into_iter().map(|x| (x, Some(s as u32))));
    }
    let zero_row = || vec![zero(w); n_max + 1];
    let tilde: Vec<BigReal> = samples
        .par_iter()
        .fold(zero_row, |mut acc, (x, only)| {
            let mut us: Vec<Option<Vec<BigReal>>> = vec![None; cutoffs.len()];
            let mut omega = vec![zero(w); p + 1];
            omega[0] = one(w);
            for n in 0..=n_max {
                let s = delta_level(n);
                if only.is_none_or(|o| o == s) {
                    let u = us[s as usize].get_or_insert_with(|| cutoffs[s as usize].eval(x, p, w));
                    for j in 0..=p {
                        let v = leibniz(&binom, &omega, u, j, w).abs();
                        if v > acc[n] {
                            acc[n] = v;
                        }
                    }
                }
                if n < n_max {
                    push_factor(&mut omega, &diff(x, &nodes[n], w), w);
                }
            }
            acc
        })
        .reduce(zero_row, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                if y > *x {
                    *x = y;
                }
            }
            a
        });

    let qs: Vec<(usize, bool)> = (0..=n_max).map(|n| seom_q(p, n)).collect();
    let q_top = qs.iter().map(|q| q.0).max().unwrap_or(0);
    let plain: Vec<BigReal> = g
        .par_iter()
        .fold(zero_row, |mut acc, x| {
            let mut omega = vec![zero(w); q_top + 1];
            omega[0] = one(w);
            for n in 0..=n_max {
                for v in &omega[..=qs[n].0.min(n)] {
                    let a = Float::with_val(w.bits(), v.abs_ref());
                    if a > acc[n] {
                        acc[n] = a;
                    }
                }
                if n < n_max {
                    push_factor(&mut omega, &diff(x, &nodes[n], w), w);
                }
            }
            acc
        })
        .reduce(zero_row, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                if y > *x {
                    *x = y;
                }
            }
            a
        });

    let mut rep = Report::new(
        "extended-node-bound",
        "sup of the cut-off node polynomial and its p derivatives against the q-norm of the node polynomial",
        ReportKind::Finding,
        params,
    );
    rep.param("p", p as u64);
    rep.param("n_max", n_max as u64);
    rep.param("per_collar", per_collar as u64);
    rep.width_bits = levels.width.bits();
    rep.grid_depth = Some(gd);
    let mut running = zero(w);
    let mut ratios = Vec::new();
    let mut reduced = 0u64;
    for n in 1..=n_max {
        let (q, red) = qs[n];
        let ratio = Float::with_val(w.bits(), &tilde[n] / &plain[n]);
        if ratio > running {
            running = ratio.clone();
        }
        if red {
            reduced += 1;
        }
        let label = if red {
            "|omega~_n|_p / |omega_n|_q <= running max (reduced q)"
        } else {
            "|omega~_n|_p / |omega_n|_q <= running max"
        };
        rep.push(
            Check::real(label, &ratio, Relation::Le, &running)
                .n(n as u64)
                .p(p as u64)
                .q(q as u64),
        );
        ratios.push(fmt_big(&ratio));
    }
    rep.datum("ratios", ratios);
    rep.datum("running_max", fmt_big(&running));
    rep.datum("reduced_q_rows", reduced);
    Ok(rep)
}

/// Smallest even integer above `(2 alpha - 3) / (alpha - 2)`.
pub fn violation_p(alpha: &Rational) -> Result<usize> {
    if *alpha <= 2 {
        return Err(param("needs alpha > 2"));
    }
    let t = Rational::from(2 * alpha.clone() - 3) / Rational::from(alpha - Rational::from(2));
    let mut p = t.floor().numer().to_usize().ok_or_else(|| param("threshold too large"))? + 1;
    if p % 2 == 1 {
        p += 1;
    }
    Ok(p)
}

/// `|omega~_N^{(p)}(z)|` at `z = 1 + theta_p ell_s`, `N = 2^s`, divided by
/// the majorant `N^q prod_{k=q+1}^N d_k(1)` of `|omega_N|_q`, for every `s`
/// and `q`; growth in `s` is recorded as findings.
pub fn violation_demo(params: &CantorParams, s_list: &[u32], q_list: &[usize]) -> Result<Report> {
    params.require("extended-node-bound-failure", &[Constraint::AlphaAbove("2".into())])?;
    if s_list.is_empty() || q_list.is_empty() {
        return Err(param("empty s or q list"));
    }
    let p = violation_p(params.alpha())?;
    let w = Width::new(WORK_BITS)?;
    let th = theta_constants(p, Width::new(256)?)?;
    let phis: Vec<BigReal> = (0..=p).map(|j| phi_deriv(j, &th.theta, w)).collect();
    let binom = pascal(p);

    let mut rep = Report::new(
        "extended-node-bound-failure",
        "cut-off node polynomial derivative at 1 + theta_p ell_s against the majorant of |omega_N|_q",
        ReportKind::Finding,
        params,
    );
    rep.param("p", p as u64);
    rep.param("s", s_list.iter().map(|&s| s as u64).collect::<Vec<_>>());
    rep.param("q", q_list.iter().map(|&q| q as u64).collect::<Vec<_>>());
    rep.datum("theta_p", fmt_big(&th.theta));

    let mut table: Vec<Vec<BigReal>> = Vec::new();
    let mut width_bits = 0;
    for &s in s_list {
        let n = 1usize << s;
        if q_list.iter().any(|&q| q >= n) {
            return Err(param(format!("every q must be below N = {n}")));
        }
        let levels = LevelData::for_depth(params, node_levels_needed(n).max(s + 1), 128)?;
        width_bits = width_bits.max(levels.width.bits());
        let nodes = realize(&NodeSeq::first(n).points, &levels)?;
        let ell = levels.ell(s)?;
        let zb = levels.width.bits() + WORK_BITS;
        let z = Float::with_val(zb, 1 + Float::with_val(zb, &th.theta * ell));
        let om = product_derivs(&nodes, &z, p, w).values;
        if om.iter().any(|v| *v <= 0) {
            rep.note(format!("some omega_N^(j)(z) not positive at s = {s}"));
        }
        let mut u = Vec::with_capacity(p + 1);
        let mut scale = one(w);
        for ph in &phis {
            u.push(Float::with_val(w.bits(), ph * &scale));
            scale /= ell;
        }
        let tilde = leibniz(&binom, &om, &u, p, w).abs();
        let one_hi = one(levels.width);
        let mut d: Vec<BigReal> = nodes.iter().map(|x| diff(&one_hi, x, w).abs()).collect();
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut row = Vec::new();
        for &q in q_list {
            let mut maj = Float::with_val(w.bits(), n as u64);
            maj = maj.pow_u(q as u32);
            for dk in &d[q..] {
                maj *= dk;
            }
            row.push(Float::with_val(w.bits(), &tilde / &maj));
        }
        rep.datum(&format!("omega_tilde_p_s{s}"), fmt_big(&tilde));
        table.push(row);
    }
    rep.width_bits = width_bits;
    for (qi, &q) in q_list.iter().enumerate() {
        for k in 1..s_list.len() {
            rep.push(
                Check::real(
                    format!("ratio at s = {} > ratio at s = {}", s_list[k], s_list[k - 1]),
                    &table[k][qi],
                    Relation::Gt,
                    &table[k - 1][qi],
                )
                .n(1u64 << s_list[k])
                .p(p as u64)
                .q(q as u64),
            );
        }
        rep.datum(
            &format!("ratios_q{q}"),
            table.iter().map(|r| fmt_big(&r[qi])).collect::<Vec<_>>(),
        );
    }
    Ok(rep)
}

trait PowU {
    fn pow_u(self, e: u32) -> BigReal;
}

impl PowU for BigReal {
    fn pow_u(self, e: u32) -> BigReal {
        use rug::ops::Pow;
        self.pow(e)
    }
}

/// Samples per side of the interval in the interval example.
pub const INTERVAL_SAMPLES: usize = 4096;

/// `Q(x) = x` on `K = [-eps, eps]` extended by `u_delta` to `[-1, 1]`:
/// measures `|Q~|_0` and `|Q~''|_0`, checks `|Q~|_0 > delta/4` and
/// `|Q~''|_0 >= 1/delta`, and reports the implied lower bound
/// `max(delta/(4 eps), 1/delta)` on the constant.
pub fn interval_demo(params: &CantorParams, eps: &Rational, delta: &Rational) -> Result<Report> {
    if *eps <= 0 || *eps >= Rational::from((1, 4)) {
        return Err(param("eps must lie in (0, 1/4)"));
    }
    if *delta <= 0 || *delta >= Rational::from((1, 2)) {
        return Err(param("delta must lie in (0, 1/2)"));
    }
    let w = Width::new(256)?;
    let b = w.bits();
    let e = from_rational(eps, w);
    let d = from_rational(delta, w);
    let mut rep = Report::new(
        "interval-extension-constant",
        "extension of Q(x) = x from [-eps, eps] to [-1, 1] and the constant it forces",
        ReportKind::Assertion,
        params,
    );
    rep.param("eps", crate::numerics::format_rational(eps));
    rep.param("delta", crate::numerics::format_rational(delta));
    rep.width_bits = b;
    if Rational::from(delta.clone()) >= Rational::from(2 * (1 - eps.clone())) {
        rep.note("no constraint: the cutoff does not reach zero inside [-1, 1]");
        return Ok(rep);
    }
    let u = CutoffFn::for_interval(&Float::with_val(b, -&e), &e, &d, w)?;
    let mut pts = vec![zero(w), e.clone(), Float::with_val(b, -&e)];
    for i in 1..=INTERVAL_SAMPLES {
        let off = Float::with_val(b, &d * i as u32) / (INTERVAL_SAMPLES + 1) as u32;
        let x = Float::with_val(b, &e + off);
        pts.push(Float::with_val(b, -&x));
        pts.push(x);
    }
    let mut sup0 = zero(w);
    let mut sup2 = zero(w);
    for x in &pts {
        let j = u.eval(x, 2, w);
        let v = Float::with_val(b, x * &j[0]).abs();
        let v2 = Float::with_val(b, Float::with_val(b, &j[1] * 2u32) + Float::with_val(b, x * &j[2])).abs();
        if v > sup0 {
            sup0 = v;
        }
        if v2 > sup2 {
            sup2 = v2;
        }
    }
    let quarter = Float::with_val(b, &d / 4u32);
    let inv = Float::with_val(b, d.recip_ref());
    rep.push(Check::real("|Q~|_0 > delta/4", &sup0, Relation::Gt, &quarter));
    rep.push(Check::real("|Q~''|_0 >= 1/delta", &sup2, Relation::Ge, &inv));
    let from0 = Float::with_val(b, &quarter / &e);
    let implied = if from0 > inv { from0.clone() } else { inv.clone() };
    let floor = Float::with_val(b, Float::with_val(b, e.sqrt_ref()) * 2u32).recip();
    rep.push(Check::real("implied C >= 1/(2 sqrt(eps))", &implied, Relation::Ge, &floor));
    rep.datum("sup_q_tilde", fmt_big(&sup0));
    rep.datum("sup_q_tilde_second", fmt_big(&sup2));
    rep.datum("implied_c", fmt_big(&implied));
    rep.datum("implied_c_from_sup", fmt_big(&Float::with_val(b, &sup0 / &e)));
    rep.datum("implied_c_from_second", fmt_big(&sup2));
    rep.datum("one_over_two_sqrt_eps", fmt_big(&floor));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CantorParams {
        CantorParams::parse("2", "1/4").unwrap()
    }

    #[test]
    fn delta_schedule() {
        assert_eq!(delta_level(0), 0);
        assert_eq!(delta_level(1), 0);
        assert_eq!(delta_level(2), 1);
        assert_eq!(delta_level(3), 1);
        assert_eq!(delta_level(4), 2);
        assert_eq!(delta_level(255), 7);
    }

    #[test]
    fn q_choice() {
        assert_eq!(seom_q(1, 300), (257, false));
        assert_eq!(seom_q(1, 100), (65, true));
        assert_eq!(seom_q(0, 2), (0, true));
        assert_eq!(seom_q(0, 3), (2, true));
    }

    #[test]
    fn violation_order() {
        assert_eq!(violation_p(&Rational::from(3)).unwrap(), 4);
        assert_eq!(violation_p(&Rational::from((5, 2))).unwrap(), 6);
        assert!(violation_p(&Rational::from(2)).is_err());
    }

    #[test]
    fn interpolates_and_reproduces_polynomials() {
        let p = params();
        let f = JetFn::exp(Rational::from(1));
        let op = Operator::build(&f, OperatorConfig::new(&p, 15, 1)).unwrap();
        for x in &op.nodes[..16] {
            let v = op.eval(x);
            let fx = f.value(x, op.work).unwrap();
            let e = Float::with_val(64, &v.values[0] - &fx).abs() / fx;
            assert!(e < 1e-25, "{}", e);
        }
        let g = JetFn::poly(vec![Rational::from(1), Rational::from(-2), Rational::from(3)]);
        let op = Operator::build(&g, OperatorConfig::new(&p, 7, 0)).unwrap();
        let r = op.eval(&op.nodes[5]);
        for n in 3..=7 {
            assert!(r.terms[n][0] < 1e-50);
        }
        // deep in the middle gap only the first two terms survive
        let mid = op.eval(&Float::with_val(256, 0.5));
        assert!(mid.terms[2..].iter().all(|t| t[0].is_zero()));
    }

    #[test]
    fn interval_example_constant() {
        let r = interval_demo(&params(), &Rational::from((1, 10000)), &Rational::from((1, 50))).unwrap();
        assert!(r.pass, "{:?}", r.checks);
        let c: f64 = r.data["implied_c"].as_str().unwrap().parse().unwrap();
        assert!((c - 50.0).abs() < 0.5);
    }
}

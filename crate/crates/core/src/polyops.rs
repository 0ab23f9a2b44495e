//! Node polynomials `omega_n`, Lagrange numerators `a_k`, their derivatives,
//! divided differences, Lebesgue functions and Newton partial sums.

use rayon::prelude::*;
use rug::Float;

use crate::approx::JetFn;
use crate::cantor::{eval_point, LevelData, PointExpr};
use crate::error::{Error, Result};
use crate::nodes::NodeSeq;
use crate::numerics::{log2_abs, one, zero, AdaptiveEval, BigReal, Width};

/// `P(x), P'(x), ..., P^{(p_max)}(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyEvalResult {
    pub values: Vec<BigReal>,
}

impl PolyEvalResult {
    pub fn value(&self) -> &BigReal {
        &self.values[0]
    }

    pub fn deriv(&self, j: usize) -> &BigReal {
        &self.values[j]
    }
}

/// `a - b` correctly rounded to `width`.
pub fn diff(a: &BigReal, b: &BigReal, width: Width) -> BigReal {
    Float::with_val(width.bits(), a - b)
}

/// Realises points at the width of `levels`.
pub fn realize(points: &[PointExpr], levels: &LevelData) -> Result<Vec<BigReal>> {
    points
        .iter()
        .map(|p| eval_point(p, levels, levels.width))
        .collect()
}

/// Derivatives of `prod_i (x - r_i)` given the differences `x - r_i`.
/// Multiplying by a linear factor `(x - r)` maps `P^{(j)}` to
/// `(x - r) P^{(j)} + j P^{(j-1)}`.
pub fn product_derivs_from_diffs<'a, I>(diffs: I, p_max: usize, width: Width) -> PolyEvalResult
where
    I: IntoIterator<Item = &'a BigReal>,
{
    let mut v: Vec<BigReal> = (0..=p_max).map(|_| zero(width)).collect();
    v[0] = one(width);
    let mut t = zero(width);
    for d in diffs {
        for j in (1..=p_max).rev() {
            t.assign_mul_u(&v[j - 1], j as u32);
            v[j] *= d;
            v[j] += &t;
        }
        v[0] *= d;
    }
    PolyEvalResult { values: v }
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

/// Derivatives of `prod_i (x - r_i)` at `x`.
pub fn product_derivs(roots: &[BigReal], x: &BigReal, p_max: usize, width: Width) -> PolyEvalResult {
    let diffs: Vec<BigReal> = roots.iter().map(|r| diff(x, r, width)).collect();
    product_derivs_from_diffs(&diffs, p_max, width)
}

/// `a_k(x) = prod_{i != k} (x - x_i)` and derivatives; `k` is 0-based.
pub fn a_k_eval(k: usize, nodes: &[BigReal], x: &BigReal, p_max: usize, width: Width) -> Result<PolyEvalResult> {
    if k >= nodes.len() {
        return Err(Error::IndexOutOfRange(format!("k = {k} of {}", nodes.len())));
    }
    let diffs: Vec<BigReal> = nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, r)| diff(x, r, width))
        .collect();
    Ok(product_derivs_from_diffs(&diffs, p_max, width))
}

/// `|a_k(x_k)|` for every node.
pub fn numerators_at_nodes(nodes: &[BigReal], width: Width) -> Vec<BigReal> {
    (0..nodes.len())
        .into_par_iter()
        .map(|k| {
            let mut acc = one(width);
            for (i, r) in nodes.iter().enumerate() {
                if i != k {
                    acc *= diff(&nodes[k], r, width);
                }
            }
            acc.abs()
        })
        .collect()
}

/// `xi_n(f) = [x_1, ..., x_{n+1}] f`.
#[derive(Clone, Debug, PartialEq)]
pub struct DividedDiff {
    pub order: usize,
    pub value: BigReal,
    pub width: Width,
}

/// `sum_k f(x_k) / prod_{i != k}(x_k - x_i)` for every order `0..=n_max`
/// at width `w`, growing the node set one point at a time.
fn dd_table(f: &JetFn, nodes: &[BigReal], n_max: usize, w: Width) -> Result<Vec<BigReal>> {
    let mut g: Vec<BigReal> = Vec::with_capacity(n_max + 1);
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let xn = &nodes[n];
        let mut prod = one(w);
        for (k, gk) in g.iter_mut().enumerate() {
            let d = diff(&nodes[k], xn, w);
            *gk /= &d;
            prod *= d;
        }
        // prod = prod_{k<n} (x_k - x_n) = (-1)^n prod_{k<n} (x_n - x_k)
        if n % 2 == 1 {
            prod = -prod;
        }
        let fv = f.value(xn, w)?;
        g.push(Float::with_val(w.bits(), fv / prod));
        let mut s = zero(w);
        for gk in &g {
            s += gk;
        }
        out.push(s);
    }
    Ok(out)
}

/// Divided differences of orders `0..=n_max` over the leading nodes of `z`,
/// stabilised by doubling the width until consecutive results agree to
/// `2^rel_tol_log2` relative, or to the same fraction of the a priori size
/// `B_n / n!`. Orders with `B_n = 0` are exactly zero.
pub fn divided_differences(
    f: &JetFn,
    z: &NodeSeq,
    n_max: usize,
    levels: &LevelData,
    rel_tol_log2: i32,
) -> Result<Vec<DividedDiff>> {
    if z.len() < n_max + 1 {
        return Err(Error::IndexOutOfRange(format!(
            "order {n_max} needs {} nodes, have {}",
            n_max + 1,
            z.len()
        )));
    }
    let pts = &z.points[..=n_max];
    let lw = Width::new(64)?;
    let scale: Vec<BigReal> = (0..=n_max)
        .map(|n| f.bound(n as u64, lw).map(|b| b / Float::with_val(64, Float::factorial(n as u32))))
        .collect::<Result<_>>()?;
    let abs_tol: Vec<Option<BigReal>> = scale.iter().map(|b| Some(Float::with_val(64, b << rel_tol_log2))).collect();

    // start from the width at which the largest summand is resolved
    let nodes_lo = realize(pts, levels)?;
    let mut start_bits = levels.width.bits().max(128) as f64;
    for (big, b) in max_term_log2(f, &nodes_lo, lw)?.iter().zip(&scale) {
        if let (Some(big), Some(lb)) = (big, log2_abs(b)) {
            start_bits = start_bits.max(big - lb + (-rel_tol_log2) as f64 + 64.0);
        }
    }
    let start = Width::new(start_bits.ceil() as u32)?;
    let base_width = levels.width;
    let driver = AdaptiveEval::new(start, rel_tol_log2).context("divided differences");
    let result = driver.run_vec(&abs_tol, |w| {
        let lw = levels.with_width(Width::new(w.bits().max(base_width.bits()))?)?;
        let nodes = realize(pts, &lw)?;
        let mut vals = dd_table(f, &nodes, n_max, w)?;
        for (v, b) in vals.iter_mut().zip(&scale) {
            if b.is_zero() {
                *v = zero(w);
            }
        }
        Ok(vals)
    })?;
    Ok(result
        .value
        .into_iter()
        .enumerate()
        .map(|(order, value)| DividedDiff {
            order,
            value,
            width: result.width,
        })
        .collect())
}

/// For each order `n`, `log2 max_{k<=n} |f(x_k)| / |prod_{i<=n, i != k}(x_k - x_i)|`
/// at low precision.
fn max_term_log2(f: &JetFn, nodes: &[BigReal], w: Width) -> Result<Vec<Option<f64>>> {
    let mut lg: Vec<Option<f64>> = Vec::with_capacity(nodes.len());
    let mut out = Vec::with_capacity(nodes.len());
    for (n, xn) in nodes.iter().enumerate() {
        let mut own = log2_abs(&f.value(xn, w)?);
        for k in 0..n {
            let d = log2_abs(&diff(&nodes[k], xn, w)).expect("distinct nodes");
            if let Some(v) = lg[k].as_mut() {
                *v -= d;
            }
            if let Some(v) = own.as_mut() {
                *v -= d;
            }
        }
        lg.push(own);
        out.push(lg.iter().flatten().copied().reduce(f64::max));
    }
    Ok(out)
}

/// Single divided difference over the first `n+1` nodes of `z`.
pub fn divided_difference(
    f: &JetFn,
    z: &NodeSeq,
    n: usize,
    levels: &LevelData,
    rel_tol_log2: i32,
) -> Result<DividedDiff> {
    Ok(divided_differences(f, z, n, levels, rel_tol_log2)?
        .pop()
        .expect("nonempty table"))
}

/// Grid scan of the Lagrange fundamentals: the Lebesgue function
/// `sum_k |a_k(x)| / |a_k(x_k)|` and, per `k`, the largest ratio
/// `|a_k(x)| / |a_k(x_k)|` seen on the grid.
#[derive(Clone, Debug)]
pub struct LagrangeScan {
    pub lebesgue: BigReal,
    pub lebesgue_at: usize,
    pub ratio_max: Vec<BigReal>,
    pub ratio_at: Vec<usize>,
    pub omega_max: BigReal,
    pub numerators: Vec<BigReal>,
}

struct ScanPart {
    lebesgue: BigReal,
    lebesgue_at: usize,
    ratio_max: Vec<BigReal>,
    ratio_at: Vec<usize>,
    omega_max: BigReal,
}

fn scan_point(x: &BigReal, idx: usize, nodes: &[BigReal], inv: &[BigReal], w: Width, part: &mut ScanPart) {
    let diffs: Vec<BigReal> = nodes.iter().map(|r| diff(x, r, w).abs()).collect();
    if let Some(j) = diffs.iter().position(|d| d.is_zero()) {
        // x is the node x_j: a_j(x)/a_j(x_j) = 1 and every other fundamental vanishes
        if part.lebesgue < 1 {
            part.lebesgue = one(w);
            part.lebesgue_at = idx;
        }
        if part.ratio_max[j] < 1 {
            part.ratio_max[j] = one(w);
            part.ratio_at[j] = idx;
        }
        return;
    }
    let mut omega = one(w);
    for d in &diffs {
        omega *= d;
    }
    let mut lam = zero(w);
    for (k, d) in diffs.iter().enumerate() {
        let r = Float::with_val(w.bits(), &inv[k] / d) * &omega;
        lam += &r;
        if r > part.ratio_max[k] {
            part.ratio_at[k] = idx;
            part.ratio_max[k] = r;
        }
    }
    if lam > part.lebesgue {
        part.lebesgue = lam;
        part.lebesgue_at = idx;
    }
    if omega > part.omega_max {
        part.omega_max = omega;
    }
}

pub fn lagrange_scan(nodes: &[BigReal], grid: &[BigReal], width: Width) -> Result<LagrangeScan> {
    if grid.is_empty() || nodes.is_empty() {
        return Err(Error::Parameter("empty grid or node set".into()));
    }
    let numerators = numerators_at_nodes(nodes, width);
    let inv: Vec<BigReal> = numerators
        .iter()
        .map(|a| Float::with_val(width.bits(), a.recip_ref()))
        .collect();
    let n = nodes.len();
    let fresh = || ScanPart {
        lebesgue: zero(width),
        lebesgue_at: 0,
        ratio_max: vec![zero(width); n],
        ratio_at: vec![0; n],
        omega_max: zero(width),
    };
    let merged = grid
        .par_iter()
        .enumerate()
        .fold(fresh, |mut part, (i, x)| {
            scan_point(x, i, nodes, &inv, width, &mut part);
            part
        })
        .reduce(fresh, |mut a, b| {
            // ties resolve to the smaller grid index so results do not depend
            // on how the grid was split
            if b.lebesgue > a.lebesgue || (b.lebesgue == a.lebesgue && b.lebesgue_at < a.lebesgue_at) {
                a.lebesgue = b.lebesgue;
                a.lebesgue_at = b.lebesgue_at;
            }
            for k in 0..n {
                if b.ratio_max[k] > a.ratio_max[k]
                    || (b.ratio_max[k] == a.ratio_max[k] && b.ratio_at[k] < a.ratio_at[k])
                {
                    a.ratio_max[k] = b.ratio_max[k].clone();
                    a.ratio_at[k] = b.ratio_at[k];
                }
            }
            if b.omega_max > a.omega_max {
                a.omega_max = b.omega_max;
            }
            a
        });
    Ok(LagrangeScan {
        lebesgue: merged.lebesgue,
        lebesgue_at: merged.lebesgue_at,
        ratio_max: merged.ratio_max,
        ratio_at: merged.ratio_at,
        omega_max: merged.omega_max,
        numerators,
    })
}

/// Grid maximum of the Lebesgue function; a lower bound for its supremum.
pub fn lebesgue_constant(nodes: &[BigReal], grid: &[BigReal], width: Width) -> Result<BigReal> {
    Ok(lagrange_scan(nodes, grid, width)?.lebesgue)
}

/// `max_x |omega(x)|` over the grid for the node polynomial of `nodes`.
pub fn omega_grid_max(nodes: &[BigReal], grid: &[BigReal], width: Width) -> BigReal {
    grid.par_iter()
        .map(|x| {
            let mut acc = one(width);
            for r in nodes {
                acc *= diff(x, r, width);
            }
            acc.abs()
        })
        .reduce(|| zero(width), |a, b| if b > a { b } else { a })
}

/// Grid maxima of `|omega_n|` for every `n` in `0..=n_max`, sharing the
/// running products.
pub fn omega_grid_max_all(nodes: &[BigReal], n_max: usize, grid: &[BigReal], width: Width) -> Vec<BigReal> {
    grid.par_iter()
        .map(|x| {
            let mut acc = one(width);
            let mut row = Vec::with_capacity(n_max + 1);
            row.push(one(width));
            for r in &nodes[..n_max] {
                acc *= diff(x, r, width);
                row.push(Float::with_val(width.bits(), acc.abs_ref()));
            }
            row
        })
        .reduce(
            || vec![zero(width); n_max + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    if y > *x {
                        *x = y;
                    }
                }
                a
            },
        )
}

/// `S_N(x) = sum_{n<=N} xi_n omega_n(x)` and derivatives up to `p_max`.
pub fn newton_partial_sum_with(
    xi: &[BigReal],
    nodes: &[BigReal],
    x: &BigReal,
    p_max: usize,
    width: Width,
) -> PolyEvalResult {
    let mut omega: Vec<BigReal> = (0..=p_max).map(|_| zero(width)).collect();
    omega[0] = one(width);
    let mut s: Vec<BigReal> = (0..=p_max).map(|_| zero(width)).collect();
    let mut t = zero(width);
    for (n, c) in xi.iter().enumerate() {
        for j in 0..=p_max {
            s[j] += Float::with_val(width.bits(), c * &omega[j]);
        }
        if n + 1 == xi.len() {
            break;
        }
        let d = diff(x, &nodes[n], width);
        for j in (1..=p_max).rev() {
            t.assign_mul_u(&omega[j - 1], j as u32);
            omega[j] *= &d;
            omega[j] += &t;
        }
        omega[0] *= &d;
    }
    PolyEvalResult { values: s }
}

/// Newton partial sum of `f` of degree `n_big` at `x`.
pub fn newton_partial_sum(
    f: &JetFn,
    z: &NodeSeq,
    n_big: usize,
    x: &BigReal,
    p_max: usize,
    levels: &LevelData,
) -> Result<PolyEvalResult> {
    let xi: Vec<BigReal> = divided_differences(f, z, n_big, levels, -96)?
        .into_iter()
        .map(|d| d.value)
        .collect();
    let nodes = realize(&z.points[..=n_big], levels)?;
    let w = Width::new(levels.width.bits().max(crate::numerics::WORK_BITS))?;
    Ok(newton_partial_sum_with(&xi, &nodes, x, p_max, w))
}

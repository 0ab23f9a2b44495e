//! The smooth step `phi`, its derivatives through a bivariate recursion,
//! the gap-adapted cutoff `u_delta`, and the constants `eta_k`, `theta_k`,
//! `A_k` used by the derivative lower bounds near the set.

use std::sync::{Mutex, OnceLock};

use rug::{Float, Integer};

use crate::cantor::{build_levels, CantorParams, LevelData};
use crate::error::{param, Error, Result};
use crate::numerics::{fmt_big, one, zero, BigReal, Width};
use crate::report::{Check, Relation, Report, ReportKind};

/// Polynomial in `(x, tau)` with integer coefficients, `c[a][b]` the
/// coefficient of `tau^a x^b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiPoly {
    pub c: Vec<Vec<Integer>>,
}

impl BiPoly {
    fn zero() -> Self {
        BiPoly { c: Vec::new() }
    }

    fn add_at(&mut self, a: usize, b: usize, v: &Integer) {
        if self.c.len() <= a {
            self.c.resize(a + 1, Vec::new());
        }
        let row = &mut self.c[a];
        if row.len() <= b {
            row.resize(b + 1, Integer::new());
        }
        row[b] += v;
    }

    /// `self * x^b0 tau^a0 * k`.
    fn add_shifted(&mut self, other: &BiPoly, a0: usize, b0: usize, k: i64) {
        for (a, row) in other.c.iter().enumerate() {
            for (b, v) in row.iter().enumerate() {
                if *v != 0 {
                    self.add_at(a + a0, b + b0, &Integer::from(v * k));
                }
            }
        }
    }

    /// `self * p(x)` with `p` given by ascending integer coefficients.
    fn times_x_poly(&self, p: &[i64]) -> BiPoly {
        let mut out = BiPoly::zero();
        for (i, &k) in p.iter().enumerate() {
            if k != 0 {
                out.add_shifted(self, 0, i, k);
            }
        }
        out
    }

    fn d_x(&self) -> BiPoly {
        let mut out = BiPoly::zero();
        for (a, row) in self.c.iter().enumerate() {
            for (b, v) in row.iter().enumerate().skip(1) {
                if *v != 0 {
                    out.add_at(a, b - 1, &Integer::from(v * b as u32));
                }
            }
        }
        out
    }

    /// `tau * d/dtau`.
    fn tau_d_tau(&self) -> BiPoly {
        let mut out = BiPoly::zero();
        for (a, row) in self.c.iter().enumerate().skip(1) {
            for (b, v) in row.iter().enumerate() {
                if *v != 0 {
                    out.add_at(a, b, &Integer::from(v * a as u32));
                }
            }
        }
        out
    }

    fn add(&mut self, other: &BiPoly) {
        self.add_shifted(other, 0, 0, 1);
    }

    pub fn eval(&self, x: &BigReal, tau: &BigReal, width: Width) -> BigReal {
        let b = width.bits();
        let mut acc = zero(width);
        for row in self.c.iter().rev() {
            let mut r = zero(width);
            for v in row.iter().rev() {
                r *= x;
                r += v;
            }
            acc *= tau;
            acc += Float::with_val(b, &r);
        }
        acc
    }
}

/// `Q_k` for `k = 0, 1, ...`: `phi^{(k+1)} = phi tau (x - x^2)^{-2(k+1)} Q_k`.
///
/// Differentiating `phi tau g^{-2k} Q_{k-1}` with `g = x - x^2` gives
/// `Q_k = tau Q_0 Q_{k-1} + r_k Q_{k-1} + g^2 dQ_{k-1}/dx + (1-x)^2 tau dQ_{k-1}/dtau`,
/// `r_k = (1-x)^2 + 2k x (1-x)(2x-1)`.
pub fn q_poly(k: usize) -> BiPoly {
    static CACHE: OnceLock<Mutex<Vec<BiPoly>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        let mut q0 = BiPoly::zero();
        q0.add_at(0, 0, &Integer::from(-1));
        q0.add_at(0, 1, &Integer::from(1));
        q0.add_at(0, 2, &Integer::from(-1));
        Mutex::new(vec![q0])
    });
    let mut v = cache.lock().expect("recursion cache");
    while v.len() <= k {
        let n = v.len();
        let prev = &v[n - 1];
        let kk = n as i64;
        // tau * Q_0 * Q_{k-1}
        let mut next = BiPoly::zero();
        next.add_shifted(&prev.times_x_poly(&[-1, 1, -1]), 1, 0, 1);
        // r_k = 1 - 2x + x^2 + 2k(-x + 3x^2 - 2x^3)
        let r = [1, -2 - 2 * kk, 1 + 6 * kk, -4 * kk];
        next.add(&prev.times_x_poly(&r));
        // (x - x^2)^2 = x^2 - 2x^3 + x^4
        next.add(&prev.d_x().times_x_poly(&[0, 0, 1, -2, 1]));
        next.add(&prev.tau_d_tau().times_x_poly(&[1, -2, 1]));
        v.push(next);
    }
    v[k].clone()
}

const GUARD: u32 = 64;

/// `exp(-1/x)`, `x > 0`.
pub fn tau(x: &BigReal, width: Width) -> BigReal {
    let b = width.bits() + GUARD;
    Float::with_val(b, -Float::with_val(b, x.recip_ref())).exp()
}

/// `1` for `x <= 0`, `0` for `x >= 1`, `exp(tau(x) / (x - 1))` between.
pub fn phi(x: &BigReal, width: Width) -> BigReal {
    if *x <= 0 {
        return one(width);
    }
    if *x >= 1 {
        return zero(width);
    }
    let b = width.bits() + GUARD;
    let t = tau(x, width);
    let xm1 = Float::with_val(b, x - 1u32);
    Float::with_val(width.bits(), Float::with_val(b, &t / &xm1).exp())
}

/// `Q_{k}(x, tau(x))`.
pub fn q_value(k: usize, x: &BigReal, width: Width) -> BigReal {
    let w = Width::new(width.bits() + GUARD).expect("width within cap");
    let t = tau(x, width);
    let xx = Float::with_val(w.bits(), x);
    Float::with_val(width.bits(), q_poly(k).eval(&xx, &t, w))
}

/// `phi^{(k)}(x)`.
pub fn phi_deriv(k: usize, x: &BigReal, width: Width) -> BigReal {
    if k == 0 {
        return phi(x, width);
    }
    if *x <= 0 || *x >= 1 {
        return zero(width);
    }
    let b = width.bits() + GUARD;
    let w = Width::new(b).expect("width within cap");
    let xx = Float::with_val(b, x);
    let t = tau(&xx, width);
    let g = Float::with_val(b, &xx - Float::with_val(b, xx.square_ref()));
    let q = q_poly(k - 1).eval(&xx, &t, w);
    let mut v = phi(&xx, w);
    v *= &t;
    v *= q;
    v /= Float::with_val(b, g.pow_i32(2 * k as i32));
    Float::with_val(width.bits(), v)
}

trait PowI {
    fn pow_i32(&self, e: i32) -> BigReal;
}

impl PowI for BigReal {
    fn pow_i32(&self, e: i32) -> BigReal {
        use rug::ops::Pow;
        Float::with_val(self.prec(), self.pow(e))
    }
}

/// Central difference of order `k` of `phi` at step `h`, an independent
/// estimate of `phi^{(k)}(x)` with error `O(h^2)`.
pub fn phi_finite_difference(k: usize, x: &BigReal, h: &BigReal, width: Width) -> BigReal {
    let b = width.bits();
    let mut acc = zero(width);
    let mut binom = Integer::from(1);
    for i in 0..=k {
        let off = Float::with_val(b, h * (k as i64 - 2 * i as i64)) / 2u32;
        let v = phi(&Float::with_val(b, x + off), width);
        let term = Float::with_val(b, &v * &binom);
        if i % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
        binom *= (k - i) as u32;
        binom /= (i + 1) as u32;
    }
    let hk = h.clone().pow_i32(k as i32);
    Float::with_val(b, acc / hk)
}

/// Compares the recursion with a 512-bit central difference at step
/// `1e-8`; fails beyond relative `rel_tol`.
pub fn check_recursion(k: usize, x: &BigReal, rel_tol: f64) -> Result<()> {
    let w = Width::new(512)?;
    let h = Float::with_val(512, 1e-8);
    let rec = phi_deriv(k, x, w);
    let fd = phi_finite_difference(k, x, &h, w);
    let d = Float::with_val(64, &rec - &fd).abs();
    let s = Float::with_val(64, rec.abs_ref()).max(&Float::with_val(64, fd.abs_ref()));
    if d > s * rel_tol && d > 1e-60 {
        return Err(Error::Consistency(format!(
            "recursion verification failure: order {k} at {}: recursion {} vs difference {}",
            fmt_big(x),
            fmt_big(&rec),
            fmt_big(&fd)
        )));
    }
    Ok(())
}

/// Where the cutoff equals one.
#[derive(Clone, Debug)]
enum Support {
    /// The Cantor-type set, levels deep enough that `ell_depth < 2 delta`.
    Cantor(LevelData),
    /// A closed interval.
    Interval { lo: BigReal, hi: BigReal },
}

/// `u_delta`: one on the set, a `phi` collar of width `delta` on each side of
/// every gap of length at least `2 delta` and outside the hull, zero
/// further away, and one on shorter gaps.
#[derive(Clone, Debug)]
pub struct CutoffFn {
    pub delta: BigReal,
    support: Support,
    width: Width,
}

/// Which branch of the cutoff a point falls in.
#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    One,
    Zero,
    /// `phi((x - a) / delta)`, rising edge away from `a`.
    Rising(BigReal),
    /// `phi((b - x) / delta)`.
    Falling(BigReal),
}

impl CutoffFn {
    /// Cutoff for the Cantor-type set of `params`.
    pub fn for_set(params: &CantorParams, delta: &BigReal, width: Width) -> Result<CutoffFn> {
        if *delta <= 0 {
            return Err(param("delta must be positive"));
        }
        let mut depth = 1u32;
        loop {
            let levels = build_levels(params, depth, width)?;
            let two_d = Float::with_val(width.bits(), delta * 2u32);
            if *levels.ell(depth)? < two_d {
                return Ok(CutoffFn {
                    delta: Float::with_val(width.bits(), delta),
                    support: Support::Cantor(levels),
                    width,
                });
            }
            depth += 1;
            if depth > 64 {
                return Err(param("delta too small for the level budget"));
            }
        }
    }

    /// Cutoff for `[lo, hi]`.
    pub fn for_interval(lo: &BigReal, hi: &BigReal, delta: &BigReal, width: Width) -> Result<CutoffFn> {
        if *delta <= 0 || lo > hi {
            return Err(param("need delta > 0 and lo <= hi"));
        }
        Ok(CutoffFn {
            delta: Float::with_val(width.bits(), delta),
            support: Support::Interval {
                lo: Float::with_val(width.bits(), lo),
                hi: Float::with_val(width.bits(), hi),
            },
            width,
        })
    }

    fn hull(&self) -> (BigReal, BigReal) {
        match &self.support {
            Support::Cantor(_) => (zero(self.width), one(self.width)),
            Support::Interval { lo, hi } => (lo.clone(), hi.clone()),
        }
    }

    /// Gaps `(a, b)` of length at least `2 delta`, in increasing order.
    pub fn wide_gaps(&self) -> Vec<(BigReal, BigReal)> {
        let mut out = Vec::new();
        if let Support::Cantor(levels) = &self.support {
            let two_d = Float::with_val(self.width.bits(), &self.delta * 2u32);
            let mut stack = vec![(zero(self.width), 0u32)];
            while let Some((a, t)) = stack.pop() {
                if t >= levels.depth {
                    continue;
                }
                let h = levels.gap(t).expect("level in range");
                if *h < two_d {
                    continue;
                }
                let l_next = levels.ell(t + 1).expect("level in range");
                let ga = Float::with_val(self.width.bits(), &a + l_next);
                let gb = Float::with_val(self.width.bits(), &ga + h);
                stack.push((gb.clone(), t + 1));
                stack.push((a, t + 1));
                out.push((ga, gb));
            }
        }
        out.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
        out
    }

    fn gap_piece(&self, x: &BigReal, a: &BigReal, b: &BigReal) -> Piece {
        let bits = self.width.bits();
        if Float::with_val(bits, b - a) < Float::with_val(bits, &self.delta * 2u32) {
            return Piece::One;
        }
        if *x < Float::with_val(bits, a + &self.delta) {
            Piece::Rising(a.clone())
        } else if *x > Float::with_val(bits, b - &self.delta) {
            Piece::Falling(b.clone())
        } else {
            Piece::Zero
        }
    }

    pub fn piece(&self, x: &BigReal) -> Piece {
        let bits = self.width.bits();
        let (lo, hi) = self.hull();
        if *x < lo {
            return if *x <= Float::with_val(bits, &lo - &self.delta) {
                Piece::Zero
            } else {
                Piece::Falling(lo)
            };
        }
        if *x > hi {
            return if *x >= Float::with_val(bits, &hi + &self.delta) {
                Piece::Zero
            } else {
                Piece::Rising(hi)
            };
        }
        let levels = match &self.support {
            Support::Interval { .. } => return Piece::One,
            Support::Cantor(l) => l,
        };
        let two_d = Float::with_val(bits, &self.delta * 2u32);
        let mut a = zero(self.width);
        let mut t = 0u32;
        loop {
            let len = levels.ell(t).expect("level in range");
            if *len < two_d || t >= levels.depth {
                return Piece::One;
            }
            let l_next = levels.ell(t + 1).expect("level in range");
            let ga = Float::with_val(bits, &a + l_next);
            let gb = Float::with_val(bits, Float::with_val(bits, &a + len) - l_next);
            if *x <= ga {
                t += 1;
            } else if *x >= gb {
                a = gb;
                t += 1;
            } else {
                return self.gap_piece(x, &ga, &gb);
            }
        }
    }

    /// `u_delta^{(j)}(x)` for `j <= j_max`.
    pub fn eval(&self, x: &BigReal, j_max: usize, width: Width) -> Vec<BigReal> {
        let mut out = vec![zero(width); j_max + 1];
        let b = width.bits();
        match self.piece(x) {
            Piece::One => out[0] = one(width),
            Piece::Zero => {}
            Piece::Rising(a) => {
                let t = Float::with_val(b + GUARD, Float::with_val(b + GUARD, x - &a) / &self.delta);
                let mut scale = one(width);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = Float::with_val(b, phi_deriv(j, &t, width) * &scale);
                    scale /= &self.delta;
                }
            }
            Piece::Falling(c) => {
                let t = Float::with_val(b + GUARD, Float::with_val(b + GUARD, &c - x) / &self.delta);
                let mut scale = one(width);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = Float::with_val(b, phi_deriv(j, &t, width) * &scale);
                    scale /= &self.delta;
                    scale = -scale;
                }
            }
        }
        out
    }

    pub fn value(&self, x: &BigReal, width: Width) -> BigReal {
        self.eval(x, 0, width).swap_remove(0)
    }

    /// `per_collar` evenly spaced interior points of every collar, outer
    /// collars included.
    pub fn collar_samples(&self, per_collar: usize) -> Vec<BigReal> {
        let bits = self.width.bits();
        let (lo, hi) = self.hull();
        let mut edges: Vec<(BigReal, bool)> = vec![(lo, false), (hi, true)];
        for (a, b) in self.wide_gaps() {
            edges.push((a, true));
            edges.push((b, false));
        }
        let mut out = Vec::with_capacity(edges.len() * per_collar);
        for (e, rising) in edges {
            for i in 1..=per_collar {
                let off = Float::with_val(bits, &self.delta * i as u32) / (per_collar + 1) as u32;
                out.push(if rising {
                    Float::with_val(bits, &e + off)
                } else {
                    Float::with_val(bits, &e - off)
                });
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
        out
    }
}

/// `eta_k`, `theta_k`, `A_k` for even `k`.
#[derive(Clone, Debug)]
pub struct ThetaConstants {
    pub k: usize,
    pub eta_k: BigReal,
    pub eta_k1: BigReal,
    pub theta: BigReal,
    pub a_k: BigReal,
}

/// `Q_k(1, e^{-1}) = (-1)^{k+1} e^{-k}`.
pub fn q_at_one(k: usize, width: Width) -> BigReal {
    let e = Float::with_val(width.bits(), -(k as i64)).exp();
    if k % 2 == 0 {
        -e
    } else {
        e
    }
}

const ETA_SAMPLES: usize = 2048;

/// Smallest `eta` with `|Q_k(tau(x)) - Q_k(tau(1))| <= e^{-k} / 2` on
/// `[eta, 1]`, by bisection on the rightmost crossing; the property is then
/// checked on a fine sample and the search restarted left of any violation.
pub fn eta(k: usize, width: Width) -> Result<BigReal> {
    let b = width.bits();
    let at1 = q_at_one(k, width);
    let lim = Float::with_val(b, Float::with_val(b, -(k as i64)).exp() / 2u32);
    let excess = |x: &BigReal| -> BigReal {
        let v = Float::with_val(b, q_value(k, x, width) - &at1).abs();
        v - &lim
    };
    let kf = Float::with_val(b, k as u32);
    let e = Float::with_val(b, 1).exp();
    let mut width_left = Float::with_val(b, Float::with_val(b, &kf * &e).sqrt() * 2u32).recip();
    let mut lo = Float::with_val(b, 1 - Float::with_val(b, &width_left));
    while excess(&lo) <= 0 {
        width_left *= 2u32;
        if width_left >= 1 {
            return Err(Error::NoConvergence(format!("no bracket for eta_{k}")));
        }
        lo = Float::with_val(b, 1 - Float::with_val(b, &width_left));
    }
    let mut hi = one(width);
    loop {
        for _ in 0..(b as usize) {
            let mid = Float::with_val(b, Float::with_val(b, &lo + &hi) / 2u32);
            if mid == lo || mid == hi {
                break;
            }
            if excess(&mid) > 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // the property must hold on [hi, 1]
        let span = Float::with_val(b, 1 - Float::with_val(b, &hi));
        let mut bad = None;
        for i in (0..ETA_SAMPLES).rev() {
            let x = Float::with_val(b, &hi + Float::with_val(b, &span * i as u32) / ETA_SAMPLES as u32);
            if excess(&x) > 0 {
                bad = Some(x);
                break;
            }
        }
        match bad {
            None => return Ok(hi),
            Some(x) => {
                lo = x;
                hi = one(width);
            }
        }
    }
}

/// `eta_k`, `eta_{k-1}`, `theta_k = max(eta_k, eta_{k-1}, 1 - 1/(4 sqrt(k e)))`
/// and `A_k = phi(theta) tau(theta) (theta - theta^2)^{-2k} / (2 e^k)`.
pub fn theta_constants(k: usize, width: Width) -> Result<ThetaConstants> {
    if k < 2 || k % 2 == 1 {
        return Err(param(format!("k must be even and at least 2, got {k}")));
    }
    let b = width.bits();
    let eta_k = eta(k, width)?;
    let eta_k1 = eta(k - 1, width)?;
    let e = Float::with_val(b, 1).exp();
    let floor = Float::with_val(
        b,
        1 - Float::with_val(b, Float::with_val(b, Float::with_val(b, k as u32) * &e).sqrt() * 4u32).recip(),
    );
    let mut theta = eta_k.clone();
    if eta_k1 > theta {
        theta = eta_k1.clone();
    }
    if floor > theta {
        theta = floor;
    }
    let g = Float::with_val(b, &theta - Float::with_val(b, theta.square_ref()));
    let mut a_k = phi(&theta, width) * tau(&theta, width);
    a_k /= g.pow_i32(2 * k as i32);
    a_k /= Float::with_val(b, Float::with_val(b, k as u32).exp() * 2u32);
    Ok(ThetaConstants {
        k,
        eta_k,
        eta_k1,
        theta,
        a_k: Float::with_val(b, a_k),
    })
}

/// Checks at `theta_k`: the inequality
/// `theta Q_{k-1} - 2k (theta - theta^2)^2 |Q_{k-2}| > 1/(2 e^k)`, and its
/// consequence `theta phi^{(k)}(theta) - 2k phi^{(k-1)}(theta) >= A_k`.
pub fn verify_theta(k: usize, width: Width) -> Result<Report> {
    let c = theta_constants(k, width)?;
    let b = width.bits();
    let params = CantorParams::parse("2", "1/4")?;
    let mut r = Report::new(
        "cutoff-theta",
        "lower bounds for the derivatives of phi near 1 at theta_k",
        ReportKind::Assertion,
        &params,
    );
    r.param("k", k as u64);
    r.width_bits = b;
    r.datum("eta_k", fmt_big(&c.eta_k));
    r.datum("eta_k_minus_1", fmt_big(&c.eta_k1));
    r.datum("theta_k", fmt_big(&c.theta));
    r.datum("A_k", fmt_big(&c.a_k));
    let t = &c.theta;
    let g = Float::with_val(b, t - Float::with_val(b, t.square_ref()));
    let lhs = Float::with_val(b, t * q_value(k - 1, t, width))
        - Float::with_val(b, g.pow_i32(2) * (2 * k) as u32) * q_value(k - 2, t, width).abs();
    let rhs = Float::with_val(b, Float::with_val(b, k as u32).exp() * 2u32).recip();
    r.push(Check::real("theta Q_{k-1} - 2k g^2 |Q_{k-2}| > 1/(2e^k)", &lhs, Relation::Gt, &rhs));
    let comb = Float::with_val(b, t * phi_deriv(k, t, width))
        - Float::with_val(b, phi_deriv(k - 1, t, width) * (2 * k) as u32);
    r.push(Check::real("theta phi^{(k)} - 2k phi^{(k-1)} >= A_k", &comb, Relation::Ge, &c.a_k));
    let floor = Float::with_val(b, 7u32) / 8u32;
    r.push(Check::real("theta_k > 7/8", t, Relation::Gt, &floor));
    Ok(r)
}

/// `max_t |phi^{(j)}(t)|` over `samples` interior points of `(0, 1)`.
pub fn phi_sup(j: usize, samples: usize, width: Width) -> BigReal {
    let mut m = zero(width);
    for i in 1..=samples {
        let t = Float::with_val(width.bits(), i as u32) / (samples + 1) as u32;
        let v = phi_deriv(j, &t, width).abs();
        if v > m {
            m = v;
        }
    }
    m
}

//! The twelve acceptance criteria. Prints one line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use cantor_lab::approx::{verify_jackson, JetFn, DEFAULT_TAIL};
use cantor_lab::cantor::{build_levels, eval_point, CantorParams, PointExpr};
use cantor_lab::cutoff::{phi, phi_deriv, CutoffFn};
use cantor_lab::extension::{interval_demo, verify_term_decay, violation_demo, OperatorConfig};
use cantor_lab::nodes::{first_nonuniform_prefix, next_node, NodeSeq};
use cantor_lab::numerics::Width;
use cantor_lab::report::{reports_json, Report};
use cantor_lab::verify::{default_grid_depth, not_leja_sigma, scan_checks, verify_exponents, verify_markov, verify_not_leja};
use rug::{Float, Integer, Rational};

// tolerances
const SIGMA_TOL: f64 = 1e-10;
const FD_REL_TOL: f64 = 1e-4;
const FD_BITS: u32 = 512;
const FD_STEP: f64 = 1e-8;
const C_J_SPREAD: f64 = 2.0;
const INTERVAL_C: f64 = 50.0;
const INTERVAL_REL: f64 = 0.01;

type Outcome = (bool, String);

fn canonical() -> CantorParams {
    CantorParams::parse("2", "1/4").unwrap()
}

/// Nodes by the doubling rule: `x_{2^k + j} = x_j + (-1)^{kappa-1} ell_k`
/// with `kappa` the number of binary ones of `2^k + j - 1`.
fn rule_nodes(n: usize) -> Vec<PointExpr> {
    let mut out = vec![PointExpr::zero(), PointExpr::one()];
    let mut k = 1u32;
    while out.len() < n {
        let base = 1usize << k;
        for j in 1..=base {
            if out.len() >= n {
                break;
            }
            let kappa = ((base + j - 1) as u64).count_ones();
            let sign = if kappa % 2 == 1 { 1 } else { -1 };
            out.push(out[j - 1].add(&PointExpr::from_terms(&[(k, sign)])));
        }
        k += 1;
    }
    out
}

fn node_combinatorics() -> Outcome {
    let n = 4096;
    let z = NodeSeq::first(n);
    let uniform = first_nonuniform_prefix(&z).is_none();
    let next_ok = (0..n - 1).all(|m| next_node(m as u64) == z.points[m + 1]);
    let rule_ok = rule_nodes(n) == z.points;
    let params = canonical();
    let levels = build_levels(&params, 3, Width::new(128).unwrap()).unwrap();
    let mut idx: Vec<usize> = (1..=8).collect();
    let vals: Vec<Float> = z.points[..8].iter().map(|p| eval_point(p, &levels, levels.width).unwrap()).collect();
    idx.sort_by(|a, b| vals[a - 1].partial_cmp(&vals[b - 1]).unwrap());
    let order_ok = idx == [1, 5, 7, 3, 4, 8, 6, 2];
    (
        uniform && next_ok && rule_ok && order_ok,
        format!("uniform prefixes {uniform}, closed-form next node {next_ok}, doubling rule {rule_ok}, first-8 ascending order {idx:?}"),
    )
}

fn exponents() -> Outcome {
    let mut msg = Vec::new();
    let mut ok = true;
    for a in ["2", "5/2"] {
        let p = CantorParams::parse(a, "1/4").unwrap();
        let r = verify_exponents(&p, 2..=1026).unwrap();
        ok &= r.pass;
        msg.push(format!("alpha {a}: {} checks, pass {}", r.checks.len(), r.pass));
    }
    (ok, msg.join("; "))
}

fn worst_margin(rs: &[Report]) -> f64 {
    rs.iter()
        .filter_map(|r| r.worst().and_then(|c| c.margin_log2))
        .fold(f64::INFINITY, f64::min)
}

fn scans() -> (Outcome, Outcome) {
    let params = canonical();
    let mut lemma = Vec::new();
    let mut leb = Vec::new();
    for n in 1..=256 {
        let r = scan_checks(&params, n, None).unwrap();
        lemma.push(r.lemma);
        leb.push(r.lebesgue);
    }
    let fl = lemma.iter().filter(|r| !r.pass).count();
    let fb = leb.iter().filter(|r| !r.pass).count();
    (
        (fl == 0, format!("N+1 in 2..=257, {fl} failures, smallest margin 2^{:.3}", worst_margin(&lemma))),
        (fb == 0, format!("N+1 in 2..=257, {fb} failures, smallest margin 2^{:.3}", worst_margin(&leb))),
    )
}

fn markov() -> Outcome {
    let params = canonical();
    let mut reps = Vec::new();
    for s in 1..=7u32 {
        for p in 1..=4usize.min((1 << s) - 1) {
            reps.push(verify_markov(&params, s, p, None).unwrap());
        }
    }
    let fails = reps.iter().filter(|r| !r.pass).count();
    (
        fails == 0,
        format!("{} runs (s <= 7, p <= min(4, N - 1)), {fails} failures, smallest margin 2^{:.3}", reps.len(), worst_margin(&reps)),
    )
}

fn not_leja() -> Outcome {
    let w = Width::new(128).unwrap();
    let l1 = Float::with_val(w.bits(), 0.25);
    let l2 = Float::with_val(w.bits(), 0.0625);
    let sigma = not_leja_sigma(&l1, &l2).to_f64();
    let sigma_ok = (sigma - 0.9375).abs() <= SIGMA_TOL;
    let r = verify_not_leja(&canonical(), &[6, 7, 8, 9, 10]).unwrap();
    (sigma_ok && r.pass, format!("sigma = {sigma}, s in 6..=10 report pass {}", r.pass))
}

/// Central difference of order `k` of `phi`, step `h`.
fn fd(k: usize, x: &Float, h: &Float) -> Float {
    let w = Width::new(FD_BITS).unwrap();
    let mut acc = Float::new(FD_BITS);
    for i in 0..=k {
        let c = Integer::from(Integer::binomial_u(k as u32, i as u32));
        let off = Float::with_val(FD_BITS, h * (k as i64 - 2 * i as i64)) / 2u32;
        let v = phi(&Float::with_val(FD_BITS, x + off), w) * c;
        if i % 2 == 0 {
            acc += v;
        } else {
            acc -= v;
        }
    }
    let mut hk = Float::with_val(FD_BITS, 1);
    for _ in 0..k {
        hk *= h;
    }
    acc / hk
}

fn cutoff() -> Outcome {
    let w = Width::new(FD_BITS).unwrap();
    let h = Float::with_val(FD_BITS, FD_STEP);
    let mut worst = 0f64;
    for i in 0..100 {
        let x = Float::with_val(FD_BITS, (i as f64 + 0.5) / 100.0);
        for k in 1..=6 {
            let a = phi_deriv(k, &x, w);
            let b = fd(k, &x, &h);
            let s = Float::with_val(64, a.abs_ref()).max(&Float::with_val(64, b.abs_ref()));
            if s > 1e-60 {
                let rel = (Float::with_val(64, &a - &b).abs() / s).to_f64();
                worst = worst.max(rel);
            }
        }
    }
    let fd_ok = worst <= FD_REL_TOL;
    let half = phi(&Float::with_val(128, 0.5), Width::new(128).unwrap());
    let half_ok = half > 0.5;

    let params = canonical();
    let lw = Width::new(320).unwrap();
    let levels = build_levels(&params, 4, lw).unwrap();
    let u = CutoffFn::for_set(&params, levels.ell(2).unwrap(), lw).unwrap();
    let mut range_ok = true;
    for i in 0..10_000 {
        let x = Float::with_val(320, -2.0 + 4.0 * (i as f64 + 0.5) / 10_000.0);
        let v = u.value(&x, lw);
        range_ok &= v >= 0 && v <= 1;
    }

    // c_j = max over collars of |u^{(j)}| delta^j
    let mut spread = 0f64;
    for j in 0..=6usize {
        let mut cs = Vec::new();
        for s in 1..=3u32 {
            let d = levels.ell(s).unwrap();
            let us = CutoffFn::for_set(&params, d, lw).unwrap();
            let mut m = Float::new(64);
            for x in us.collar_samples(64) {
                let v = Float::with_val(64, us.eval(&x, j, lw)[j].abs_ref()) * Float::with_val(64, d.clone()).pow_u(j);
                if v > m {
                    m = v;
                }
            }
            cs.push(m.to_f64());
        }
        let (lo, hi) = cs.iter().fold((f64::INFINITY, 0f64), |(a, b), &c| (a.min(c), b.max(c)));
        if j > 0 {
            spread = spread.max(hi / lo);
        }
    }
    let spread_ok = spread <= C_J_SPREAD;
    (
        fd_ok && half_ok && range_ok && spread_ok,
        format!(
            "worst relative gap to differences {worst:.2e}, phi(1/2) = {:.6}, u in [0,1] on 1e4 samples {range_ok}, c_j spread over three deltas {spread:.4}",
            half.to_f64()
        ),
    )
}

trait PowU {
    fn pow_u(self, e: usize) -> Float;
}

impl PowU for Float {
    fn pow_u(self, e: usize) -> Float {
        use rug::ops::Pow;
        self.pow(e as u32)
    }
}

fn jackson() -> Outcome {
    let params = canonical();
    let f = JetFn::exp(Rational::from(1));
    let ns = [15, 31, 63, 127, 255];
    let depth = default_grid_depth(255 + DEFAULT_TAIL + 1);
    let mut msg = Vec::new();
    let mut ok = true;
    for w in [0u32, 1] {
        let r = verify_jackson(&f, &params, w, &ns, depth).unwrap();
        ok &= r.pass;
        let ratios = r.data.get("ratios").map(|v| v.to_string()).unwrap_or_default();
        msg.push(format!("w = {w}: pass {} ratios {ratios}", r.pass));
    }
    (ok, msg.join("; "))
}

fn term_decay() -> Outcome {
    let params = canonical();
    let f = JetFn::exp(Rational::from(1));
    let mut ok = true;
    let mut msg = Vec::new();
    for p in 0..=2 {
        let (r, _) = verify_term_decay(&f, p, &OperatorConfig::new(&params, 255, p)).unwrap();
        ok &= r.pass;
        msg.push(format!("p = {p}: pass {}", r.pass));
    }
    (ok, msg.join(", "))
}

fn violation() -> Outcome {
    let params = CantorParams::parse("3", "1/4").unwrap();
    let r = violation_demo(&params, &[4, 5, 6], &[3, 5]).unwrap();
    let ok = !r.checks.is_empty() && r.checks.iter().all(|c| c.pass);
    (ok, format!("p = {}, ratios q=3 {}, q=5 {}", r.params["p"], r.data["ratios_q3"], r.data["ratios_q5"]))
}

fn interval() -> Outcome {
    let r = interval_demo(&canonical(), &Rational::from((1, 10_000)), &Rational::from((1, 50))).unwrap();
    let c: f64 = r.data["implied_c"].as_str().unwrap().parse().unwrap();
    let ok = r.pass && (c - INTERVAL_C).abs() <= INTERVAL_REL * INTERVAL_C;
    (ok, format!("implied C = {c}, measured sup {}, second-derivative sup {}", r.data["sup_q_tilde"], r.data["sup_q_tilde_second"]))
}

fn determinism() -> Outcome {
    let once = || {
        let p = canonical();
        let p3 = CantorParams::parse("3", "1/4").unwrap();
        let reps = vec![
            scan_checks(&p, 40, None).unwrap().lemma,
            verify_markov(&p, 4, 2, None).unwrap(),
            violation_demo(&p3, &[4, 5], &[3]).unwrap(),
            interval_demo(&p, &Rational::from((1, 10_000)), &Rational::from((1, 50))).unwrap(),
        ];
        reports_json(&reps)
    };
    let (a, b) = (once(), once());
    (a == b, format!("{} bytes, identical {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed().as_secs_f64())
    };
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut push = |i: usize, name: &'static str, (o, secs): (Outcome, f64)| results.push((i, name, o, secs));
    push(1, "node combinatorics", timed(&node_combinatorics));
    push(2, "exponent inequalities", timed(&exponents));
    let t = Instant::now();
    let (lemma, leb) = scans();
    let el = t.elapsed().as_secs_f64();
    push(3, "numerator maximum", (lemma, el));
    push(4, "Lebesgue constant bound", (leb, el));
    push(5, "Markov factor sandwich", timed(&markov));
    push(6, "non-Leja example", timed(&not_leja));
    push(7, "cutoff correctness", timed(&cutoff));
    push(8, "Jackson-type trend", timed(&jackson));
    push(9, "extension operator terms", timed(&term_decay));
    push(10, "failure for alpha > 2", timed(&violation));
    push(11, "interval example", timed(&interval));
    push(12, "determinism", timed(&determinism));
    results.sort_by_key(|r| r.0);
    let mut all = true;
    for (i, name, (ok, detail), secs) in &results {
        all &= ok;
        let tag = if *ok { "PASS" } else { "FAIL" };
        println!("criterion {i:>2} [{tag}] {name} ({secs:.1}s): {detail}");
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use cantor_lab::approx::JetFn;
use cantor_lab::cantor::CantorParams;
use cantor_lab::extension::{
    delta_level, verify_seom, w_eval, write_term_csv, Operator, OperatorConfig, TermRow,
};
use cantor_lab::polyops::product_derivs;
use rug::{Float, Integer, Rational};

fn params() -> CantorParams {
    CantorParams::parse("2", "1/4").unwrap()
}

#[test]
fn reproduces_polynomials_on_the_set() {
    let f = JetFn::poly(vec![Rational::from(2), Rational::from((-1, 3)), Rational::from(0), Rational::from(5)]);
    let op = Operator::build(&f, OperatorConfig::new(&params(), 15, 0)).unwrap();
    for x in op.set_grid().unwrap() {
        let v = op.eval(&x).values.swap_remove(0);
        let fx = f.value(&x, op.work).unwrap();
        assert!(Float::with_val(64, &v - &fx).abs() <= Float::with_val(64, fx.abs_ref()) * 1e-40 + 1e-50);
    }
}

#[test]
fn derivative_matches_one_sided_differences_at_a_gap_edge() {
    let f = JetFn::exp(Rational::from(1));
    let op = Operator::build(&f, OperatorConfig::new(&params(), 31, 1)).unwrap();
    let a = Float::with_val(320, 0.25);
    let w_a = op.eval(&a);
    let mut prev_err: Option<f64> = None;
    for k in 10..=20 {
        let h = Float::with_val(320, Float::i_exp(1, -k));
        for sign in [1i32, -1] {
            let x = Float::with_val(320, &a + Float::with_val(320, &h * sign));
            let q = Float::with_val(256, &op.eval(&x).values[0] - &w_a.values[0]) / Float::with_val(256, &h * sign);
            let err = Float::with_val(64, &q - &w_a.values[1]).abs().to_f64();
            assert!(err < 64.0 * h.to_f64(), "h = 2^-{k}, side {sign}: {err}");
            if sign == 1 {
                if let Some(p) = prev_err {
                    assert!(err <= p, "error should shrink with h");
                }
                prev_err = Some(err);
            }
        }
    }
}

#[test]
fn terms_obey_the_leibniz_triangle_bound() {
    let f = JetFn::exp(Rational::from(1));
    let p = 2;
    let mut cfg = OperatorConfig::new(&params(), 31, p);
    cfg.per_collar = 8;
    let op = Operator::build(&f, cfg).unwrap();
    let w = op.work;
    for x in op.samples().unwrap().iter().step_by(7) {
        let r = op.eval(x);
        for n in 0..=31usize {
            let s = delta_level(n) as usize;
            let u = op.cutoffs[s].eval(x, p, w);
            let om = product_derivs(&op.nodes[..n], x, p, w).values;
            let mut bound = Float::new(w.bits());
            for j in 0..=p {
                let c = Integer::from(Integer::binomial_u(p as u32, j as u32));
                bound += Float::with_val(w.bits(), &u[j] * &om[p - j]).abs() * c;
            }
            bound *= Float::with_val(w.bits(), op.xi[n].abs_ref());
            let slack = Float::with_val(w.bits(), &bound >> 80u32);
            assert!(r.terms[n][p] <= bound + slack, "N = {n}");
        }
    }
}

#[test]
fn only_early_terms_survive_deep_in_a_gap() {
    let f = JetFn::exp(Rational::from(1));
    let cfg = OperatorConfig::new(&params(), 63, 0);
    let x = Float::with_val(256, 0.5);
    let r = w_eval(&f, &x, &cfg).unwrap();
    assert!(r.terms[2..].iter().all(|t| t[0].is_zero()));
    let first_two = Float::with_val(256, &r.terms[0][0] + &r.terms[1][0]);
    assert!(first_two > 0);
    assert!(w_eval(&f, &Float::with_val(64, 3), &cfg).is_err());
}

#[test]
fn extended_node_bound_sweep_is_bounded() {
    let r = verify_seom(&params(), 0, 32, 16).unwrap();
    let run: f64 = r.data["running_max"].as_str().unwrap().parse().unwrap();
    assert!(run.is_finite() && run < 10.0, "running max {run}");
    assert_eq!(r.checks.len(), 32);
    assert!(r.checks.iter().all(|c| c.q.is_some()));
}

#[test]
fn term_table_has_fixed_columns() {
    let rows = vec![TermRow {
        n: 0,
        delta: "1".into(),
        xi_abs: "2".into(),
        term_sup: "3".into(),
        cumulative: "3".into(),
    }];
    let mut out = Vec::new();
    write_term_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "N,delta,xi_abs,term_sup,cumulative");
}

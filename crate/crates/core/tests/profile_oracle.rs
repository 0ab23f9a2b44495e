//! Separation profiles against a brute-force count from exact rational
//! distances: a node at distance `d` from `x` separates at the largest level
//! `t` with `d <= ell_t` (capped at the profile level).

use cantor_lab::cantor::{grid, CantorParams, LevelData, PointExpr};
use cantor_lab::nodes::{mu_profile, nu_profile, profile_level, NodeSeq};
use rug::Rational;

fn ells(alpha: u32, ell1: &Rational, top: u32) -> Vec<Rational> {
    let mut out = vec![Rational::from(1), ell1.clone()];
    for _ in 2..=top {
        let last = out.last().unwrap().clone();
        let mut v = Rational::from(1);
        for _ in 0..alpha {
            v *= &last;
        }
        out.push(v);
    }
    out
}

fn exact(p: &PointExpr, ell: &[Rational]) -> Rational {
    let mut v = Rational::new();
    for (&j, &c) in p.coeffs() {
        v += Rational::from(&ell[j as usize] * c);
    }
    v
}

fn brute(x: &Rational, skip: usize, nodes: &[Rational], ell: &[Rational], cap: u32) -> Vec<u64> {
    let mut deg = vec![0u64; cap as usize + 1];
    for (i, y) in nodes.iter().enumerate() {
        if i == skip {
            continue;
        }
        let d = Rational::from(x - y).abs();
        let t = (0..=cap).rev().find(|&t| d <= ell[t as usize]).expect("within [0, 1]");
        deg[t as usize] += 1;
    }
    deg
}

fn check_mu(alpha: u32, ell1: (i32, i32)) {
    let e1 = Rational::from(ell1);
    for n in 2..=64 {
        let z = NodeSeq::first(n);
        let cap = profile_level(n);
        let ell = ells(alpha, &e1, cap + 8);
        let vals: Vec<Rational> = z.points.iter().map(|p| exact(p, &ell)).collect();
        for k in 0..n {
            let got = mu_profile(k, &z).unwrap();
            assert_eq!(got.degrees, brute(&vals[k], k, &vals, &ell, cap), "n = {n}, k = {k}");
        }
    }
}

#[test]
fn mu_profile_matches_brute_force_quarter() {
    check_mu(2, (1, 4));
}

#[test]
fn mu_profile_matches_brute_force_cubic() {
    check_mu(3, (1, 5));
}

#[test]
fn nu_profile_matches_brute_force_on_grid() {
    let params = CantorParams::parse("2", "1/4").unwrap();
    for n in [5usize, 9, 17, 30] {
        let z = NodeSeq::first(n);
        let cap = profile_level(n);
        let depth = cap + 2;
        let levels = LevelData::for_depth(&params, depth, 64).unwrap();
        let ell = ells(2, &Rational::from((1, 4)), depth + 2);
        let vals: Vec<Rational> = z.points.iter().map(|p| exact(p, &ell)).collect();
        for x in &grid(&levels, depth).unwrap().points {
            let xv = exact(x, &ell);
            for k in [0, n / 2, n - 1] {
                let got = nu_profile(x, k, &z, &levels).unwrap();
                assert_eq!(got.degrees, brute(&xv, k, &vals, &ell, cap), "n = {n}, k = {k}, x = {x}");
            }
        }
    }
}

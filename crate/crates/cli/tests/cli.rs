use std::path::Path;
use std::process::{Command, Output};

use cantor_lab_cli::{config_from_args, ExperimentConfig};

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cantor-lab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn reports(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("reports.json")).unwrap()).unwrap()
}

#[test]
fn node_listing_follows_the_doubling_rule() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["nodes", "--n", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let listed: Vec<&str> = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix("x_"))
        .filter_map(|l| l.split_once(" = "))
        .map(|(_, v)| v)
        .collect();
    assert_eq!(listed, ["0", "1", "l1", "1 - l1", "l2", "1 - l2", "l1 - l2", "1 - l1 + l2"]);
}

#[test]
fn exit_codes_separate_parse_and_hypothesis_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(dir.path(), &["nodes"]).status.code(), Some(2));
    assert_eq!(bin(dir.path(), &["--alpha", "3/2", "nodes", "--n", "4"]).status.code(), Some(2));
    assert_eq!(bin(dir.path(), &["--ell1", "one", "nodes", "--n", "4"]).status.code(), Some(2));
    assert_eq!(bin(dir.path(), &["demo", "violation"]).status.code(), Some(3));
    assert_eq!(
        bin(dir.path(), &["--alpha", "5/2", "--ell1", "1/5", "verify", "term-decay"]).status.code(),
        Some(3)
    );
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "lebesgue", "--n", "24"];
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(bin(dir.path(), &args).status.code(), Some(0));
    let first = (read("reports.json"), read("summary.csv"));
    assert_eq!(bin(dir.path(), &args).status.code(), Some(0));
    assert_eq!(first, (read("reports.json"), read("summary.csv")));
}

#[test]
fn config_survives_a_json_round_trip() {
    let cfg = config_from_args(["cantor-lab", "--alpha", "5/2", "--ell1", "1/5", "demo", "violation", "--s", "4,5"])
        .unwrap();
    assert_eq!(cfg.command, "demo violation");
    assert_eq!(cfg.s_list, Some(vec![4, 5]));
    let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn reports_embed_the_config_and_summary_has_fixed_columns() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(dir.path(), &["levels", "--depth", "4"]).status.code(), Some(0));
    let r = reports(dir.path());
    let first = &r.as_array().unwrap()[0];
    assert_eq!(first["config"]["command"], "levels");
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "statement_id,alpha,ell1,N,p,q,computed,bound,margin_log2,pass,width_bits,grid_depth"
    );
}

#[test]
fn interval_demo_reports_the_larger_of_the_two_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["demo", "interval", "--eps", "1/100", "--delta", "1/10"]);
    assert_eq!(out.status.code(), Some(0));
    let r = reports(dir.path());
    let c: f64 = r[0]["data"]["implied_c"].as_str().unwrap().parse().unwrap();
    // max(delta / (4 eps), 1 / delta) = max(2.5, 10)
    assert!((c - 10.0).abs() < 1e-9, "implied C = {c}");
}

#[test]
fn seeded_extension_is_reproducible_and_writes_terms() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let args = ["--seed", seed, "extend", "--samples", "3", "--n-max", "15"];
        assert_eq!(bin(dir.path(), &args).status.code(), Some(0));
        let mut r = reports(dir.path());
        r[0]["config"]["seed"] = 0.into();
        r
    };
    let first = run("7");
    assert_eq!(run("7"), first);
    let terms = std::fs::read_to_string(dir.path().join("terms.csv")).unwrap();
    assert_eq!(terms.lines().next().unwrap(), "N,delta,xi_abs,term_sup,cumulative");
    assert_ne!(run("8"), first);
}

#[test]
fn interval_demo_meets_the_square_root_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["demo", "interval", "--eps", "1e-4", "--delta", "0.02"]);
    assert_eq!(out.status.code(), Some(0));
    let r = reports(dir.path());
    let num = |k: &str| r[0]["data"][k].as_str().unwrap().parse::<f64>().unwrap();
    assert!(num("implied_c") >= num("one_over_two_sqrt_eps") * (1.0 - 1e-12));
    assert!((num("one_over_two_sqrt_eps") - 50.0).abs() < 1e-9);
}

#[test]
fn max_of_fundamental_polynomials_passes_at_sixteen() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(dir.path(), &["verify", "lemma-max", "--alpha", "2", "--ell1", "1/4", "--n", "16"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(reports(dir.path()).as_array().unwrap().iter().all(|r| r["pass"] == true));
}

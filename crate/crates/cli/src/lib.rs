//! Experiment runner: parses a command line into an [`ExperimentConfig`],
//! runs the matching checks and writes `reports.json`, `summary.csv` and,
//! for the extension commands, `terms.csv`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cantor_lab::approx::{verify_jackson, verify_mf_jt, JetFn, DEFAULT_TAIL};
use cantor_lab::cantor::{CantorParams, LevelData};
use cantor_lab::cutoff::verify_theta;
use cantor_lab::extension::{
    interval_demo, verify_seom, verify_term_decay, violation_demo, write_term_csv, Operator, OperatorConfig,
    TermRow, DEFAULT_PER_COLLAR,
};
use cantor_lab::nodes::{check_uniform, node_levels_needed, NodeSeq};
use cantor_lab::numerics::{fmt_big, parse_rational, zero, Width};
use cantor_lab::polyops::realize;
use cantor_lab::report::{reports_json, write_summary_csv, Check, Relation, Report, ReportKind};
use cantor_lab::verify::{
    default_grid_depth, scan_checks, verify_exponents, verify_leja_trend, verify_markov, verify_not_leja,
    verify_qqq,
};
use cantor_lab::Error;
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Float;
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;
pub const EXIT_PRECISION: i32 = 4;
pub const EXIT_OTHER: i32 = 5;

/// Everything that determines a run. Embedded verbatim in every report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub alpha: String,
    pub ell1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_range: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_list: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_collar: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_depth: Option<u32>,
    pub headroom: u32,
    pub seed: u64,
    pub out: String,
}

#[derive(Parser, Debug)]
#[command(name = "cantor-lab", version, about = "Numeric checks for Newton interpolation and extension on Cantor-type sets")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Exponent alpha of the level lengths ell_s = ell1^(alpha^(s-1)); exact rational
    #[arg(long, global = true, default_value = "2")]
    pub alpha: String,
    /// First level length; exact rational such as 1/4
    #[arg(long, global = true, default_value = "1/4")]
    pub ell1: String,
    /// Depth of the set grid used for suprema
    #[arg(long, global = true)]
    pub grid_depth: Option<u32>,
    /// Guard bits above the width that resolves the deepest level
    #[arg(long, global = true, default_value_t = 128)]
    pub headroom: u32,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for sampled evaluation points
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Level lengths ell_s and gaps h_s of the set
    Levels {
        #[arg(long, default_value_t = 6)]
        depth: u32,
    },
    /// Listing of the first n nodes ordered by the rule of increase of type, with the uniform-distribution check
    Nodes {
        #[arg(long)]
        n: usize,
    },
    /// Lebesgue constant of the first N+1 nodes against h0^-N (N+1)
    Lebesgue {
        #[arg(long)]
        n: usize,
    },
    /// Markov factor sandwich for the p-th derivative of omega_N, N = 2^s
    Markov {
        #[arg(long)]
        s: u32,
        #[arg(long, default_value_t = 1)]
        p: usize,
    },
    /// Individual inequality checks
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Examples showing where the bounds stop holding
    #[command(subcommand)]
    Demo(DemoCmd),
    /// Values and derivatives of the extension W(f) at given or sampled points
    Extend {
        /// Function: exp, exp:c, sin:c, poly:a0,a1,..., recip:a, omega:m
        #[arg(long, default_value = "exp")]
        f: String,
        /// Points in [-2, 2]; exact rationals
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<String>,
        /// Number of seeded random points when no --x is given
        #[arg(long, default_value_t = 8)]
        samples: usize,
        #[arg(long, default_value_t = 63)]
        n_max: usize,
        #[arg(long, default_value_t = 0)]
        p: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum VerifyCmd {
    /// Two-sided bounds on |omega_{N+1}| at the nodes by products of level lengths and gaps
    Pi {
        #[arg(long)]
        n: usize,
    },
    /// Grid maximum of each Lagrange numerator against h0^-N times its value at its own node
    LemmaMax {
        #[arg(long)]
        n: usize,
    },
    /// Lebesgue constant of the first N+1 nodes against h0^-N (N+1)
    Lebesgue {
        #[arg(long)]
        n: usize,
    },
    /// Markov factor sandwich for the p-th derivative of omega_N, N = 2^s
    Markov {
        #[arg(long)]
        s: u32,
        #[arg(long, default_value_t = 1)]
        p: usize,
    },
    /// The node ordering is not a Leja sequence: omega at the next node is below omega at a rival point
    NotLeja {
        #[arg(long, value_delimiter = ',', default_values_t = [6u32, 7, 8, 9, 10])]
        s: Vec<u32>,
    },
    /// |omega_n(x_{n+1})| against the grid maximum of |omega_n|, for comparing orderings
    LejaTrend {
        #[arg(long)]
        n_max: usize,
    },
    /// Lower bound on the q-th derivative of omega_{N+1} at the origin
    Qqq {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        q: usize,
    },
    /// Jackson-type rate: best approximation against rho_1...rho_q ||f||_{q1}, q = 2^w
    Jackson {
        #[arg(long, default_value = "exp")]
        f: String,
        #[arg(long, default_value_t = 0)]
        w: u32,
        #[arg(long, value_delimiter = ',', default_values_t = [15usize, 31, 63, 127, 255])]
        n: Vec<usize>,
    },
    /// Markov factor times best approximation against the Jackson-type product bound
    MfJt {
        #[arg(long, default_value = "exp")]
        f: String,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        w: u32,
        #[arg(long, value_delimiter = ',', default_values_t = [15usize, 31, 63])]
        n: Vec<usize>,
    },
    /// Sup of the cut-off node polynomial against the q-norm of the node polynomial (alpha = 2)
    Seom {
        #[arg(long, default_value_t = 0)]
        p: usize,
        #[arg(long, default_value_t = 64)]
        n_max: usize,
        #[arg(long, default_value_t = DEFAULT_PER_COLLAR)]
        per_collar: usize,
    },
    /// Decay of the terms of the extension series and reproduction of f on the set
    TermDecay {
        #[arg(long, default_value = "exp")]
        f: String,
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 255)]
        n_max: usize,
        #[arg(long, default_value_t = DEFAULT_PER_COLLAR)]
        per_collar: usize,
    },
    /// Exact exponent inequalities between node-product profiles for N+1 in a range
    Exponents {
        #[arg(long, default_value_t = 2)]
        from: usize,
        #[arg(long)]
        to: usize,
    },
    /// Derivative lower bound of the cutoff profile near 1 at theta_k
    Cutoff {
        #[arg(long, default_value_t = 4)]
        k: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum DemoCmd {
    /// Extension of Q(x) = x from [-eps, eps]: the constant is at least 1/(2 sqrt(eps))
    Interval {
        #[arg(long)]
        eps: String,
        #[arg(long)]
        delta: String,
    },
    /// For alpha > 2 the cut-off node polynomials outgrow every bound by |omega_N|_q
    Violation {
        #[arg(long, value_delimiter = ',', default_values_t = [4u32, 5, 6])]
        s: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_values_t = [3usize, 5])]
        q: Vec<usize>,
    },
}

impl Cli {
    pub fn into_config(self) -> ExperimentConfig {
        let c = self.common;
        let mut cfg = ExperimentConfig {
            alpha: c.alpha,
            ell1: c.ell1,
            grid_depth: c.grid_depth,
            headroom: c.headroom,
            seed: c.seed,
            out: c.out.to_string_lossy().into_owned(),
            ..Default::default()
        };
        let name = |s: &str| s.to_string();
        match self.cmd {
            Cmd::Levels { depth } => {
                cfg.command = name("levels");
                cfg.depth = Some(depth);
            }
            Cmd::Nodes { n } => {
                cfg.command = name("nodes");
                cfg.n = Some(n);
            }
            Cmd::Lebesgue { n } => {
                cfg.command = name("lebesgue");
                cfg.n = Some(n);
            }
            Cmd::Markov { s, p } => {
                cfg.command = name("markov");
                cfg.s = Some(s);
                cfg.p = Some(p);
            }
            Cmd::Extend { f, x, samples, n_max, p } => {
                cfg.command = name("extend");
                cfg.f = Some(f);
                if x.is_empty() {
                    cfg.samples = Some(samples);
                } else {
                    cfg.x = Some(x);
                }
                cfg.n_max = Some(n_max);
                cfg.p = Some(p);
            }
            Cmd::Verify(v) => match v {
                VerifyCmd::Pi { n } => {
                    cfg.command = name("verify pi");
                    cfg.n = Some(n);
                }
                VerifyCmd::LemmaMax { n } => {
                    cfg.command = name("verify lemma-max");
                    cfg.n = Some(n);
                }
                VerifyCmd::Lebesgue { n } => {
                    cfg.command = name("verify lebesgue");
                    cfg.n = Some(n);
                }
                VerifyCmd::Markov { s, p } => {
                    cfg.command = name("verify markov");
                    cfg.s = Some(s);
                    cfg.p = Some(p);
                }
                VerifyCmd::NotLeja { s } => {
                    cfg.command = name("verify not-leja");
                    cfg.s_list = Some(s);
                }
                VerifyCmd::LejaTrend { n_max } => {
                    cfg.command = name("verify leja-trend");
                    cfg.n_max = Some(n_max);
                }
                VerifyCmd::Qqq { n, q } => {
                    cfg.command = name("verify qqq");
                    cfg.n = Some(n);
                    cfg.q = Some(q);
                }
                VerifyCmd::Jackson { f, w, n } => {
                    cfg.command = name("verify jackson");
                    cfg.f = Some(f);
                    cfg.w = Some(w);
                    cfg.n_list = Some(n);
                }
                VerifyCmd::MfJt { f, p, w, n } => {
                    cfg.command = name("verify mf-jt");
                    cfg.f = Some(f);
                    cfg.p = Some(p);
                    cfg.w = Some(w);
                    cfg.n_list = Some(n);
                }
                VerifyCmd::Seom { p, n_max, per_collar } => {
                    cfg.command = name("verify seom");
                    cfg.p = Some(p);
                    cfg.n_max = Some(n_max);
                    cfg.per_collar = Some(per_collar);
                }
                VerifyCmd::TermDecay { f, p, n_max, per_collar } => {
                    cfg.command = name("verify term-decay");
                    cfg.f = Some(f);
                    cfg.p = Some(p);
                    cfg.n_max = Some(n_max);
                    cfg.per_collar = Some(per_collar);
                }
                VerifyCmd::Exponents { from, to } => {
                    cfg.command = name("verify exponents");
                    cfg.n_range = Some([from, to]);
                }
                VerifyCmd::Cutoff { k } => {
                    cfg.command = name("verify cutoff");
                    cfg.k = Some(k);
                }
            },
            Cmd::Demo(d) => match d {
                DemoCmd::Interval { eps, delta } => {
                    cfg.command = name("demo interval");
                    cfg.eps = Some(eps);
                    cfg.delta = Some(delta);
                }
                DemoCmd::Violation { s, q } => {
                    cfg.command = name("demo violation");
                    cfg.s_list = Some(s);
                    cfg.q_list = Some(q);
                }
            },
        }
        cfg
    }
}

/// Parses command-line arguments (program name first).
pub fn config_from_args<I, T>(args: I) -> Result<ExperimentConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Ok(Cli::try_parse_from(args)?.into_config())
}

/// Reports of one run plus the optional per-term table.
#[derive(Debug)]
pub struct RunOutput {
    pub reports: Vec<Report>,
    pub terms: Option<Vec<TermRow>>,
}

impl RunOutput {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) => EXIT_PARSE,
        Error::Hypothesis { .. } => EXIT_HYPOTHESIS,
        Error::PrecisionBudget { .. } => EXIT_PRECISION,
        _ => EXIT_OTHER,
    }
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, Error> {
    v.clone().ok_or_else(|| Error::Parameter(format!("missing --{flag}")))
}

fn levels_report(params: &CantorParams, depth: u32, headroom: u32) -> Result<Report, Error> {
    let levels = LevelData::for_depth(params, depth, headroom)?;
    let mut r = Report::new("levels", "level lengths and gaps", ReportKind::Finding, params);
    r.width_bits = levels.width.bits();
    r.param("depth", depth);
    let mut rows = Vec::new();
    for s in 0..=depth {
        let ell = levels.ell(s)?;
        let mut row = serde_json::json!({ "s": s, "ell": fmt_big(ell) });
        if s < depth {
            let h = levels.gap(s)?;
            row["gap"] = fmt_big(h).into();
            r.push(Check::real(format!("gap h_{s} > 0"), h, Relation::Gt, &zero(levels.width)));
        }
        rows.push(row);
    }
    r.datum("levels", rows);
    Ok(r)
}

fn nodes_report(params: &CantorParams, n: usize, headroom: u32) -> Result<Report, Error> {
    if n == 0 {
        return Err(Error::Parameter("--n must be positive".into()));
    }
    let z = NodeSeq::first(n);
    let levels = LevelData::for_depth(params, node_levels_needed(n).max(1), headroom)?;
    let vals = realize(&z.points, &levels)?;
    let mut r = check_uniform(&z, params);
    r.width_bits = levels.width.bits();
    let rows: Vec<serde_json::Value> = z
        .points
        .iter()
        .zip(&vals)
        .enumerate()
        .map(|(i, (p, v))| serde_json::json!({ "k": i + 1, "point": p.to_string(), "value": fmt_big(v) }))
        .collect();
    r.datum("nodes", rows);
    Ok(r)
}

/// Dyadic rational in `[-2, 2]` drawn from the seeded stream.
fn sample_point(rng: &mut ChaCha8Rng) -> String {
    let k: u64 = rng.gen_range(0..=(1u64 << 32));
    let num = k as i128 * 4 - (2i128 << 32);
    format!("{num}/{}", 1u64 << 32)
}

fn extend_run(cfg: &ExperimentConfig, params: &CantorParams) -> Result<RunOutput, Error> {
    let f = JetFn::parse(&need(&cfg.f, "f")?, params)?;
    let xs: Vec<String> = match &cfg.x {
        Some(x) => x.clone(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..need(&cfg.samples, "samples")?).map(|_| sample_point(&mut rng)).collect()
        }
    };
    let n_max = need(&cfg.n_max, "n-max")?;
    let p = need(&cfg.p, "p")?;
    let mut oc = OperatorConfig::new(params, n_max, p);
    if let Some(g) = cfg.grid_depth {
        oc.grid_depth = g;
    }
    let op = Operator::build(&f, oc)?;
    let bits = op.levels.width.bits() + 64;
    let mut r = Report::new(
        "extension-values",
        "values and derivatives of the truncated extension series",
        ReportKind::Finding,
        params,
    );
    r.param("f", f.id());
    r.param("N_max", n_max as u64);
    r.param("p", p as u64);
    r.width_bits = op.levels.width.bits();
    let w = op.work;
    let mut sups = vec![zero(w); n_max + 1];
    let mut rows = Vec::new();
    for xs_i in &xs {
        let x = Float::with_val(bits, &parse_rational(xs_i)?);
        if x < -2 || x > 2 {
            return Err(Error::Parameter(format!("x = {xs_i} outside [-2, 2]")));
        }
        let res = op.eval(&x);
        for (s, t) in sups.iter_mut().zip(&res.terms) {
            if t[p] > *s {
                *s = t[p].clone();
            }
        }
        rows.push(serde_json::json!({
            "x": xs_i,
            "values": res.values.iter().map(fmt_big).collect::<Vec<_>>(),
            "converged": res.converged,
        }));
        if !res.converged.iter().all(|c| *c) {
            r.note(format!("series not converged within N_max at x = {xs_i}"));
        }
    }
    r.datum("points", rows);
    let mut total = zero(w);
    let terms = sups
        .iter()
        .enumerate()
        .map(|(n, t)| {
            total += t;
            TermRow {
                n,
                delta: fmt_big(op.delta(n)),
                xi_abs: fmt_big(&Float::with_val(64, op.xi[n].abs_ref())),
                term_sup: fmt_big(t),
                cumulative: fmt_big(&total),
            }
        })
        .collect();
    Ok(RunOutput {
        reports: vec![r],
        terms: Some(terms),
    })
}

/// Runs the configured experiment. Every report carries the config.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, Error> {
    let params = CantorParams::parse(&cfg.alpha, &cfg.ell1)?;
    let gd = cfg.grid_depth;
    let mut terms = None;
    let reports: Vec<Report> = match cfg.command.as_str() {
        "levels" => vec![levels_report(&params, need(&cfg.depth, "depth")?, cfg.headroom)?],
        "nodes" => vec![nodes_report(&params, need(&cfg.n, "n")?, cfg.headroom)?],
        "lebesgue" | "verify lebesgue" => vec![scan_checks(&params, need(&cfg.n, "n")?, gd)?.lebesgue],
        "verify pi" => vec![scan_checks(&params, need(&cfg.n, "n")?, gd)?.pi],
        "verify lemma-max" => vec![scan_checks(&params, need(&cfg.n, "n")?, gd)?.lemma],
        "markov" | "verify markov" => vec![verify_markov(&params, need(&cfg.s, "s")?, need(&cfg.p, "p")?, gd)?],
        "verify not-leja" => vec![verify_not_leja(&params, &need(&cfg.s_list, "s")?)?],
        "verify leja-trend" => vec![verify_leja_trend(&params, need(&cfg.n_max, "n-max")?, gd)?],
        "verify qqq" => vec![verify_qqq(&params, need(&cfg.n, "n")?, need(&cfg.q, "q")?)?],
        "verify jackson" | "verify mf-jt" => {
            let f = JetFn::parse(&need(&cfg.f, "f")?, &params)?;
            let ns = need(&cfg.n_list, "n")?;
            let top = ns.iter().copied().max().unwrap_or(0);
            let depth = gd.unwrap_or_else(|| default_grid_depth(top + DEFAULT_TAIL + 1));
            let w = need(&cfg.w, "w")?;
            if cfg.command == "verify jackson" {
                vec![verify_jackson(&f, &params, w, &ns, depth)?]
            } else {
                vec![verify_mf_jt(&f, &params, need(&cfg.p, "p")?, w, &ns, depth)?]
            }
        }
        "verify seom" => vec![verify_seom(
            &params,
            need(&cfg.p, "p")?,
            need(&cfg.n_max, "n-max")?,
            cfg.per_collar.unwrap_or(DEFAULT_PER_COLLAR),
        )?],
        "verify term-decay" => {
            let f = JetFn::parse(&need(&cfg.f, "f")?, &params)?;
            let p = need(&cfg.p, "p")?;
            let mut oc = OperatorConfig::new(&params, need(&cfg.n_max, "n-max")?, p);
            oc.per_collar = cfg.per_collar.unwrap_or(DEFAULT_PER_COLLAR);
            if let Some(g) = gd {
                oc.grid_depth = g;
            }
            let (r, rows) = verify_term_decay(&f, p, &oc)?;
            terms = Some(rows);
            vec![r]
        }
        "verify exponents" => {
            let [a, b] = need(&cfg.n_range, "to")?;
            vec![verify_exponents(&params, a..=b)?]
        }
        "verify cutoff" => vec![verify_theta(need(&cfg.k, "k")?, Width::new(256)?)?],
        "demo interval" => vec![interval_demo(
            &params,
            &parse_rational(&need(&cfg.eps, "eps")?)?,
            &parse_rational(&need(&cfg.delta, "delta")?)?,
        )?],
        "demo violation" => vec![violation_demo(&params, &need(&cfg.s_list, "s")?, &need(&cfg.q_list, "q")?)?],
        "extend" => {
            let out = extend_run(cfg, &params)?;
            terms = out.terms;
            out.reports
        }
        other => return Err(Error::Parameter(format!("unknown command {other:?}"))),
    };
    let cv = serde_json::to_value(cfg).expect("config serialises");
    let reports = reports
        .into_iter()
        .map(|mut r| {
            r.config = Some(cv.clone());
            r
        })
        .collect();
    Ok(RunOutput { reports, terms })
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Writes `reports.json`, `summary.csv` and `terms.csv` when present.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let json = dir.join("reports.json");
    write_atomic(&json, reports_json(&out.reports).as_bytes())?;
    written.push(json);
    let mut csv_bytes = Vec::new();
    write_summary_csv(&out.reports, &mut csv_bytes)?;
    let csv = dir.join("summary.csv");
    write_atomic(&csv, &csv_bytes)?;
    written.push(csv);
    if let Some(rows) = &out.terms {
        let mut b = Vec::new();
        write_term_csv(rows, &mut b)?;
        let t = dir.join("terms.csv");
        write_atomic(&t, &b)?;
        written.push(t);
    }
    Ok(written)
}

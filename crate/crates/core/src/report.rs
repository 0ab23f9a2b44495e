//! Structured pass/fail records with margins, and their JSON/CSV forms.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cantor::CantorParams;
use crate::numerics::{fmt_big, le_with_allowance, log2_abs, BigReal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    /// Every check is asserted; a failure fails the run.
    Assertion,
    /// Data only; checks are recorded but never fail the run.
    Finding,
}

/// `computed <relation> bound`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    pub computed: String,
    pub relation: Relation,
    pub bound: String,
    pub pass: bool,
    /// log2 of the slack in the direction of the relation; `None` when
    /// infinite or undefined (a zero side).
    pub margin_log2: Option<f64>,
    pub asserted: bool,
}

impl Check {
    /// Compares two floats. Non-strict relations tolerate a relative
    /// rounding allowance of 2^-96.
    pub fn real(label: impl Into<String>, computed: &BigReal, relation: Relation, bound: &BigReal) -> Check {
        let pass = match relation {
            Relation::Le => le_with_allowance(computed, bound),
            Relation::Ge => le_with_allowance(bound, computed),
            Relation::Lt => computed < bound,
            Relation::Gt => computed > bound,
        };
        let (lc, lb) = (log2_abs(computed), log2_abs(bound));
        let margin = match (relation, lc, lb) {
            (Relation::Le | Relation::Lt, Some(c), Some(b)) => Some(b - c),
            (Relation::Ge | Relation::Gt, Some(c), Some(b)) => Some(c - b),
            _ => None,
        };
        Check {
            label: label.into(),
            n: None,
            p: None,
            q: None,
            computed: fmt_big(computed),
            relation,
            bound: fmt_big(bound),
            pass,
            margin_log2: margin.map(round_margin),
            asserted: true,
        }
    }

    /// A check decided elsewhere (exact integer or exponent arithmetic).
    pub fn exact(
        label: impl Into<String>,
        computed: impl Into<String>,
        relation: Relation,
        bound: impl Into<String>,
        pass: bool,
        margin_log2: Option<f64>,
    ) -> Check {
        Check {
            label: label.into(),
            n: None,
            p: None,
            q: None,
            computed: computed.into(),
            relation,
            bound: bound.into(),
            pass,
            margin_log2: margin_log2.map(round_margin),
            asserted: true,
        }
    }

    pub fn n(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }

    pub fn p(mut self, p: u64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn q(mut self, q: u64) -> Self {
        self.q = Some(q);
        self
    }

    pub fn finding(mut self) -> Self {
        self.asserted = false;
        self
    }
}

// keeps JSON stable against last-bit noise in f64 formatting
fn round_margin(m: f64) -> f64 {
    if m.is_finite() {
        (m * 1e6).round() / 1e6
    } else {
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub statement_id: String,
    pub description: String,
    pub kind: ReportKind,
    pub alpha: String,
    pub ell1: String,
    pub params: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub width_bits: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_depth: Option<u32>,
    pub notes: Vec<String>,
    pub data: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
}

impl Report {
    pub fn new(
        statement_id: impl Into<String>,
        description: impl Into<String>,
        kind: ReportKind,
        params: &CantorParams,
    ) -> Report {
        Report {
            statement_id: statement_id.into(),
            description: description.into(),
            kind,
            alpha: params.alpha_str(),
            ell1: params.ell1_str(),
            params: BTreeMap::new(),
            checks: Vec::new(),
            pass: true,
            width_bits: 0,
            grid_depth: None,
            notes: Vec::new(),
            data: BTreeMap::new(),
            config: None,
        }
    }

    pub fn param(&mut self, key: &str, v: impl Into<Value>) {
        self.params.insert(key.to_string(), v.into());
    }

    pub fn datum(&mut self, key: &str, v: impl Into<Value>) {
        self.data.insert(key.to_string(), v.into());
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn push(&mut self, mut check: Check) {
        if self.kind == ReportKind::Finding {
            check.asserted = false;
        }
        self.checks.push(check);
        self.pass = self.checks.iter().all(|c| !c.asserted || c.pass);
    }

    /// Asserted checks that failed.
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.asserted && !c.pass)
    }

    /// Asserted check with the smallest margin.
    pub fn worst(&self) -> Option<&Check> {
        self.checks
            .iter()
            .filter(|c| c.asserted)
            .min_by(|a, b| {
                let ma = a.margin_log2.unwrap_or(f64::INFINITY);
                let mb = b.margin_log2.unwrap_or(f64::INFINITY);
                (a.pass, ma).partial_cmp(&(b.pass, mb)).unwrap_or(std::cmp::Ordering::Equal)
            })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

pub const CSV_COLUMNS: [&str; 12] = [
    "statement_id",
    "alpha",
    "ell1",
    "N",
    "p",
    "q",
    "computed",
    "bound",
    "margin_log2",
    "pass",
    "width_bits",
    "grid_depth",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per check.
pub fn write_summary_csv<W: Write>(reports: &[Report], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in reports {
        for c in &r.checks {
            let margin = match c.margin_log2 {
                Some(m) => format!("{m}"),
                None => "inf".to_string(),
            };
            w.write_record([
                r.statement_id.clone(),
                r.alpha.clone(),
                r.ell1.clone(),
                opt(c.n),
                opt(c.p),
                opt(c.q),
                c.computed.clone(),
                format!("{} {}", c.relation.symbol(), c.bound),
                margin,
                c.pass.to_string(),
                r.width_bits.to_string(),
                opt(r.grid_depth),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Serialises a report list as one JSON array.
pub fn reports_json(reports: &[Report]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialise");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::Float;

    fn params() -> CantorParams {
        CantorParams::parse("2", "1/4").unwrap()
    }

    #[test]
    fn real_checks_and_margins() {
        let a = Float::with_val(64, 1);
        let b = Float::with_val(64, 4);
        let c = Check::real("x", &a, Relation::Le, &b);
        assert!(c.pass);
        assert_eq!(c.margin_log2, Some(2.0));
        let c = Check::real("x", &b, Relation::Le, &a);
        assert!(!c.pass);
        assert_eq!(c.margin_log2, Some(-2.0));
        let c = Check::real("x", &b, Relation::Ge, &a);
        assert!(c.pass);
        let eq = Check::real("x", &a, Relation::Le, &a);
        assert!(eq.pass);
        assert!(!Check::real("x", &a, Relation::Lt, &a).pass);
    }

    #[test]
    fn findings_never_fail() {
        let mut r = Report::new("t", "", ReportKind::Finding, &params());
        r.push(Check::exact("x", "1", Relation::Le, "0", false, None));
        assert!(r.pass);
        let mut r = Report::new("t", "", ReportKind::Assertion, &params());
        r.push(Check::exact("x", "1", Relation::Le, "0", false, None));
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn csv_has_fixed_columns_and_quoting() {
        let mut r = Report::new("demo,id", "", ReportKind::Assertion, &params());
        r.push(Check::exact("x", "1", Relation::Le, "2", true, Some(1.0)).n(3));
        let mut buf = Vec::new();
        write_summary_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "\"demo,id\",2,1/4,3,,,1,<= 2,1,true,0,");
    }

    #[test]
    fn json_round_trip() {
        let mut r = Report::new("t", "d", ReportKind::Assertion, &params());
        r.push(Check::exact("x", "1", Relation::Ge, "0", true, None).p(2));
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}

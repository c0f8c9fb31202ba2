//! Report assembly: JSON documents and plot-ready CSV.

use serde::Serialize;
use serde_json::Value;

use poisson_walks::mc::TracePoint;

/// One named trace of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<TracePoint>,
}

impl Series {
    pub fn new(name: &str, points: Vec<TracePoint>) -> Self {
        Series { name: name.to_string(), points }
    }

    /// Points without error bars.
    pub fn values(name: &str, values: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let points = values.into_iter().map(|(n, value)| TracePoint { n, value, stderr: 0.0 }).collect();
        Series::new(name, points)
    }
}

/// A named pass/fail check; `--assert` fails when any check fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Check { name: name.to_string(), pass, detail }
    }
}

/// Everything a command produces before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub body: Value,
    pub series: Vec<Series>,
    pub checks: Vec<Check>,
    /// Additional `(file suffix, contents)` pairs, e.g. a cylinder table.
    pub extra: Vec<(String, String)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Serialize)]
struct Document<'a> {
    command: &'a str,
    seed: u64,
    config_hash: &'a str,
    pass: bool,
    checks: &'a [Check],
    warnings: &'a [String],
    report: &'a Value,
}

/// Pretty JSON with the provenance header; non-finite numbers become `null`.
pub fn render_json(command: &str, seed: u64, config_hash: &str, warnings: &[String], outcome: &Outcome) -> String {
    let doc = Document {
        command,
        seed,
        config_hash,
        pass: outcome.passed(),
        checks: &outcome.checks,
        warnings,
        report: &outcome.body,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report values serialize");
    s.push('\n');
    s
}

/// Long-format CSV with columns `series,n,value,stderr`, series in the
/// given order.
pub fn emit_plot_data(series: &[Series]) -> String {
    let mut out = String::from("series,n,value,stderr\n");
    for s in series {
        for p in &s.points {
            out.push_str(&format!("{},{},{},{}\n", s.name, p.n, p.value, p.stderr));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(emit_plot_data(&[]), "series,n,value,stderr\n");
        assert_eq!(emit_plot_data(&[Series::new("x", vec![])]), "series,n,value,stderr\n");
    }

    #[test]
    fn twelve_rows_for_twelve_points() {
        let s = Series::values("entropy", (1..=12).map(|n| (n, n as f64)));
        let csv = emit_plot_data(&[s]);
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 12);
        assert_eq!(rows[0], "entropy,1,1,0");
        assert_eq!(rows[11], "entropy,12,12,0");
    }

    #[test]
    fn series_column_separates_traces() {
        let a = Series::values("a", [(1, 0.5)]);
        let b = Series::values("b", [(1, 0.25)]);
        let csv = emit_plot_data(&[a, b]);
        assert_eq!(csv, "series,n,value,stderr\na,1,0.5,0\nb,1,0.25,0\n");
    }

    #[test]
    fn json_header_carries_seed_and_hash() {
        let o = Outcome { body: serde_json::json!({"x": f64::NAN}), series: vec![], checks: vec![], extra: vec![] };
        let s = render_json("cmd", 7, "abc", &[], &o);
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["seed"], 7);
        assert_eq!(v["config_hash"], "abc");
        assert!(v["report"]["x"].is_null());
        assert_eq!(v["pass"], true);
    }
}

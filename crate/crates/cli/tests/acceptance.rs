//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every criterion is judged from the JSON reports the CLI writes for the
//! configs in `configs/`, against oracles computed here. Run with
//! `cargo test -p pwalk --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pwalk::{run_to_dir, Command, LoadedConfig};
use serde_json::Value;

const SRW_F2: &str = include_str!("../../../configs/srw_f2.toml");
const Z2_CUBED: &str = include_str!("../../../configs/z2_z2_z2.toml");
const SL2Z: &str = include_str!("../../../configs/sl2z.toml");

mod tol {
    pub const DRIFT: f64 = 0.01;
    pub const ENTROPY: f64 = 0.02;
    pub const SIGMA: f64 = 3.0;
    pub const EXACT: f64 = 1e-10;
    pub const STATIONARITY: f64 = 1e-10;
    pub const CONDITIONAL: f64 = 0.05;
    pub const CONTROL: f64 = 0.03;
    pub const JOINT_SIGMA: f64 = 2.0;
    pub const MAXIMALITY: f64 = 0.05;
    pub const NEGATIVE_CONTROL: f64 = 0.3;
    pub const STRIP: f64 = 0.0011;
    pub const GROWTH: f64 = 0.1;
    pub const RAY: f64 = 0.05;
    pub const CENSORING: f64 = 0.01;
    pub const QR_PER_STEP: f64 = 1e-6;
    pub const RADIAL_SUM: f64 = 1e-6;
    pub const LYAPUNOV_MIN: f64 = 0.05;
    pub const LYAPUNOV_SPREAD: f64 = 0.01;
}

const WORKERS: usize = 8;

struct Experiment {
    tag: &'static str,
    text: &'static str,
    commands: &'static [Command],
}

const EXPERIMENTS: [Experiment; 3] = [
    Experiment {
        tag: "srw_f2",
        text: SRW_F2,
        commands: &[
            Command::EstimateDrift,
            Command::EstimateEntropy,
            Command::HarmonicMeasure,
            Command::Rn,
            Command::ConditionalEntropy,
            Command::EntropyGap,
            Command::Maximality,
            Command::RayCheck,
            Command::StripCheck,
            Command::Regularity,
        ],
    },
    Experiment {
        tag: "z2_z2_z2",
        text: Z2_CUBED,
        commands: &[Command::EstimateDrift, Command::HarmonicMeasure, Command::RayCheck, Command::StripCheck],
    },
    Experiment {
        tag: "sl2z",
        text: SL2Z,
        commands: &[Command::Lyapunov, Command::Regularity, Command::Flag],
    },
];

/// Reports keyed by `(experiment, command)`, with run times.
struct Run {
    reports: BTreeMap<(String, String), Value>,
    times: BTreeMap<(String, String), Duration>,
}

fn run_all(root: &Path, workers: usize) -> Result<Run, String> {
    let mut reports = BTreeMap::new();
    let mut times = BTreeMap::new();
    for e in &EXPERIMENTS {
        let cfg = LoadedConfig::parse(e.text, None).map_err(|err| format!("{}: {err}", e.tag))?;
        for &c in e.commands {
            let start = Instant::now();
            let written = run_to_dir(c, &cfg, &root.join(e.tag), workers).map_err(|err| format!("{} {}: {err}", e.tag, c.name()))?;
            let key = (e.tag.to_string(), c.name().to_string());
            times.insert(key.clone(), start.elapsed());
            let text = fs::read_to_string(&written.json).map_err(|err| err.to_string())?;
            let v: Value = serde_json::from_str(&text).map_err(|err| err.to_string())?;
            reports.insert(key, v["report"].clone());
        }
    }
    Ok(Run { reports, times })
}

// ---- oracles ------------------------------------------------------------

/// Law of the word length after `n` steps of simple random walk on a
/// regular tree: up with probability `up`, down with `1 - up`, always up
/// from the root.
fn length_law(n: usize, up: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    for _ in 0..n {
        let mut q = vec![0.0; n + 1];
        for (l, &m) in p.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            if l == 0 {
                q[1] += m;
            } else {
                q[l + 1] += m * up;
                q[l - 1] += m * (1.0 - up);
            }
        }
        p = q;
    }
    p
}

/// `H(mu_n)` for simple random walk on `F_2`: the law of `x_n` is uniform on
/// each sphere, of size `4 * 3^(L-1)`.
fn f2_entropy(n: usize) -> f64 {
    length_law(n, 0.75)
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(l, &p)| {
            let sphere = if l == 0 { 0.0 } else { 4f64.ln() + (l as f64 - 1.0) * 3f64.ln() };
            -p * (p.ln() - sphere)
        })
        .sum()
}

fn tokens(w: &str) -> Vec<&str> {
    w.split_whitespace().filter(|t| *t != "e").collect()
}

fn common_prefix(a: &[&str], b: &[&str]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

// ---- helpers ------------------------------------------------------------

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn arr(v: &Value) -> &Vec<Value> {
    static EMPTY: Vec<Value> = Vec::new();
    v.as_array().unwrap_or(&EMPTY)
}

struct Verdict {
    parts: Vec<(bool, String)>,
}

impl Verdict {
    fn new() -> Self {
        Verdict { parts: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.parts.push((ok, detail));
    }

    fn pass(&self) -> bool {
        !self.parts.is_empty() && self.parts.iter().all(|p| p.0)
    }

    fn line(&self) -> String {
        self.parts
            .iter()
            .map(|(ok, d)| format!("{}{d}", if *ok { "" } else { "!" }))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn report<'a>(run: &'a Run, tag: &str, cmd: &str) -> &'a Value {
    &run.reports[&(tag.to_string(), cmd.to_string())]
}

fn secs(run: &Run, tag: &str, cmds: &[&str]) -> f64 {
    cmds.iter().map(|c| run.times[&(tag.to_string(), c.to_string())].as_secs_f64()).sum()
}

// ---- criteria -----------------------------------------------------------

fn drift(run: &Run, tag: &str, up: f64, limit_secs: f64) -> Verdict {
    let mut v = Verdict::new();
    let r = report(run, tag, "estimate-drift");
    let oracle = 2.0 * up - 1.0;
    let est = f(&r["estimate"]);
    v.check((est - oracle).abs() <= tol::DRIFT, format!("rate {est:.5} vs {oracle:.5} ± {}", tol::DRIFT));
    let worst = arr(&r["exact_rate"])
        .iter()
        .map(|row| {
            let n = row["n"].as_u64().unwrap() as usize;
            let law = length_law(n, up);
            let mean: f64 = law.iter().enumerate().map(|(l, p)| l as f64 * p).sum();
            (f(&row["mean_length_over_n"]) - mean / n as f64).abs()
        })
        .fold(0.0, f64::max);
    v.check(worst <= 1e-12, format!("exact E|x_n|/n, n <= 12: max error {worst:.1e}"));
    let t = secs(run, tag, &["estimate-drift"]);
    v.check(t <= limit_secs, format!("{t:.1}s <= {limit_secs}s"));
    v
}

fn criterion_2(run: &Run) -> Verdict {
    let mut v = Verdict::new();
    let r = report(run, "srw_f2", "estimate-entropy");
    let rows = arr(&r["rows"]);
    let last = rows.last().expect("entropy rows");
    let diff = f(&last["difference"]);
    let exact = f2_entropy(12) - f2_entropy(11);
    v.check((diff - exact).abs() <= 1e-9, format!("exact difference {diff:.6} = radial oracle {exact:.6}"));
    let oracle = 0.5 * 3f64.ln();
    v.check((diff - oracle).abs() <= tol::ENTROPY, format!("|{diff:.4} - {oracle:.4}| <= {}", tol::ENTROPY));
    let inc = &r["smb"]["increment"];
    let gap = (f(&inc["mean"]) - diff).abs();
    let allowed = tol::JOINT_SIGMA * f(&inc["stderr"]);
    v.check(gap <= allowed, format!("SMB increment within {} stderr ({gap:.4} vs {allowed:.4})", tol::JOINT_SIGMA));
    let t = secs(run, "srw_f2", &["estimate-entropy"]);
    v.check(t <= 300.0, format!("{t:.1}s"));
    v
}

fn harmonic(run: &Run, tag: &str, oracle_mass: Option<&dyn Fn(usize) -> f64>) -> Verdict {
    let mut v = Verdict::new();
    let r = report(run, tag, "harmonic-measure");
    let cyl = arr(&r["cylinders"]);
    let n = f(&r["frequency_paths"]);
    let fit_paths = r["fit"]["paths"].as_f64();
    let inv_n = 1.0 / n + fit_paths.map_or(0.0, |p| 1.0 / p);
    let mut worst_z: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    for c in cyl {
        let len = tokens(c["word"].as_str().unwrap()).len();
        let model = f(&c["mass"]);
        let reference = match oracle_mass {
            Some(o) => {
                worst_mass = worst_mass.max((model - o(len)).abs());
                o(len)
            }
            None => model,
        };
        let z = (f(&c["frequency"]) - reference) / (reference * (1.0 - reference) * inv_n).sqrt();
        worst_z = worst_z.max(z.abs());
    }
    v.check(!cyl.is_empty() && worst_z <= tol::SIGMA, format!("{} cylinders, max |z| {worst_z:.2} <= {}", cyl.len(), tol::SIGMA));
    if oracle_mass.is_some() {
        v.check(worst_mass <= 1e-12, format!("model masses = closed form (max error {worst_mass:.1e})"));
        let res: Vec<f64> = arr(&r["stationarity"]).iter().map(|s| f(&s["residual"])).collect();
        let worst = res.iter().copied().fold(0.0, f64::max);
        v.check(res.len() >= 4 && worst < tol::STATIONARITY, format!("stationarity depths 1-{}: {worst:.1e}", res.len()));
    } else if let Some(gap) = r["max_gap_to_exact"].as_f64() {
        v.check(true, format!("fit vs exact model: max cylinder gap {gap:.1e}"));
    }
    v
}

fn criterion_4(run: &Run) -> Verdict {
    let mut v = Verdict::new();
    let r = report(run, "srw_f2", "rn");
    let samples = arr(&r["samples"]);
    let mut worst: f64 = 0.0;
    let mut rays = std::collections::BTreeSet::new();
    for s in samples {
        let xi = tokens(s["ray"].as_str().unwrap());
        let g = tokens(s["g"].as_str().unwrap());
        rays.insert(s["ray"].as_str().unwrap().to_string());
        let c = common_prefix(&g, &xi) as i32;
        let closed = 3f64.powi(2 * c - g.len() as i32);
        worst = worst.max((f(&s["rn"]) - closed).abs() / closed.max(1.0));
    }
    let expected = 1 + 4 + 12 + 36;
    v.check(
        samples.len() == rays.len() * expected && rays.len() == 50,
        format!("{} rays x ball(3) = {} samples", rays.len(), samples.len()),
    );
    v.check(worst <= tol::EXACT, format!("rn vs 3^(2(g|xi)-|g|): {worst:.1e}"));
    let co = f(&r["max_cocycle_error"]);
    let ha = f(&r["max_harmonicity_error"]);
    v.check(co <= tol::EXACT, format!("cocycle {co:.1e}"));
    v.check(ha <= tol::EXACT, format!("harmonicity {ha:.1e}"));
    v
}

fn criterion_5(run: &Run) -> Verdict {
    let mut v = Verdict::new();
    let r = report(run, "srw_f2", "conditional-entropy");
    let cond = f(&r["conditioned"]["report"]["estimate"]);
    v.check(cond <= tol::CONDITIONAL, format!("conditioned {cond:.4} <= {}", tol::CONDITIONAL));
    let trace = arr(&r["conditioned"]["report"]["trace"]);
    let grid: Vec<f64> = (4..=12).map(|n| f(&trace[n - 1]["value"])).collect();
    v.check(grid.windows(2).all(|w| w[1] <= w[0]), "decreasing over n = 4..12".to_string());
    let h = 0.5 * 3f64.ln();
    let triv = f(&r["trivial"]["report"]["estimate"]);
    v.check((triv - h).abs() <= tol::CONTROL, format!("trivial control {triv:.4} vs {h:.4} ± {}", tol::CONTROL));

    let g = report(run, "srw_f2", "entropy-gap");
    let gap = f(&g["gap_boundary"]["mean"]);
    let gap_se = f(&g["gap_boundary"]["stderr"]);
    let lhs = gap - (f(&g["entropy_of_mu"]) - f(&g["h_n"]));
    let joint = (gap_se.powi(2) + f(&g["conditional_stderr"]).powi(2)).sqrt();
    let dev = (lhs - f(&g["conditional"])).abs();
    v.check(dev <= tol::JOINT_SIGMA * joint, format!("identity |{lhs:.4} - {:.4}| <= 2 x {joint:.4}", f(&g["conditional"])));
    let closed = 4f64.ln() - 0.5 * 3f64.ln();
    let trivial = f(&g["gap_trivial"]["mean"]);
    v.check(
        (gap - closed).abs() <= tol::SIGMA * gap_se && (trivial - 4f64.ln()).abs() < 1e-12 && gap < trivial,
        format!("{gap:.4} (closed form {closed:.4}) < {trivial:.4}"),
    );
    v
}

fn criterion_6(run: &Run) -> Verdict {
    let mut v = Verdict::new();
    let r = report(run, "srw_f2", "maximality");
    let last = |x: &Value| arr(&x["rows"]).last().map_or(f64::NAN, |row| f(&row["rate"]));
    let c = last(&r["conditioned"]);
    let u = last(&r["unconditioned"]);
    v.check(c < tol::MAXIMALITY, format!("conditioned (1/12) log|A| = {c:.4} < {}", tol::MAXIMALITY));
    v.check(u > tol::NEGATIVE_CONTROL, format!("unconditioned {u:.4} > {}", tol::NEGATIVE_CONTROL));
    v
}

fn strip(run: &Run, tag: &str) -> Verdict {
    let mut v = Verdict::new();
    let r = report(run, tag, "strip-check");
    let stats = arr(&r["report"]["statistics"]);
    let max = stats.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    v.check(
        !stats.is_empty() && max <= tol::STRIP && r["report"]["censored"] == 0,
        format!("{} paths, max statistic {max:.2e} <= {}", stats.len(), tol::STRIP),
    );
    v.check(r["report"]["within_bound"] == true, "card <= 2|x_n|+1".to_string());
    let e = f(&r["growth"]["exponent"]);
    v.check((e - 1.0).abs() <= tol::GROWTH, format!("growth exponent {e:.4}"));
    let m = &r["equivariance"];
    v.check(m["mismatches"] == 0 && f(&m["spot_checks"]) > 0.0, format!("equivariance {} spot checks exact", m["spot_checks"]));
    v
}

fn ray(run: &Run, tag: &str) -> Verdict {
    let mut v = Verdict::new();
    let r = &report(run, tag, "ray-check")["report"];
    let hs = arr(&r["horizons"]);
    let med: Vec<f64> = hs.iter().map(|h| f(&h["median"])).collect();
    let ns: Vec<u64> = hs.iter().map(|h| h["n"].as_u64().unwrap()).collect();
    let last = med.last().copied().unwrap_or(f64::NAN);
    v.check(ns == [1_000, 3_000, 10_000], format!("horizons {ns:?}"));
    v.check(last <= tol::RAY, format!("median at 1e4 {last:.4} <= {}", tol::RAY));
    v.check(med.windows(2).all(|w| w[1] <= w[0]), format!("decreasing {med:.4?}"));
    let cens = hs.iter().map(|h| f(&h["censored_fraction"])).fold(0.0, f64::max);
    v.check(cens < tol::CENSORING, format!("censored {cens:.3}"));
    v
}

fn criterion_9(run: &Run) -> Verdict {
    let mut v = Verdict::new();
    let parts = [
        ("drift", drift(run, "z2_z2_z2", 2.0 / 3.0, 60.0)),
        ("harmonic (fitted)", harmonic(run, "z2_z2_z2", None)),
        ("strip", strip(run, "z2_z2_z2")),
        ("ray", ray(run, "z2_z2_z2")),
    ];
    for (name, p) in parts {
        v.check(p.pass(), format!("{name} [{}]", p.line()));
    }
    v
}

fn criterion_10(run: &Run) -> Verdict {
    let mut v = Verdict::new();
    let l = report(run, "sl2z", "lyapunov");
    let n = f(&l["exact_horizon"]);
    let qr = f(&l["max_qr_error"]);
    v.check(n == 40.0 && qr <= tol::QR_PER_STEP * n, format!("QR vs exact SVD at n = {n}: {qr:.1e}"));
    let s = f(&l["max_radial_sum"]);
    v.check(s <= tol::RADIAL_SUM, format!("|sum r| {s:.1e}"));
    let a1 = f(&l["report"]["mean"][0]);
    v.check(a1 > tol::LYAPUNOV_MIN, format!("alpha_1 {a1:.4} > {}", tol::LYAPUNOV_MIN));
    let sd = f(&l["report"]["stddev"][0]);
    v.check(sd < tol::LYAPUNOV_SPREAD, format!("stddev {sd:.4} < {}", tol::LYAPUNOV_SPREAD));
    let dev: Vec<f64> = arr(&report(run, "sl2z", "regularity")["matrix"]["deviation"]).iter().map(f).collect();
    v.check(dev.len() > 1 && dev.windows(2).all(|w| w[1] <= w[0]), format!("radial deviation {dev:.4?}"));
    let flag: Vec<f64> = arr(&report(run, "sl2z", "flag")["report"]["distance"]).iter().map(f).collect();
    let floor = |x: f64| if x < 1e-12 { 0.0 } else { x };
    v.check(flag.len() > 1 && flag.windows(2).all(|w| floor(w[1]) <= floor(w[0])), format!("flag distance {:?}", flag.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>()));
    let t = secs(run, "sl2z", &["lyapunov", "regularity", "flag"]);
    v.check(t <= 120.0, format!("{t:.1}s"));
    v
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in &EXPERIMENTS {
        let sub = dir.join(e.tag);
        let mut names: Vec<PathBuf> = fs::read_dir(&sub).unwrap().map(|d| d.unwrap().path()).collect();
        names.sort();
        for p in names {
            out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
        }
    }
    out
}

fn criterion_11(first: &Path, root: &Path) -> Verdict {
    let mut v = Verdict::new();
    let reference = files(first);
    for (label, workers) in [("repeat, 8 workers", WORKERS), ("1 worker", 1)] {
        let dir = root.join(format!("w{workers}"));
        if let Err(e) = run_all(&dir, workers) {
            v.check(false, format!("{label}: {e}"));
            continue;
        }
        let other = files(&dir);
        let differing: Vec<String> = reference
            .iter()
            .filter(|(k, b)| other.get(*k) != Some(b))
            .map(|(k, _)| k.display().to_string())
            .collect();
        v.check(
            differing.is_empty() && other.len() == reference.len(),
            format!("{label}: {} files, {} differ {differing:?}", reference.len(), differing.len()),
        );
    }
    v
}

fn main() -> ExitCode {
    let root = tempfile::tempdir().expect("temporary directory");
    let first = root.path().join("first");
    let run = match run_all(&first, WORKERS) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL setup: {e}");
            return ExitCode::FAILURE;
        }
    };
    let f2_mass = |len: usize| 0.25 * (1.0f64 / 3.0).powi(len as i32 - 1);
    let criteria: Vec<(&str, Verdict)> = vec![
        ("1 drift", drift(&run, "srw_f2", 0.75, 60.0)),
        ("2 entropy", criterion_2(&run)),
        ("3 harmonic measure", harmonic(&run, "srw_f2", Some(&f2_mass))),
        ("4 martin kernel", criterion_4(&run)),
        ("5 conditional entropy", criterion_5(&run)),
        ("6 maximality witness", criterion_6(&run)),
        ("7 strip criterion", strip(&run, "srw_f2")),
        ("8 ray criterion", ray(&run, "srw_f2")),
        ("9 free product Z2*Z2*Z2", criterion_9(&run)),
        ("10 matrix walks", criterion_10(&run)),
        ("11 determinism", criterion_11(&first, root.path())),
    ];
    let mut failed = 0;
    for (name, v) in &criteria {
        let ok = v.pass();
        failed += usize::from(!ok);
        println!("{} criterion {name}: {}", if ok { "PASS" } else { "FAIL" }, v.line());
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

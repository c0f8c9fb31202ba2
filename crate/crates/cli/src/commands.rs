//! The experiment commands. Each returns an [`Outcome`]; writing is done
//! by the caller.

use std::collections::HashMap;

use serde_json::json;

use poisson_walks::boundary::{
    exact_harmonic_measure, fit_harmonic_measure, harmonic_measure, radon_nikodym, radon_nikodym_ray,
    srw_free_rn, stationarity_residual, track_to_depth, BoundaryPrefix, FitOptions,
    HarmonicMeasureModel,
};
use poisson_walks::conditional::{
    conditional_entropy_estimate, entropy_gap, maximality_report, Conditioning,
};
use poisson_walks::criteria::{
    ray_criterion_check, regularity_check, strip_criterion_check, strip_from_prefixes, strip_growth,
    RegularityThresholds,
};
use poisson_walks::group::common_prefix_len;
use poisson_walks::matrix::{
    exact_product, exact_radial_part, flag_convergence, flag_equivariance, lyapunov_vector,
    matrix_regularity_check, sample_indices, QRAccumulator, SquareMatrix,
};
use poisson_walks::mc::TracePoint;
use poisson_walks::walk::{
    entropy_rows, estimate_drift, estimate_entropy_smb, exact_expected_length, sample_path, PowerTable, Walker,
};
use poisson_walks::{GroupKind, GroupSpec, McConfig, Measure};

use crate::config::{LoadedConfig, MeasureKind, ModelChoice};
use crate::report::{Check, Outcome, Series};
use crate::CliError;

/// Streams at or above this offset are reserved for checks that must not
/// reuse the paths of a fitted model or a main estimate.
pub const CHECK_STREAM_BASE: u64 = 1 << 32;

fn within(name: &str, value: f64, target: f64, tol: f64) -> Check {
    let dev = (value - target).abs();
    Check::new(name, dev <= tol, format!("|{value:.6} - {target:.6}| = {dev:.3e} (tolerance {tol:e})"))
}

fn at_most(name: &str, value: f64, bound: f64) -> Check {
    Check::new(name, value <= bound, format!("{value:.6e} <= {bound:e}"))
}

fn group_setup(cfg: &LoadedConfig) -> Result<(GroupSpec, Measure), CliError> {
    Ok((cfg.group()?, cfg.measure()?))
}

fn model(cfg: &LoadedConfig, group: &GroupSpec, mu: &Measure, mc: &McConfig) -> Result<HarmonicMeasureModel, CliError> {
    let c = &cfg.config;
    let fit = FitOptions {
        paths: c.paths.fit,
        depth: c.depths.fit,
        margin: c.margins.boundary,
        max_steps: c.margins.max_steps,
    };
    Ok(match c.harmonic.model {
        ModelChoice::Auto => harmonic_measure(group, mu, &fit, mc)?,
        ModelChoice::Fit => fit_harmonic_measure(group, mu, &fit, mc)?,
    })
}

fn is_srw(cfg: &LoadedConfig) -> bool {
    cfg.config.measure.as_ref().is_some_and(|m| matches!(m.kind, MeasureKind::Srw))
}

pub fn estimate_drift_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let (group, mu) = group_setup(cfg)?;
    let c = &cfg.config;
    let report = estimate_drift(&group, &mu, c.horizons.drift, c.paths.drift, mc);
    let table = PowerTable::build(&group, &mu, c.horizons.entropy, c.limits.elements)?;
    let exact: Vec<(usize, f64)> = (1..=table.horizon())
        .map(|j| (j, exact_expected_length(&group, table.get(j)) / j as f64))
        .collect();
    let mut checks = Vec::new();
    if let Some(target) = c.targets.drift {
        checks.push(within("drift", report.estimate, target, c.tolerances.drift));
    }
    let body = json!({
        "estimate": report.estimate,
        "stderr": report.stderr,
        "horizon": report.horizon,
        "paths": report.paths,
        "exact_rate": exact.iter().map(|&(n, r)| json!({"n": n, "mean_length_over_n": r})).collect::<Vec<_>>(),
    });
    let series = vec![Series::new("drift", report.trace.clone()), Series::values("exact", exact)];
    Ok(Outcome { body, series, checks, extra: vec![] })
}

pub fn estimate_entropy_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let (group, mu) = group_setup(cfg)?;
    let c = &cfg.config;
    let n = c.horizons.entropy;
    let table = PowerTable::build(&group, &mu, n, c.limits.elements)?;
    let rows = entropy_rows(&table);
    let smb = estimate_entropy_smb(&group, &mu, &table, n, c.paths.smb, mc)?;
    let last = rows[n - 1];
    let mut checks = Vec::new();
    if let Some(target) = c.targets.entropy {
        checks.push(within("difference", last.difference, target, c.tolerances.entropy));
    }
    // The difference is exact, so the joint error is the sampled one.
    let gap = (smb.increment.mean - last.difference).abs();
    let allowed = c.tolerances.gap_sigma * smb.increment.stderr;
    checks.push(Check::new(
        "smb_agreement",
        gap <= allowed,
        format!("|{:.6} - {:.6}| = {gap:.3e} vs {allowed:.3e}", smb.increment.mean, last.difference),
    ));
    let body = json!({
        "horizon": n,
        "rows": rows,
        "smb": smb,
    });
    let series = vec![
        Series::values("entropy_over_n", rows.iter().map(|r| (r.n, r.entropy / r.n as f64))),
        Series::values("difference", rows.iter().map(|r| (r.n, r.difference))),
        Series::new("smb", smb.report.trace.clone()),
    ];
    Ok(Outcome { body, series, checks, extra: vec![] })
}

fn letters_key(group: &GroupSpec, w: &[poisson_walks::Letter]) -> Result<String, CliError> {
    Ok(group.format(&group.element(w.to_vec())?))
}

pub fn harmonic_measure_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let (group, mu) = group_setup(cfg)?;
    let c = &cfg.config;
    let model = model(cfg, &group, &mu, mc)?;
    let depth = c.depths.cylinder;
    let residuals: Vec<(usize, f64)> = (1..=c.depths.stationarity)
        .map(|d| (d, stationarity_residual(&model, &mu, d)))
        .collect();

    // Frequencies of confirmed prefixes on streams disjoint from any fit.
    let paths = c.paths.harmonic;
    let prefixes = mc.map_indexed(paths, |i| {
        let mut rng = mc.rng(CHECK_STREAM_BASE + i as u64);
        track_to_depth(&group, &mu, depth, c.margins.boundary, c.margins.max_steps, &mut rng)
    });
    let mut counts: HashMap<Vec<poisson_walks::Letter>, u64> = HashMap::new();
    let mut used = 0u64;
    for p in prefixes {
        let p = p?;
        used += 1;
        for d in 1..=depth.min(p.len()) {
            *counts.entry(p.letters()[..d].to_vec()).or_default() += 1;
        }
    }
    // A fitted model carries its own sampling error: two-sample variance.
    let inv_n = 1.0 / used as f64 + model.fit_summary().map_or(0.0, |f| 1.0 / f.paths as f64);
    let mut rows = Vec::new();
    let mut max_z: f64 = 0.0;
    for d in 1..=depth {
        for (w, mass) in model.cylinders(d) {
            let k = counts.get(&w).copied().unwrap_or(0) as f64;
            let sd = (mass * (1.0 - mass) * inv_n).sqrt();
            let z = if sd > 0.0 { (k / used as f64 - mass) / sd } else { 0.0 };
            max_z = max_z.max(z.abs());
            rows.push(json!({"word": letters_key(&group, &w)?, "mass": mass, "frequency": k / used as f64, "z": z}));
        }
    }

    // A fitted model is compared with the exact one when that exists.
    let exact_gap = match (model.is_exact(), exact_harmonic_measure(&group, &mu)) {
        (false, Some(exact)) => Some(
            (1..=depth)
                .flat_map(|d| exact.cylinders(d))
                .map(|(w, m)| (model.cylinder_mass(&w) - m).abs())
                .fold(0.0, f64::max),
        ),
        _ => None,
    };

    let mut checks = vec![Check::new(
        "frequencies",
        max_z <= c.tolerances.cylinder_sigma,
        format!("max |z| = {max_z:.3} over depth <= {depth} cylinders, {used} paths"),
    )];
    let worst = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    if model.is_exact() {
        checks.push(at_most("stationarity", worst, c.tolerances.stationarity));
    }
    let body = json!({
        "exact": model.is_exact(),
        "fit": model.fit_summary(),
        "first": model.first(),
        "transition": model.transition(),
        "stationarity": residuals.iter().map(|&(d, r)| json!({"depth": d, "residual": r})).collect::<Vec<_>>(),
        "frequency_paths": used,
        "max_abs_z": max_z,
        "cylinders": rows,
        "max_gap_to_exact": exact_gap,
    });
    let series = vec![Series::values("stationarity", residuals)];
    let extra = vec![("cylinders.csv".to_string(), model.cylinder_csv(depth))];
    Ok(Outcome { body, series, checks, extra })
}

pub fn rn_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let (group, mu) = group_setup(cfg)?;
    let c = &cfg.config;
    let model = model(cfg, &group, &mu, mc)?;
    let radius = c.depths.rn_ball;
    let ball = group.ball(radius, c.limits.elements)?;
    let small = group.ball(2, c.limits.elements)?;
    let closed_form = is_srw(cfg) && matches!(group.kind(), GroupKind::Free { .. });
    let tol = c.tolerances.rn;

    let mut samples = Vec::new();
    let mut max_closed: f64 = 0.0;
    let mut max_cocycle: f64 = 0.0;
    let mut max_harmonic: f64 = 0.0;
    let mut by_length = vec![0.0f64; radius + 1];
    for i in 0..c.paths.rays {
        let mut ray = model.sample_ray(mc.rng(i as u64));
        ray.extend_to(2 * radius + 4, &model)?;
        let xi = ray.letters().to_vec();
        let xi_str = ray.to_string(&group);
        for g in &ball {
            let r = radon_nikodym(&model, g, &xi)?;
            let mut entry = json!({"ray": xi_str, "g": group.format(g), "rn": r, "confluence": common_prefix_len(g.letters(), &xi)});
            if closed_form {
                let f = srw_free_rn(&group, g, &xi)?;
                let e = (r - f).abs() / f.max(1.0);
                max_closed = max_closed.max(e);
                let slot = &mut by_length[group.word_length(g)];
                *slot = slot.max(e);
                entry["closed_form"] = json!(f);
            }
            samples.push(entry);
        }
        // rn(gh, xi) = rn(g, xi) rn(h, g^{-1} xi)
        for g in &small {
            let mut moved = ray.translate(&group, &group.inverse(g), &model)?;
            let rg = radon_nikodym_ray(&model, g, &mut ray)?;
            for h in &small {
                let gh = group.multiply(g, h);
                let lhs = radon_nikodym_ray(&model, &gh, &mut ray)?;
                let rhs = rg * radon_nikodym_ray(&model, h, &mut moved)?;
                max_cocycle = max_cocycle.max((lhs - rhs).abs() / lhs.abs().max(1.0));
            }
        }
        // sum_y mu(x^{-1} y) rn(y, xi) = rn(x, xi)
        for x in &small {
            let mut acc = 0.0;
            for (s, p) in mu.atoms() {
                acc += p * radon_nikodym_ray(&model, &group.multiply(x, s), &mut ray)?;
            }
            let rx = radon_nikodym_ray(&model, x, &mut ray)?;
            max_harmonic = max_harmonic.max((acc - rx).abs() / rx.abs().max(1.0));
        }
    }
    let mut checks = vec![
        at_most("cocycle", max_cocycle, tol),
        at_most("harmonicity", max_harmonic, tol),
    ];
    if closed_form {
        checks.insert(0, at_most("closed_form", max_closed, tol));
    }
    let body = json!({
        "rays": c.paths.rays,
        "ball_radius": radius,
        "exact_model": model.is_exact(),
        "max_closed_form_error": closed_form.then_some(max_closed),
        "max_cocycle_error": max_cocycle,
        "max_harmonicity_error": max_harmonic,
        "samples": samples,
    });
    let series = if closed_form {
        vec![Series::values("max_closed_form_error", by_length.into_iter().enumerate())]
    } else {
        vec![]
    };
    Ok(Outcome { body, series, checks, extra: vec![] })
}

fn trend_points(trace: &[TracePoint], grid: &[usize]) -> Vec<TracePoint> {
    grid.iter().filter_map(|&n| trace.iter().find(|t| t.n == n).copied()).collect()
}

fn nonincreasing(points: &[TracePoint]) -> bool {
    points.windows(2).all(|w| w[1].value <= w[0].value)
}

pub fn conditional_entropy_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let (group, mu) = group_setup(cfg)?;
    let c = &cfg.config;
    let n = c.horizons.entropy;
    let model = model(cfg, &group, &mu, mc)?;
    let table = PowerTable::build(&group, &mu, n, c.limits.elements)?;
    let cond = conditional_entropy_estimate(&group, &mu, &table, Conditioning::Boundary(&model), n, c.paths.conditional, mc)?;
    let triv = conditional_entropy_estimate(&group, &mu, &table, Conditioning::Trivial, n, c.paths.conditional, mc)?;
    let trend = trend_points(&cond.report.trace, &c.horizons.trend);
    let decreasing = nonincreasing(&trend);
    let mut checks = vec![
        at_most("conditioned", cond.report.estimate, c.tolerances.conditional),
        Check::new(
            "trend",
            decreasing,
            format!("values over {:?}: {:?}", c.horizons.trend, trend.iter().map(|t| t.value).collect::<Vec<_>>()),
        ),
    ];
    if let Some(target) = c.targets.control {
        checks.push(within("trivial_control", triv.report.estimate, target, c.tolerances.control));
    }
    let body = json!({
        "horizon": n,
        "exact_model": model.is_exact(),
        "conditioned": cond,
        "trivial": triv,
        "trend": trend,
        "decreasing": decreasing,
    });
    let series = vec![
        Series::new("conditioned", cond.report.trace.clone()),
        Series::new("trivial", triv.report.trace.clone()),
    ];
    Ok(Outcome { body, series, checks, extra: vec![] })
}

pub fn entropy_gap_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let (group, mu) = group_setup(cfg)?;
    let c = &cfg.config;
    let n = c.horizons.entropy;
    let model = model(cfg, &group, &mu, mc)?;
    let m = &c.margins;
    let full = entropy_gap(&group, &mu, Conditioning::Boundary(&model), c.paths.gap, m.boundary, m.max_steps, mc)?;
    let trivial = entropy_gap(&group, &mu, Conditioning::Trivial, c.paths.gap, m.boundary, m.max_steps, mc)?;
    let table = PowerTable::build(&group, &mu, n, c.limits.elements)?;
    let h_n = table.get(n).entropy() / n as f64;
    let cond = conditional_entropy_estimate(&group, &mu, &table, Conditioning::Boundary(&model), n, c.paths.conditional, mc)?;
    let h_mu = mu.entropy();
    let lhs = full.mean - (h_mu - h_n);
    let joint = (full.stderr.powi(2) + cond.report.stderr.powi(2)).sqrt();
    let dev = (lhs - cond.report.estimate).abs();
    let checks = vec![
        Check::new(
            "identity",
            dev <= c.tolerances.gap_sigma * joint,
            format!("gap - (H(mu) - h_n) = {lhs:.6} vs conditional {:.6}; |diff| = {dev:.3e}, joint stderr {joint:.3e}", cond.report.estimate),
        ),
        Check::new(
            "strict_monotonicity",
            full.mean < trivial.mean,
            format!("{:.6} < {:.6}", full.mean, trivial.mean),
        ),
    ];
    let body = json!({
        "horizon": n,
        "entropy_of_mu": h_mu,
        "h_n": h_n,
        "gap_boundary": full,
        "gap_trivial": trivial,
        "conditional": cond.report.estimate,
        "conditional_stderr": cond.report.stderr,
        "identity_lhs": lhs,
    });
    let series = vec![
        Series::new("gap_boundary", vec![TracePoint { n: 1, value: full.mean, stderr: full.stderr }]),
        Series::new("gap_trivial", vec![TracePoint { n: 1, value: trivial.mean, stderr: trivial.stderr }]),
    ];
    Ok(Outcome { body, series, checks, extra: vec![] })
}

pub fn maximality_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let (group, mu) = group_setup(cfg)?;
    let c = &cfg.config;
    let t = &c.tolerances;
    let model = model(cfg, &group, &mu, mc)?;
    let table = PowerTable::build(&group, &mu, c.horizons.entropy, c.limits.elements)?;
    let cond = maximality_report(&table, Conditioning::Boundary(&model), c.paths.maximality, t.maximality_epsilon, t.maximality, mc)?;
    let uncond = maximality_report(&table, Conditioning::Trivial, 1, t.maximality_epsilon, t.maximality, mc)?;
    let last_rate = |r: &poisson_walks::conditional::MaximalityReport| r.rows.last().map_or(f64::NAN, |x| x.rate);
    let checks = vec![
        Check::new("conditioned", cond.verdict == "maximal-consistent", format!("{} (rate {:.6})", cond.verdict, last_rate(&cond))),
        Check::new(
            "negative_control",
            last_rate(&uncond) > t.negative_control,
            format!("{:.6} > {}", last_rate(&uncond), t.negative_control),
        ),
    ];
    let rows = |r: &poisson_walks::conditional::MaximalityReport| r.rows.iter().map(|x| (x.n, x.rate)).collect::<Vec<_>>();
    let series = vec![Series::values("conditioned", rows(&cond)), Series::values("unconditioned", rows(&uncond))];
    let body = json!({"conditioned": cond, "unconditioned": uncond});
    Ok(Outcome { body, series, checks, extra: vec![] })
}

pub fn ray_check_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let (group, mu) = group_setup(cfg)?;
    let c = &cfg.config;
    let top = *c.horizons.ray.last().expect("validated nonempty");
    let drift = estimate_drift(&group, &mu, top, c.paths.drift, mc);
    let report = ray_criterion_check(
        &group,
        &mu,
        &c.horizons.ray,
        c.paths.ray,
        drift.estimate,
        c.margins.boundary,
        c.margins.ray_cap_factor,
        c.tolerances.ray,
        mc,
    )?;
    let censored = report.horizons.iter().map(|h| h.censored_fraction).fold(0.0, f64::max);
    let last = report.horizons.last().expect("nonempty grid");
    let checks = vec![
        Check::new(
            "median",
            report.pass,
            format!("median {:.6} <= {} and decreasing = {}", last.median, report.threshold, report.decreasing),
        ),
        Check::new("censoring", censored < c.tolerances.censoring, format!("{censored:.4} < {}", c.tolerances.censoring)),
    ];
    let series = vec![
        Series::values("median", report.horizons.iter().map(|h| (h.n, h.median))),
        Series::values("q90", report.horizons.iter().map(|h| (h.n, h.q90))),
    ];
    let body = json!({"drift_estimate": drift.estimate, "drift_stderr": drift.stderr, "report": report});
    Ok(Outcome { body, series, checks, extra: vec![] })
}

pub fn strip_check_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let (group, mu) = group_setup(cfg)?;
    let c = &cfg.config;
    let n = c.horizons.strip;
    let margin = c.margins.boundary;
    let report = strip_criterion_check(&group, &mu, n, c.paths.strip, margin, c.tolerances.strip, mc)?;

    // Growth and equivariance on the strip of the first bilateral path.
    let reflected = mu.reflect(&group);
    let walk = |m: &Measure, stream: u64| {
        let mut rng = mc.rng(stream);
        let mut w = Walker::new();
        for _ in 0..n {
            w.step(&group, m.sample(&mut rng));
        }
        w.position()
    };
    let plus = BoundaryPrefix::from_position(&walk(&mu, 0), margin, n);
    let minus = BoundaryPrefix::from_position(&walk(&reflected, 1), margin, n);
    let strip = strip_from_prefixes(&group, &minus, &plus)?;
    let k_max = plus.len().min(minus.len());
    let growth = strip_growth(&strip, k_max);

    let movers = group.ball(2, c.limits.elements)?;
    let probes = group.ball(4, c.limits.elements)?;
    let mut spot_checks = 0usize;
    let mut mismatches = 0usize;
    for g in &movers {
        let moved = strip.translate(g)?;
        for s in &probes {
            spot_checks += 1;
            if moved.contains(&group.multiply(g, s))? != strip.contains(s)? {
                mismatches += 1;
            }
        }
    }
    let checks = vec![
        Check::new(
            "statistic",
            report.pass,
            format!("max {:.6e} <= {} (bound respected: {}, censored {})", report.max, report.threshold, report.within_bound, report.censored),
        ),
        within("growth_exponent", growth.exponent, 1.0, c.tolerances.strip_growth),
        Check::new("equivariance", mismatches == 0, format!("{mismatches} mismatches in {spot_checks} spot checks")),
    ];
    let series = vec![
        Series::values("statistic", report.statistics.iter().copied().enumerate()),
        Series::values("card", growth.rows.iter().map(|&(k, m)| (k, m as f64))),
    ];
    let body = json!({
        "report": report,
        "growth": {"k_max": k_max, "confluence": strip.confluence(), "exponent": growth.exponent},
        "equivariance": {"spot_checks": spot_checks, "mismatches": mismatches},
    });
    Ok(Outcome { body, series, checks, extra: vec![] })
}

pub fn regularity_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let c = &cfg.config;
    let t = &c.tolerances;
    let mut body = json!({});
    let mut series = Vec::new();
    let mut checks = Vec::new();
    if c.group.is_some() {
        let (group, mu) = group_setup(cfg)?;
        let path = sample_path(&group, &mu, c.horizons.regularity, &mut mc.rng(0));
        let th = RegularityThresholds { jump: t.jump, drift_change: t.drift_change, conclusion: t.conclusion, zero_rate: t.zero_rate };
        let r = regularity_check(&group, path.elements(), None, &th)?;
        checks.push(Check::new("group", r.verdict == "regular-consistent", format!("{} {:?}", r.verdict, r.reasons)));
        let indexed = |v: &[f64]| v.iter().copied().enumerate().map(|(i, x)| (i + 1, x)).collect::<Vec<_>>();
        series.push(Series::values("jump", indexed(&r.jump_trace)));
        series.push(Series::values("rate", indexed(&r.rate_trace)));
        series.push(Series::values("conclusion", indexed(&r.conclusion_trace)));
        body["group"] = json!({"rate": r.rate, "verdict": r.verdict, "reasons": r.reasons});
    }
    if c.matrix.is_some() {
        let mu = cfg.matrix_measure()?;
        let r = matrix_regularity_check(&mu, &c.horizons.matrix, c.paths.matrix, t.matrix_regularity, mc)?;
        checks.push(Check::new("matrix", r.verdict == "regular-consistent", r.verdict.clone()));
        series.push(Series::values("deviation", r.horizons.iter().copied().zip(r.deviation.iter().copied())));
        body["matrix"] = json!(r);
    }
    if checks.is_empty() {
        return Err(CliError::Validation("regularity needs a [group] or [matrix] section".into()));
    }
    Ok(Outcome { body, series, checks, extra: vec![] })
}

pub fn lyapunov_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let c = &cfg.config;
    let t = &c.tolerances;
    let mu = cfg.matrix_measure()?;
    let report = lyapunov_vector(&mu, c.horizons.lyapunov, c.paths.lyapunov, mc)?;

    // QR readout against exact integer products.
    let n = c.horizons.exact_matrix;
    let atoms = mu.integer_atoms().ok_or_else(|| CliError::Validation("exact comparison needs integer matrices".into()))?;
    let mut qr_error: f64 = 0.0;
    let mut sum_error: f64 = report.max_sum;
    for i in 0..c.paths.exact_matrix {
        let idx = sample_indices(&mu, n, &mut mc.rng(CHECK_STREAM_BASE + i as u64));
        let mut acc = QRAccumulator::new(mu.dim());
        for &k in &idx {
            acc.step(&mu.atoms()[k].0)?;
        }
        let approx = acc.radial_part();
        let exact = exact_radial_part(&exact_product(atoms, &idx)?)?;
        for (a, b) in approx.alpha.iter().zip(&exact.alpha) {
            qr_error = qr_error.max((a - b).abs());
        }
        sum_error = sum_error.max(approx.sum.abs());
    }
    let checks = vec![
        at_most("qr_vs_exact", qr_error, t.qr_exact * n as f64),
        at_most("radial_sum", sum_error, t.radial_sum),
        Check::new("top_exponent", report.mean[0] > t.lyapunov_min, format!("{:.6} > {}", report.mean[0], t.lyapunov_min)),
        Check::new("spread", report.stddev[0] < t.lyapunov_spread, format!("{:.6} < {}", report.stddev[0], t.lyapunov_spread)),
    ];
    let series = vec![Series::values("alpha1_spread", report.spread.iter().map(|s| (s.n, s.stddev)))];
    let body = json!({"report": report, "exact_horizon": n, "max_qr_error": qr_error, "max_radial_sum": sum_error});
    Ok(Outcome { body, series, checks, extra: vec![] })
}

pub fn flag_cmd(cfg: &LoadedConfig, mc: &McConfig) -> Result<Outcome, CliError> {
    let c = &cfg.config;
    let mu = cfg.matrix_measure()?;
    let report = flag_convergence(&mu, &c.horizons.matrix, c.paths.matrix, c.tolerances.flag_gap, mc)?;
    let rows: Vec<Vec<f64>> = cfg.equivariance_element()?.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    let g = SquareMatrix::from_f64_rows(&rows)?;
    let n = *c.horizons.matrix.last().expect("validated nonempty");
    let equiv = flag_equivariance(&mu, &g, n, CHECK_STREAM_BASE, mc)?;
    let mut checks = vec![at_most("equivariance", equiv, c.tolerances.flag_equivariance)];
    match &report.verdict {
        Some(v) => checks.push(Check::new("cauchy", v == "cauchy-consistent", v.clone())),
        None => checks.push(Check::new("cauchy", false, report.warning.clone().unwrap_or_default())),
    }
    let series = vec![Series::values("flag_distance", report.horizons.iter().copied().zip(report.distance.iter().copied()))];
    let body = json!({"report": report, "equivariance_distance": equiv, "equivariance_horizon": n});
    Ok(Outcome { body, series, checks, extra: vec![] })
}

//! Geometric identification criteria on tree instances: strips between two
//! boundary points, the ray approximation of sample paths, and the
//! regularity diagnostics for a single sequence.

use serde::Serialize;

use crate::boundary::{check_nonelementary, BoundaryPrefix};
use crate::error::{Error, Result};
use crate::group::{common_prefix_len, Element, GroupSpec};
use crate::mc::{quantile, McConfig};
use crate::walk::Walker;
use crate::Measure;

/// The bi-infinite geodesic between two distinct ends of a tree, known
/// through finite prefixes of both rays.
#[derive(Debug, Clone, PartialEq)]
pub struct Strip {
    group: GroupSpec,
    minus: Element,
    plus: Element,
    confluence: usize,
}

/// `S(b_-, b_+)` on a tree instance.
pub fn strip_tree(group: &GroupSpec, minus: &Element, plus: &Element) -> Result<Strip> {
    if !group.is_tree() {
        return Err(Error::NotATree);
    }
    let c = common_prefix_len(minus.letters(), plus.letters());
    if c == minus.len().min(plus.len()) {
        return Err(Error::IndistinguishableRays(c));
    }
    Ok(Strip { group: group.clone(), minus: minus.clone(), plus: plus.clone(), confluence: c })
}

pub fn strip_from_prefixes(group: &GroupSpec, minus: &BoundaryPrefix, plus: &BoundaryPrefix) -> Result<Strip> {
    strip_tree(group, minus.element(), plus.element())
}

impl Strip {
    /// Length of the common prefix of the two rays; the strip passes
    /// through that prefix and nowhere closer to `e`.
    pub fn confluence(&self) -> usize {
        self.confluence
    }

    pub fn confluence_point(&self) -> Element {
        self.plus.prefix(self.confluence)
    }

    /// Members of word length at most `k`, sorted shortlex.
    pub fn window(&self, k: usize) -> Result<Vec<Element>> {
        let known = self.minus.len().min(self.plus.len());
        if k > known {
            return Err(Error::PrefixTooShort { needed: k, available: known });
        }
        if k < self.confluence {
            return Ok(Vec::new());
        }
        let mut out: Vec<Element> = (self.confluence..=k).map(|j| self.minus.prefix(j)).collect();
        out.extend((self.confluence + 1..=k).map(|j| self.plus.prefix(j)));
        out.sort();
        Ok(out)
    }

    /// `card[S ∩ ball(k)] = 2(k - c) + 1` for `k >= c`, else 0.
    pub fn card_in_ball(&self, k: usize) -> usize {
        if k < self.confluence {
            0
        } else {
            2 * (k - self.confluence) + 1
        }
    }

    /// `g ∈ S` iff the Gromov product of the two ends seen from `g` is 0.
    pub fn contains(&self, g: &Element) -> Result<bool> {
        let known = self.minus.len().min(self.plus.len());
        if known <= g.len() {
            return Err(Error::PrefixTooShort { needed: g.len() + 1, available: known });
        }
        let ginv = self.group.inverse(g);
        let m = self.group.multiply(&ginv, &self.minus);
        let p = self.group.multiply(&ginv, &self.plus);
        Ok(common_prefix_len(m.letters(), p.letters()) == 0)
    }

    /// `S(g b_-, g b_+)`. Each prefix keeps `len - |g|` reliable letters.
    pub fn translate(&self, g: &Element) -> Result<Strip> {
        let known = self.minus.len().min(self.plus.len());
        if known <= g.len() {
            return Err(Error::PrefixTooShort { needed: g.len() + 1, available: known });
        }
        let cut = |b: &Element| {
            let moved = self.group.multiply(g, b);
            moved.prefix(b.len() - g.len())
        };
        strip_tree(&self.group, &cut(&self.minus), &cut(&self.plus))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StripGrowth {
    /// `(k, card[S ∩ ball(k)])`.
    pub rows: Vec<(usize, usize)>,
    /// Least-squares slope of `log card` against `log k` over the upper
    /// three quarters of the range.
    pub exponent: f64,
}

pub fn strip_growth(strip: &Strip, k_max: usize) -> StripGrowth {
    let rows: Vec<(usize, usize)> = (0..=k_max).map(|k| (k, strip.card_in_ball(k))).collect();
    let lo = (k_max / 4).max(1);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(k, c)| *k >= lo && *c > 0)
        .map(|&(k, c)| ((k as f64).ln(), (c as f64).ln()))
        .collect();
    StripGrowth { rows, exponent: slope(&pts) }
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StripReport {
    pub n: usize,
    pub paths: usize,
    /// `(1/n) log card[S(b_-, b_+) ∩ ball(|x_n|)]` per path.
    pub statistics: Vec<f64>,
    pub median: f64,
    pub max: f64,
    /// Every statistic is within `log(2|x_n| + 1) / n`.
    pub within_bound: bool,
    /// Paths whose two rays could not be told apart.
    pub censored: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// Strip statistic over bilateral paths: `b_+` from the forward half
/// (stream `2i`), `b_-` from the reflected backward half (stream `2i + 1`).
pub fn strip_criterion_check(
    group: &GroupSpec,
    mu: &Measure,
    n: usize,
    paths: usize,
    margin: usize,
    threshold: f64,
    mc: &McConfig,
) -> Result<StripReport> {
    if !group.is_tree() {
        return Err(Error::NotATree);
    }
    check_nonelementary(group, mu)?;
    let reflected = mu.reflect(group);
    let per_path = mc.map_indexed(paths, |i| -> Option<(f64, f64)> {
        let fwd = run(group, mu, n, &mut mc.rng(2 * i as u64));
        let bwd = run(group, &reflected, n, &mut mc.rng(2 * i as u64 + 1));
        let plus = BoundaryPrefix::from_position(&fwd, margin, n);
        let minus = BoundaryPrefix::from_position(&bwd, margin, n);
        let strip = strip_from_prefixes(group, &minus, &plus).ok()?;
        let len = group.word_length(&fwd);
        let stat = (strip.card_in_ball(len) as f64).ln() / n as f64;
        let bound = ((2 * len + 1) as f64).ln() / n as f64;
        Some((stat, bound))
    });
    let kept: Vec<(f64, f64)> = per_path.iter().flatten().copied().collect();
    let statistics: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let within_bound = kept.iter().all(|(s, b)| s <= b);
    let max = statistics.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(StripReport {
        n,
        paths,
        median: quantile(&statistics, 0.5),
        max,
        within_bound,
        censored: paths - kept.len(),
        threshold,
        pass: !statistics.is_empty() && within_bound && max <= threshold,
        statistics,
    })
}

fn run<R: rand::Rng + ?Sized>(group: &GroupSpec, mu: &Measure, n: usize, rng: &mut R) -> Element {
    let mut w = Walker::new();
    for _ in 0..n {
        w.step(group, mu.sample(rng));
    }
    w.position()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayHorizon {
    pub n: usize,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
    pub censored_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayReport {
    pub drift: f64,
    pub horizons: Vec<RayHorizon>,
    pub decreasing: bool,
    pub threshold: f64,
    pub pass: bool,
}

/// Ray criterion statistic `(1/n) d(x_n, pi_n(xi))` with
/// `pi_n(xi) = xi[..floor(n * drift)]`. The limit `xi` is confirmed on the
/// same path run to `N = n, 2n, 4n, ...` up to `cap_factor * n`; paths still
/// short of `floor(n * drift)` letters are censored.
#[allow(clippy::too_many_arguments)]
pub fn ray_criterion_check(
    group: &GroupSpec,
    mu: &Measure,
    horizons: &[usize],
    paths: usize,
    drift: f64,
    margin: usize,
    cap_factor: usize,
    threshold: f64,
    mc: &McConfig,
) -> Result<RayReport> {
    if !group.is_tree() {
        return Err(Error::NotATree);
    }
    let mut out = Vec::with_capacity(horizons.len());
    for &n in horizons {
        let t = (n as f64 * drift).floor() as usize;
        let per_path = mc.map_indexed(paths, |i| -> Option<f64> {
            let mut rng = mc.rng(i as u64);
            let mut w = Walker::new();
            for _ in 0..n {
                w.step(group, mu.sample(&mut rng));
            }
            let xn = w.position();
            let mut horizon = n;
            loop {
                if w.letters().len() >= t + margin {
                    let xi = Element::from_reduced(w.letters()[..t].to_vec());
                    return Some(group.distance(&xn, &xi) as f64 / n as f64);
                }
                if horizon * 2 > cap_factor.max(1) * n {
                    return None;
                }
                for _ in 0..horizon {
                    w.step(group, mu.sample(&mut rng));
                }
                horizon *= 2;
            }
        });
        let stats: Vec<f64> = per_path.iter().flatten().copied().collect();
        out.push(RayHorizon {
            n,
            median: quantile(&stats, 0.5),
            q90: quantile(&stats, 0.9),
            max: stats.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            censored_fraction: (paths - stats.len()) as f64 / paths.max(1) as f64,
        });
    }
    let decreasing = out.windows(2).all(|w| w[1].median <= w[0].median);
    let last = out.last().map_or(f64::NAN, |h| h.median);
    Ok(RayReport { drift, pass: decreasing && last <= threshold, horizons: out, decreasing, threshold })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityThresholds {
    /// Bound on the final `(1/n) max_{m < n} d(x_m, x_{m+1})`.
    pub jump: f64,
    /// Bound on `| |x_N|/N - |x_{N/2}|/(N/2) |`.
    pub drift_change: f64,
    /// Bound on the worst conclusion statistic over the second half.
    pub conclusion: f64,
    /// Rates below this count as `l = 0`.
    pub zero_rate: f64,
}

impl Default for RegularityThresholds {
    fn default() -> Self {
        RegularityThresholds { jump: 0.05, drift_change: 0.05, conclusion: 0.05, zero_rate: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    /// `(1/n) max_{m < n} d(x_m, x_{m+1})`, `n = 1..N`.
    pub jump_trace: Vec<f64>,
    /// `|x_n| / n`, `n = 1..N`.
    pub rate_trace: Vec<f64>,
    /// `d(x_n, alpha(floor(n l))) / n`, `n = 1..N`, with `alpha` read off
    /// the last element.
    pub conclusion_trace: Vec<f64>,
    pub rate: f64,
    pub verdict: String,
    pub reasons: Vec<String>,
}

/// Diagnostics for a finite sequence `x_0, ..., x_N` against the two
/// hypotheses and the conclusion of the regularity criterion.
pub fn regularity_check(
    group: &GroupSpec,
    xs: &[Element],
    rate_hint: Option<f64>,
    th: &RegularityThresholds,
) -> Result<RegularityReport> {
    if xs.len() < 2 {
        return Err(Error::EmptyPath);
    }
    let big_n = xs.len() - 1;
    let mut jump_trace = Vec::with_capacity(big_n);
    let mut worst = 0usize;
    for n in 1..=big_n {
        worst = worst.max(group.distance(&xs[n - 1], &xs[n]));
        jump_trace.push(worst as f64 / n as f64);
    }
    let rate_trace: Vec<f64> = (1..=big_n).map(|n| group.word_length(&xs[n]) as f64 / n as f64).collect();
    let rate = rate_hint.unwrap_or(rate_trace[big_n - 1]);
    let alpha = &xs[big_n];
    let conclusion_trace: Vec<f64> = (1..=big_n)
        .map(|n| {
            let t = ((n as f64 * rate).floor() as usize).min(alpha.len());
            group.distance(&xs[n], &alpha.prefix(t)) as f64 / n as f64
        })
        .collect();

    let mut reasons = Vec::new();
    let half = (big_n / 2).max(1);
    if jump_trace[big_n - 1] > th.jump {
        reasons.push(format!("jumps are not o(n): {:.4}", jump_trace[big_n - 1]));
    }
    let change = (rate_trace[big_n - 1] - rate_trace[half - 1]).abs();
    if change > th.drift_change {
        reasons.push(format!("|x_n|/n does not settle: changed by {change:.4}"));
    }
    let tail_worst = conclusion_trace[half - 1..].iter().copied().fold(0.0, f64::max);
    if tail_worst > th.conclusion {
        reasons.push(format!("sequence leaves the ray: {tail_worst:.4}"));
    }
    let verdict = if !reasons.is_empty() {
        "not-regular"
    } else if rate < th.zero_rate {
        "trivially-regular"
    } else {
        "regular-consistent"
    };
    Ok(RegularityReport {
        jump_trace,
        rate_trace,
        conclusion_trace,
        rate,
        verdict: verdict.to_string(),
        reasons,
    })
}

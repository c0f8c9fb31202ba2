//! Doob transforms of a walk by positive harmonic functions, walks
//! conditioned on a boundary point, and the entropy statistics that decide
//! whether a boundary is the whole Poisson boundary.

use rand::Rng;
use serde::Serialize;

use crate::boundary::{radon_nikodym, HarmonicMeasureModel, Ray};
use crate::error::{Error, Result};
use crate::group::{Element, GroupSpec, Letter};
use crate::mc::{Estimate, EstimatorReport, McConfig};
use crate::walk::{PathSample, PowerTable, Walker};
use crate::Measure;

type RnFn = Box<dyn Fn(&Element) -> Result<f64>>;

/// Row sums of a Doob kernel must be 1 to this tolerance.
pub const ROW_TOLERANCE: f64 = 1e-10;

/// A positive `mu`-harmonic function normalized by `f(e) = 1`.
pub trait HarmonicFunction: Send + Sync {
    fn value(&self, x: &Element) -> Result<f64>;
}

/// `f = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unit;

impl HarmonicFunction for Unit {
    fn value(&self, _: &Element) -> Result<f64> {
        Ok(1.0)
    }
}

/// `x -> (d x nu / d nu)(xi)` for a ray known to a fixed depth.
#[derive(Debug, Clone)]
pub struct MartinKernel {
    model: HarmonicMeasureModel,
    xi: Vec<Letter>,
}

impl MartinKernel {
    /// Freezes `xi` at `depth` letters; elements with up to `depth - 3`
    /// letters can then be evaluated.
    pub fn new(model: &HarmonicMeasureModel, xi: &mut Ray, depth: usize) -> Result<Self> {
        xi.extend_to(depth, model)?;
        Ok(MartinKernel { model: model.clone(), xi: xi.letters()[..depth].to_vec() })
    }

    pub fn from_prefix(model: &HarmonicMeasureModel, xi: &Element) -> Self {
        MartinKernel { model: model.clone(), xi: xi.letters().to_vec() }
    }

    pub fn ray(&self) -> &[Letter] {
        &self.xi
    }
}

impl HarmonicFunction for MartinKernel {
    fn value(&self, x: &Element) -> Result<f64> {
        radon_nikodym(&self.model, x, &self.xi)
    }
}

/// Convex combination `sum w_i f_i`.
pub struct Mixture {
    parts: Vec<(f64, Box<dyn HarmonicFunction>)>,
}

impl Mixture {
    pub fn new(parts: Vec<(f64, Box<dyn HarmonicFunction>)>) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("mixture weights must be a probability vector".into()));
        }
        Ok(Mixture { parts })
    }
}

impl HarmonicFunction for Mixture {
    fn value(&self, x: &Element) -> Result<f64> {
        self.parts.iter().map(|(w, f)| Ok(w * f.value(x)?)).sum()
    }
}

/// Transition kernel `p(x, y) = mu(x^{-1} y) f(y) / f(x)`.
pub struct DoobKernel<F> {
    group: GroupSpec,
    mu: Measure,
    f: F,
}

impl<F: HarmonicFunction> DoobKernel<F> {
    pub fn function(&self) -> &F {
        &self.f
    }

    pub fn base(&self) -> &Measure {
        &self.mu
    }

    /// `p(x, y)`.
    pub fn prob(&self, x: &Element, y: &Element) -> Result<f64> {
        let h = self.group.multiply(&self.group.inverse(x), y);
        let m = self.mu.mass(&h);
        if m == 0.0 {
            return Ok(0.0);
        }
        Ok(m * self.f.value(y)? / self.f.value(x)?)
    }

    /// The row at `x`, one entry per atom of `mu`, checked to sum to 1.
    pub fn row(&self, x: &Element) -> Result<Vec<(Element, f64)>> {
        let fx = self.f.value(x)?;
        let mut row = Vec::with_capacity(self.mu.len());
        let mut sum = 0.0;
        for (h, p) in self.mu.atoms() {
            let y = self.group.multiply(x, h);
            let q = p * self.f.value(&y)? / fx;
            sum += q;
            row.push((y, q));
        }
        if (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::NotHarmonic { row_sum: sum, at: self.group.format(x) });
        }
        Ok(row)
    }

    fn step<R: Rng + ?Sized>(&self, x: &Element, rng: &mut R) -> Result<Element> {
        let row = self.row(x)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (y, q) in &row {
            acc += q;
            if u < acc {
                return Ok(y.clone());
            }
        }
        Ok(row.iter().rev().find(|(_, q)| *q > 0.0).map(|(y, _)| y.clone()).expect("row has mass"))
    }
}

/// Doob transform by the Martin kernel of `xi`, frozen at `depth` letters.
pub fn doob_kernel(
    group: &GroupSpec,
    mu: &Measure,
    model: &HarmonicMeasureModel,
    xi: &mut Ray,
    depth: usize,
) -> Result<DoobKernel<MartinKernel>> {
    Ok(DoobKernel {
        group: group.clone(),
        mu: mu.clone(),
        f: MartinKernel::new(model, xi, depth)?,
    })
}

/// Doob transform by an explicit function; checks `f(e) = 1` and the row
/// sums on the ball of radius 2.
pub fn doob_kernel_from_function<F: HarmonicFunction>(group: &GroupSpec, mu: &Measure, f: F) -> Result<DoobKernel<F>> {
    let fe = f.value(&Element::identity())?;
    if (fe - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("f(e) = {fe}, expected 1")));
    }
    let k = DoobKernel { group: group.clone(), mu: mu.clone(), f };
    for x in group.ball(2, crate::group::DEFAULT_ELEMENT_CAP)? {
        if k.f.value(&x)? <= 0.0 {
            return Err(Error::InvalidArgument(format!("f is not positive at {}", group.format(&x))));
        }
        k.row(&x)?;
    }
    Ok(k)
}

pub fn sample_conditional<F: HarmonicFunction, R: Rng + ?Sized>(
    kernel: &DoobKernel<F>,
    n: usize,
    rng: &mut R,
) -> Result<PathSample> {
    let mut xs = Vec::with_capacity(n + 1);
    xs.push(Element::identity());
    for _ in 0..n {
        let next = kernel.step(xs.last().unwrap(), rng)?;
        xs.push(next);
    }
    PathSample::from_positions(&kernel.group, xs)
}

/// `prod p(x_{i-1}, x_i)`.
pub fn path_density<F: HarmonicFunction>(kernel: &DoobKernel<F>, path: &PathSample) -> Result<f64> {
    let xs = path.elements();
    let mut d = 1.0;
    for i in 1..xs.len() {
        let p = kernel.prob(&xs[i - 1], &xs[i])?;
        if p == 0.0 {
            return Err(Error::ZeroProbabilityStep(i));
        }
        d *= p;
    }
    Ok(d)
}

/// What the walk is conditioned on.
#[derive(Debug, Clone, Copy)]
pub enum Conditioning<'a> {
    /// The trivial boundary: no conditioning.
    Trivial,
    /// The boundary of the tree with harmonic measure `model`.
    Boundary(&'a HarmonicMeasureModel),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalEntropyReport {
    /// `-log p_j(x_j) / j` averaged over rays and paths, with trace.
    pub report: EstimatorReport,
    /// `-log p_n(x_n) + log p_{n-1}(x_{n-1})`.
    pub increment: Estimate,
}

/// Entropy of the conditional walks: for each path a ray `xi ~ nu` is drawn
/// (stream `2i`) and a conditioned path is run (stream `2i + 1`); the
/// statistic is `-log(mu_j(x_j) rn(x_j, xi)) / j`.
pub fn conditional_entropy_estimate(
    group: &GroupSpec,
    mu: &Measure,
    table: &PowerTable,
    conditioning: Conditioning<'_>,
    n: usize,
    paths: usize,
    mc: &McConfig,
) -> Result<ConditionalEntropyReport> {
    if n == 0 || n > table.horizon() {
        return Err(Error::InvalidArgument(format!(
            "horizon {n} outside the convolution table (1..={})",
            table.horizon()
        )));
    }
    let depth = n * mu.max_letters() + 3;
    let per_path = mc.map_indexed(paths, |i| -> Result<Vec<f64>> {
        let stream = 2 * i as u64;
        let (xs, rn): (Vec<Element>, RnFn) = match conditioning {
            Conditioning::Trivial => {
                let k = doob_kernel_from_parts(group, mu, Unit);
                let p = sample_conditional(&k, n, &mut mc.rng(stream + 1))?;
                (p.elements().to_vec(), Box::new(|_| Ok(1.0)))
            }
            Conditioning::Boundary(model) => {
                let mut ray = model.sample_ray(mc.rng(stream));
                let k = doob_kernel(group, mu, model, &mut ray, depth)?;
                let p = sample_conditional(&k, n, &mut mc.rng(stream + 1))?;
                let f = k.f;
                (p.elements().to_vec(), Box::new(move |x| f.value(x)))
            }
        };
        let mut logs = vec![0.0; n + 1];
        for j in 1..=n {
            let m = table.mass(j, &xs[j]) * rn(&xs[j])?;
            logs[j] = -m.ln();
        }
        Ok(logs)
    });
    let per_path: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<_>>()?;
    let traces: Vec<Vec<f64>> = per_path
        .iter()
        .map(|l| (1..=n).map(|j| l[j] / j as f64).collect())
        .collect();
    let inc: Vec<f64> = per_path.iter().map(|l| l[n] - l[n - 1]).collect();
    Ok(ConditionalEntropyReport {
        report: EstimatorReport::from_path_traces(&traces, n),
        increment: Estimate::from_samples(&inc),
    })
}

fn doob_kernel_from_parts<F: HarmonicFunction>(group: &GroupSpec, mu: &Measure, f: F) -> DoobKernel<F> {
    DoobKernel { group: group.clone(), mu: mu.clone(), f }
}

/// `H(mu) - E log rn(x_1, xi)` with `xi` the limit of the same path,
/// confirmed with `margin` extra letters.
pub fn entropy_gap(
    group: &GroupSpec,
    mu: &Measure,
    conditioning: Conditioning<'_>,
    paths: usize,
    margin: usize,
    max_steps: usize,
    mc: &McConfig,
) -> Result<Estimate> {
    let h_mu = mu.entropy();
    let Conditioning::Boundary(model) = conditioning else {
        return Ok(Estimate { mean: h_mu, stderr: 0.0, count: paths });
    };
    let depth = mu.max_letters() + 3;
    let samples = mc.map_indexed(paths, |i| -> Result<f64> {
        let mut rng = mc.rng(i as u64);
        let mut w = Walker::new();
        let x1 = mu.sample(&mut rng).clone();
        w.step(group, &x1);
        let mut steps = 1;
        while w.letters().len() < depth + margin {
            if steps == max_steps {
                return Err(Error::Resource {
                    what: format!("walk to depth {}", depth + margin),
                    limit: max_steps,
                    max_feasible: None,
                });
            }
            w.step(group, mu.sample(&mut rng));
            steps += 1;
        }
        let r = radon_nikodym(model, &x1, &w.letters()[..depth])?;
        Ok(h_mu - r.ln())
    });
    let samples: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&samples))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalityRow {
    pub n: usize,
    /// Mean of `|A_n|` over the sampled rays.
    pub cover_size: f64,
    /// Mean of `log |A_n| / n`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalityReport {
    pub epsilon: f64,
    pub threshold: f64,
    pub rays: usize,
    pub rows: Vec<MaximalityRow>,
    pub verdict: String,
}

/// Smallest number of atoms of `law` (taken in decreasing order) whose
/// mass reaches `epsilon`.
pub fn greedy_cover_size(mut masses: Vec<f64>, epsilon: f64) -> usize {
    masses.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    for (i, m) in masses.iter().enumerate() {
        acc += m;
        if acc >= epsilon - 1e-12 {
            return i + 1;
        }
    }
    masses.len()
}

/// Greedy `epsilon`-covers `A_n` of the time-`n` conditional laws
/// `p_n(x) = mu_n(x) rn(x, xi)` for `n = 1..=table.horizon()`.
/// Rays come from streams `0..rays`; the trivial conditioning uses `mu_n`.
pub fn maximality_report(
    table: &PowerTable,
    conditioning: Conditioning<'_>,
    rays: usize,
    epsilon: f64,
    threshold: f64,
    mc: &McConfig,
) -> Result<MaximalityReport> {
    let n_max = table.horizon();
    let max_letters = (1..=n_max).map(|j| table.get(j).max_letters()).max().unwrap_or(0);
    let rays = match conditioning {
        Conditioning::Trivial => 1,
        Conditioning::Boundary(_) => rays.max(1),
    };
    let per_ray = mc.map_indexed(rays, |i| -> Result<Vec<usize>> {
        let kernel: Option<MartinKernel> = match conditioning {
            Conditioning::Trivial => None,
            Conditioning::Boundary(model) => {
                let mut ray = model.sample_ray(mc.rng(i as u64));
                Some(MartinKernel::new(model, &mut ray, max_letters + 3)?)
            }
        };
        (1..=n_max)
            .map(|n| {
                let masses = table
                    .get(n)
                    .atoms()
                    .iter()
                    .map(|(x, p)| Ok(p * kernel.as_ref().map_or(Ok(1.0), |k| k.value(x))?))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(greedy_cover_size(masses, epsilon))
            })
            .collect()
    });
    let per_ray: Vec<Vec<usize>> = per_ray.into_iter().collect::<Result<_>>()?;
    let rows: Vec<MaximalityRow> = (1..=n_max)
        .map(|n| {
            let sizes: Vec<f64> = per_ray.iter().map(|r| r[n - 1] as f64).collect();
            let rates: Vec<f64> = sizes.iter().map(|s| s.ln() / n as f64).collect();
            MaximalityRow {
                n,
                cover_size: Estimate::from_samples(&sizes).mean,
                rate: Estimate::from_samples(&rates).mean,
            }
        })
        .collect();
    let last = rows.last().map_or(f64::NAN, |r| r.rate);
    let verdict = if last < threshold { "maximal-consistent" } else { "not-maximal" };
    Ok(MaximalityReport { epsilon, threshold, rays, rows, verdict: verdict.to_string() })
}

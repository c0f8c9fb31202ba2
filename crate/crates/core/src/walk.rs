//! Sample paths, the shifts on path space, and the two global statistics of
//! a walk: the rate of escape and the asymptotic entropy.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{Element, GroupSpec, Letter};
use crate::mc::{Estimate, EstimatorReport, McConfig};
use crate::Measure;

/// Streaming position of a walk: a reduced word updated in place, with its
/// word length maintained incrementally.
#[derive(Debug, Clone, Default)]
pub struct Walker {
    word: Vec<Letter>,
    length: usize,
}

impl Walker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(group: &GroupSpec, x: &Element) -> Self {
        Walker {
            word: x.letters().to_vec(),
            length: group.word_length(x),
        }
    }

    /// Right-multiplies the position by `h`.
    pub fn step(&mut self, group: &GroupSpec, h: &Element) {
        for &l in h.letters() {
            let delta = group.push_letter(&mut self.word, l);
            self.length = (self.length as isize + delta) as usize;
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.word
    }

    pub fn word_length(&self) -> usize {
        self.length
    }

    pub fn position(&self) -> Element {
        Element::from_reduced(self.word.clone())
    }
}

/// Where a sampled path came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub stream: u64,
}

/// A realized trajectory `x_0 = e, x_1, ..., x_n` with its increments.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    elements: Vec<Element>,
    increments: Vec<Element>,
    pub provenance: Option<Provenance>,
}

impl PathSample {
    /// Builds a path from increments `h_1..h_n` starting at `e`.
    pub fn from_increments(group: &GroupSpec, increments: Vec<Element>) -> Self {
        let mut elements = Vec::with_capacity(increments.len() + 1);
        elements.push(Element::identity());
        for h in &increments {
            let next = group.multiply(elements.last().unwrap(), h);
            elements.push(next);
        }
        PathSample { elements, increments, provenance: None }
    }

    /// Builds a path from positions; increments are recomputed.
    pub fn from_positions(group: &GroupSpec, elements: Vec<Element>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::EmptyPath);
        }
        let increments = elements
            .windows(2)
            .map(|w| group.multiply(&group.inverse(&w[0]), &w[1]))
            .collect();
        Ok(PathSample { elements, increments, provenance: None })
    }

    /// Number of steps `n`.
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn increments(&self) -> &[Element] {
        &self.increments
    }

    pub fn last(&self) -> &Element {
        self.elements.last().expect("paths hold x_0")
    }

    /// Checks `x_0 = e` and `x_i = x_{i-1} h_i`.
    pub fn is_consistent(&self, group: &GroupSpec) -> bool {
        self.elements[0].is_identity()
            && self
                .increments
                .iter()
                .enumerate()
                .all(|(i, h)| group.multiply(&self.elements[i], h) == self.elements[i + 1])
    }
}

pub fn sample_path<R: Rng + ?Sized>(group: &GroupSpec, mu: &Measure, n: usize, rng: &mut R) -> PathSample {
    let increments = (0..n).map(|_| mu.sample(rng).clone()).collect();
    PathSample::from_increments(group, increments)
}

/// `(Ux)_i = x_1^{-1} x_{i+1}`: the path seen from its first step.
pub fn shift_u(group: &GroupSpec, path: &PathSample) -> Result<PathSample> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    let x1_inv = group.inverse(&path.elements[1]);
    let elements = path.elements[1..].iter().map(|x| group.multiply(&x1_inv, x)).collect();
    Ok(PathSample {
        elements,
        increments: path.increments[1..].to_vec(),
        provenance: path.provenance,
    })
}

/// Time shift `(Tx)_i = x_{i+1}`. The result starts at `x_1`, not at `e`.
pub fn shift_t(path: &PathSample) -> Result<Vec<Element>> {
    if path.is_empty() {
        return Err(Error::EmptyPath);
    }
    Ok(path.elements[1..].to_vec())
}

/// A bilateral window `x_t`, `t in [lo, hi]`, with `x_0 = e` and increments
/// `h_t = x_{t-1}^{-1} x_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilateralSample {
    lo: i64,
    elements: Vec<Element>,
    increments: Vec<Element>,
}

impl BilateralSample {
    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.elements.len() as i64 - 1
    }

    pub fn at(&self, t: i64) -> Option<&Element> {
        if t < self.lo || t > self.hi() {
            return None;
        }
        self.elements.get((t - self.lo) as usize)
    }

    /// Increment `h_t` for `t in (lo, hi]`.
    pub fn increment(&self, t: i64) -> Option<&Element> {
        if t <= self.lo || t > self.hi() {
            return None;
        }
        self.increments.get((t - self.lo - 1) as usize)
    }

    /// Forward half `x_0, ..., x_hi`, a path of the walk with law `mu`.
    pub fn forward(&self) -> PathSample {
        let start = (-self.lo) as usize;
        PathSample {
            elements: self.elements[start..].to_vec(),
            increments: self.increments[start..].to_vec(),
            provenance: None,
        }
    }

    /// Backward half `x_check_j = x_{-j}`, a path of the reflected walk.
    pub fn backward(&self, group: &GroupSpec) -> PathSample {
        let start = (-self.lo) as usize;
        let elements: Vec<Element> = self.elements[..=start].iter().rev().cloned().collect();
        let increments = self.increments[..start]
            .iter()
            .rev()
            .map(|h| group.inverse(h))
            .collect();
        PathSample { elements, increments, provenance: None }
    }

    /// Reassembles a window from its two halves.
    pub fn merge(group: &GroupSpec, forward: &PathSample, backward: &PathSample) -> Self {
        let m = backward.len();
        let mut elements: Vec<Element> = backward.elements.iter().rev().cloned().collect();
        elements.extend(forward.elements[1..].iter().cloned());
        let mut increments: Vec<Element> =
            backward.increments.iter().rev().map(|h| group.inverse(h)).collect();
        increments.extend(forward.increments.iter().cloned());
        BilateralSample { lo: -(m as i64), elements, increments }
    }

    /// `(U_bar^k x)_t = x_k^{-1} x_{t+k}`. The window `[lo, hi]` becomes
    /// `[lo - k, hi - k]`.
    pub fn shift(&self, group: &GroupSpec, k: i64) -> Result<Self> {
        let anchor = self.at(k).ok_or(Error::WindowExhausted {
            shift: k,
            lo: self.lo,
            hi: self.hi(),
        })?;
        let inv = group.inverse(anchor);
        Ok(BilateralSample {
            lo: self.lo - k,
            elements: self.elements.iter().map(|x| group.multiply(&inv, x)).collect(),
            increments: self.increments.clone(),
        })
    }
}

/// Samples `x_{-m}, ..., x_n`. The forward increments come from
/// `rng_forward`; the backward ones from the independent `rng_backward`.
pub fn sample_bilateral<R: Rng + ?Sized>(
    group: &GroupSpec,
    mu: &Measure,
    m: usize,
    n: usize,
    rng_forward: &mut R,
    rng_backward: &mut R,
) -> BilateralSample {
    let forward = sample_path(group, mu, n, rng_forward);
    let reflected = mu.reflect(group);
    let backward = sample_path(group, &reflected, m, rng_backward);
    BilateralSample::merge(group, &forward, &backward)
}

/// Rate of escape: mean of `|x_n| / n` over `paths` paths, with the trace
/// of `E|x_j| / j` for `j = 1..=n`.
pub fn estimate_drift(group: &GroupSpec, mu: &Measure, n: usize, paths: usize, mc: &McConfig) -> EstimatorReport {
    let samples = mc.map_indexed(paths, |i| {
        let mut rng = mc.rng(i as u64);
        let mut w = Walker::new();
        (1..=n)
            .map(|j| {
                w.step(group, mu.sample(&mut rng));
                w.word_length() as f64 / j as f64
            })
            .collect::<Vec<f64>>()
    });
    EstimatorReport::from_path_traces(&samples, n)
}

/// `E|x_n| = sum |g| mu_n(g)` from an exact convolution power.
pub fn exact_expected_length(group: &GroupSpec, mu_n: &Measure) -> f64 {
    mu_n.first_moment(group)
}

/// Convolution powers `mu_0..mu_n`, built once and shared read-only.
#[derive(Debug, Clone)]
pub struct PowerTable {
    powers: Vec<Measure>,
}

impl PowerTable {
    pub fn build(group: &GroupSpec, mu: &Measure, n: usize, cap: usize) -> Result<Self> {
        Ok(PowerTable { powers: mu.powers(group, n, cap)? })
    }

    pub fn horizon(&self) -> usize {
        self.powers.len() - 1
    }

    pub fn get(&self, j: usize) -> &Measure {
        &self.powers[j]
    }

    /// `mu_j(g)`.
    pub fn mass(&self, j: usize, g: &Element) -> f64 {
        self.powers[j].get(g).copied().unwrap_or(0.0)
    }

    fn mass_of_letters(&self, j: usize, letters: &[Letter]) -> f64 {
        // HashMap lookups need an owned key.
        self.mass(j, &Element::from_reduced(letters.to_vec()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyRow {
    pub n: usize,
    pub entropy: f64,
    /// `H(mu_n) - H(mu_{n-1})`.
    pub difference: f64,
}

/// Exact entropies `H(mu_n)` for `n = 1..=n_max` and their differences.
pub fn estimate_entropy_exact(group: &GroupSpec, mu: &Measure, n_max: usize, cap: usize) -> Result<Vec<EntropyRow>> {
    let table = PowerTable::build(group, mu, n_max, cap)?;
    Ok(entropy_rows(&table))
}

pub fn entropy_rows(table: &PowerTable) -> Vec<EntropyRow> {
    let mut prev = 0.0;
    (1..=table.horizon())
        .map(|n| {
            let h = table.get(n).entropy();
            let row = EntropyRow { n, entropy: h, difference: h - prev };
            prev = h;
            row
        })
        .collect()
}

/// Sampled entropy statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmbReport {
    /// Mean of `-log mu_j(x_j) / j`, with trace over `j`.
    pub report: EstimatorReport,
    /// Mean of `-log mu_n(x_n) + log mu_{n-1}(x_{n-1})`, whose expectation is
    /// `H(mu_n) - H(mu_{n-1})`.
    pub increment: Estimate,
}

/// Shannon–McMillan–Breiman estimator of the entropy along sampled paths.
pub fn estimate_entropy_smb(
    group: &GroupSpec,
    mu: &Measure,
    table: &PowerTable,
    n: usize,
    paths: usize,
    mc: &McConfig,
) -> Result<SmbReport> {
    if n == 0 || n > table.horizon() {
        return Err(Error::InvalidArgument(format!(
            "horizon {n} outside the convolution table (1..={})",
            table.horizon()
        )));
    }
    let per_path = mc.map_indexed(paths, |i| {
        let mut rng = mc.rng(i as u64);
        let mut w = Walker::new();
        let mut logs = Vec::with_capacity(n + 1);
        logs.push(0.0);
        for j in 1..=n {
            w.step(group, mu.sample(&mut rng));
            logs.push(-table.mass_of_letters(j, w.letters()).ln());
        }
        logs
    });
    let traces: Vec<Vec<f64>> = per_path
        .iter()
        .map(|logs| (1..=n).map(|j| logs[j] / j as f64).collect())
        .collect();
    let increments: Vec<f64> = per_path.iter().map(|logs| logs[n] - logs[n - 1]).collect();
    Ok(SmbReport {
        report: EstimatorReport::from_path_traces(&traces, n),
        increment: Estimate::from_samples(&increments),
    })
}

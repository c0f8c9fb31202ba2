//! The space of ends of the tree-like instances: limits of sample paths,
//! harmonic measure on cylinders, and Radon–Nikodym derivatives of its
//! translates.
//!
//! A boundary point is an infinite reduced word; the cylinder `C_w` is the
//! set of rays starting with the reduced word `w`. Harmonic measures of
//! nearest-neighbour walks are multiplicative (Markov) on these words, so a
//! model is a first-letter law plus a letter-to-letter transition matrix.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::{common_prefix_len, Element, GroupKind, GroupSpec, Letter};
use crate::mc::McConfig;
use crate::scalar::Weight;
use crate::walk::{PathSample, Walker};
use crate::Measure;

/// Default confirmation margin `L`.
pub const DEFAULT_MARGIN: usize = 8;

/// Confirmed initial segment of the limit ray of a path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryPrefix {
    prefix: Element,
    pub margin: usize,
    pub horizon: usize,
}

impl BoundaryPrefix {
    /// The first `max(len(x) - margin, 0)` letters of `x`.
    pub fn from_position(x: &Element, margin: usize, horizon: usize) -> Self {
        BoundaryPrefix {
            prefix: x.prefix(x.len().saturating_sub(margin)),
            margin,
            horizon,
        }
    }

    pub fn element(&self) -> &Element {
        &self.prefix
    }

    pub fn letters(&self) -> &[Letter] {
        self.prefix.letters()
    }

    pub fn len(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix.is_identity()
    }
}

pub fn track_limit(path: &PathSample, margin: usize) -> BoundaryPrefix {
    BoundaryPrefix::from_position(path.last(), margin, path.len())
}

/// Runs a fresh walk until its normal form has `depth + margin` letters and
/// returns the first `depth` of them.
pub fn track_to_depth<R: Rng + ?Sized>(
    group: &GroupSpec,
    mu: &Measure,
    depth: usize,
    margin: usize,
    max_steps: usize,
    rng: &mut R,
) -> Result<BoundaryPrefix> {
    let mut w = Walker::new();
    let mut steps = 0;
    while w.letters().len() < depth + margin {
        if steps == max_steps {
            return Err(Error::Resource {
                what: format!("walk to depth {}", depth + margin),
                limit: max_steps,
                max_feasible: None,
            });
        }
        w.step(group, mu.sample(rng));
        steps += 1;
    }
    let prefix = Element::from_reduced(w.letters()[..depth].to_vec());
    Ok(BoundaryPrefix { prefix, margin, horizon: steps })
}

/// Rejects measures whose support generates an elementary subgroup.
pub fn check_nonelementary(group: &GroupSpec, mu: &Measure) -> Result<()> {
    let support: Vec<&Element> = mu.support().filter(|g| !g.is_identity()).collect();
    let degenerate = |why: &str| Err(Error::DegenerateBoundary(why.to_string()));
    if support.is_empty() {
        return degenerate("support is the identity");
    }
    let mut gens: Vec<u16> = support.iter().flat_map(|g| g.letters().iter().map(|l| l.gen)).collect();
    gens.sort_unstable();
    gens.dedup();
    if let GroupKind::FreeProduct { orders } = group.kind() {
        if gens.len() == 1 {
            return degenerate("support lies in one finite factor");
        }
        if gens.len() == 2 && gens.iter().all(|&g| orders[g as usize] == 2) {
            return degenerate("support generates an infinite dihedral group");
        }
    }
    let all_commute = support
        .iter()
        .all(|a| support.iter().all(|b| group.multiply(a, b) == group.multiply(b, a)));
    if all_commute {
        return degenerate("support generates an abelian subgroup");
    }
    Ok(())
}

/// How a Monte Carlo model was fitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub paths: usize,
    pub depth: usize,
    pub margin: usize,
    /// Largest binomial standard error over all fitted cells.
    pub max_stderr: f64,
    /// Fewest observations behind any transition row.
    pub min_row_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    pub paths: usize,
    pub depth: usize,
    pub margin: usize,
    pub max_steps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { paths: 100_000, depth: 6, margin: 12, max_steps: 100_000 }
    }
}

/// Markov model of a harmonic measure on reduced words.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicMeasureModel {
    group: GroupSpec,
    alphabet: Vec<Letter>,
    first: Vec<f64>,
    transition: Vec<Vec<f64>>,
    exact: bool,
    fit: Option<FitSummary>,
}

impl HarmonicMeasureModel {
    /// Builds a model from explicit tables indexed by `group.alphabet()`.
    pub fn from_tables(group: &GroupSpec, first: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        let alphabet = group.alphabet();
        let n = alphabet.len();
        let bad = |m: String| Err(Error::InvalidMeasure(m));
        if first.len() != n || transition.len() != n || transition.iter().any(|r| r.len() != n) {
            return bad(format!("tables must be {n} and {n}x{n}"));
        }
        let row_ok = |r: &[f64]| {
            r.iter().all(|&p| (0.0..=1.0).contains(&p)) && (r.iter().sum::<f64>() - 1.0).abs() <= f64::MASS_TOLERANCE
        };
        if !row_ok(&first) {
            return bad("first-letter law is not a probability vector".into());
        }
        for (i, row) in transition.iter().enumerate() {
            if !row_ok(row) {
                return bad(format!("transition row {i} is not a probability vector"));
            }
            for (j, &p) in row.iter().enumerate() {
                if p > 0.0 && group.interacts(alphabet[i], alphabet[j]) {
                    return bad(format!("transition row {i} allows a non-reduced continuation"));
                }
            }
        }
        Ok(HarmonicMeasureModel { group: group.clone(), alphabet, first, transition, exact: false, fit: None })
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn alphabet(&self) -> &[Letter] {
        &self.alphabet
    }

    pub fn first(&self) -> &[f64] {
        &self.first
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    /// Whether the tables are forced by symmetry rather than fitted.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn fit_summary(&self) -> Option<&FitSummary> {
        self.fit.as_ref()
    }

    fn index(&self, l: Letter) -> usize {
        self.alphabet.binary_search(&l).expect("letter outside the alphabet")
    }

    /// `nu(C_w)`; the empty word has mass 1.
    pub fn cylinder_mass(&self, w: &[Letter]) -> f64 {
        let Some(&head) = w.first() else { return 1.0 };
        let mut prev = self.index(head);
        let mut m = self.first[prev];
        for &l in &w[1..] {
            let j = self.index(l);
            m *= self.transition[prev][j];
            prev = j;
        }
        m
    }

    /// All reduced words of length `depth` with their cylinder masses,
    /// in lexicographic letter order.
    pub fn cylinders(&self, depth: usize) -> Vec<(Vec<Letter>, f64)> {
        let mut level: Vec<(Vec<Letter>, f64)> = vec![(Vec::new(), 1.0)];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(level.len() * self.alphabet.len());
            for (w, m) in &level {
                for (j, &l) in self.alphabet.iter().enumerate() {
                    let p = match w.last() {
                        None => self.first[j],
                        Some(&prev) => {
                            if self.group.interacts(prev, l) {
                                continue;
                            }
                            self.transition[self.index(prev)][j]
                        }
                    };
                    let mut u = w.clone();
                    u.push(l);
                    next.push((u, m * p));
                }
            }
            level = next;
        }
        level
    }

    /// `nu(g^{-1} C_w)`, the mass the translate `g nu` gives to `C_w`.
    pub fn translated_mass(&self, g: &Element, w: &[Letter]) -> f64 {
        if w.is_empty() {
            return 1.0;
        }
        let gl = g.letters();
        let d = w.len();
        let c = common_prefix_len(gl, w);
        let ginv = self.group.inverse(g);
        if c == d {
            // w is a prefix of g: g^{-1} C_w is the complement of the
            // cylinders where the ray undoes the last letter of w.
            let stem = &ginv.letters()[..gl.len() - d];
            let mut u = stem.to_vec();
            u.push(w[d - 1]);
            let mut lost = 0.0;
            for &l in &self.alphabet {
                if self.group.interacts(w[d - 1], l) {
                    *u.last_mut().unwrap() = l;
                    lost += self.cylinder_mass(&u);
                }
            }
            1.0 - lost
        } else {
            let u = self.group.multiply(&ginv, &Element::from_reduced(w.to_vec()));
            self.cylinder_mass(u.letters())
        }
    }

    /// Draws a ray from this model, extended lazily.
    pub fn sample_ray(&self, rng: ChaCha8Rng) -> Ray {
        Ray { letters: Vec::new(), rng: Some(rng) }
    }

    fn draw(&self, prev: Option<Letter>, rng: &mut ChaCha8Rng) -> Letter {
        let row = match prev {
            None => &self.first,
            Some(p) => &self.transition[self.index(p)],
        };
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_allowed = 0;
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_allowed = j;
                if u < acc {
                    return self.alphabet[j];
                }
            }
        }
        self.alphabet[last_allowed]
    }

    /// Cylinder table as CSV with columns `word,mass`.
    pub fn cylinder_csv(&self, depth: usize) -> String {
        let mut out = String::from("word,mass\n");
        for (w, m) in self.cylinders(depth) {
            out.push_str(&format!("{},{}\n", self.group.format(&Element::from_reduced(w)), m));
        }
        out
    }
}

/// The symmetric cases where the harmonic measure is uniform on letters:
/// simple random walk on a free group, or on a free product of equal
/// cyclic factors of order at most 3.
pub fn exact_harmonic_measure(group: &GroupSpec, mu: &Measure) -> Option<HarmonicMeasureModel> {
    let symmetric = match group.kind() {
        GroupKind::Free { rank } => *rank >= 2,
        GroupKind::FreeProduct { orders } => {
            orders.len() >= 2 && orders.iter().all(|&m| m == orders[0] && m <= 3) && group.has_infinitely_many_ends()
        }
    };
    if !symmetric {
        return None;
    }
    let srw = Measure::simple_random_walk(group);
    if srw.len() != mu.len()
        || srw
            .atoms()
            .iter()
            .zip(mu.atoms())
            .any(|((g, p), (h, q))| g != h || (p - q).abs() > f64::MASS_TOLERANCE)
    {
        return None;
    }
    let alphabet = group.alphabet();
    let n = alphabet.len();
    let first = vec![1.0 / n as f64; n];
    let transition = alphabet
        .iter()
        .map(|&a| {
            let allowed = alphabet.iter().filter(|&&b| !group.interacts(a, b)).count() as f64;
            alphabet
                .iter()
                .map(|&b| if group.interacts(a, b) { 0.0 } else { 1.0 / allowed })
                .collect()
        })
        .collect();
    let mut m = HarmonicMeasureModel::from_tables(group, first, transition).ok()?;
    m.exact = true;
    Some(m)
}

/// Harmonic measure of `mu`: exact where symmetry forces it, otherwise a
/// Monte Carlo fit over confirmed prefixes of sampled paths.
pub fn harmonic_measure(group: &GroupSpec, mu: &Measure, fit: &FitOptions, mc: &McConfig) -> Result<HarmonicMeasureModel> {
    check_nonelementary(group, mu)?;
    match exact_harmonic_measure(group, mu) {
        Some(m) => Ok(m),
        None => fit_harmonic_measure(group, mu, fit, mc),
    }
}

/// Monte Carlo model from the first `fit.depth` confirmed letters of
/// `fit.paths` independent paths; transitions are pooled over positions.
pub fn fit_harmonic_measure(group: &GroupSpec, mu: &Measure, fit: &FitOptions, mc: &McConfig) -> Result<HarmonicMeasureModel> {
    check_nonelementary(group, mu)?;
    if fit.depth == 0 || fit.paths == 0 {
        return Err(Error::InvalidArgument("fit needs depth >= 1 and paths >= 1".into()));
    }
    let prefixes = mc.map_indexed(fit.paths, |i| {
        let mut rng = mc.rng(i as u64);
        track_to_depth(group, mu, fit.depth, fit.margin, fit.max_steps, &mut rng)
    });
    let alphabet = group.alphabet();
    let n = alphabet.len();
    let idx = |l: Letter| alphabet.binary_search(&l).unwrap();
    let mut first_counts = vec![0u64; n];
    let mut counts = vec![vec![0u64; n]; n];
    for p in prefixes {
        let p = p?;
        let ls = p.letters();
        first_counts[idx(ls[0])] += 1;
        for w in ls.windows(2) {
            counts[idx(w[0])][idx(w[1])] += 1;
        }
    }
    let mut max_stderr: f64 = 0.0;
    let mut min_row_count = u64::MAX;
    let mut normalize = |row: &[u64], allowed: &dyn Fn(usize) -> bool| -> Vec<f64> {
        let total: u64 = row.iter().sum();
        min_row_count = min_row_count.min(total);
        if total == 0 {
            let k = (0..n).filter(|&j| allowed(j)).count() as f64;
            return (0..n).map(|j| if allowed(j) { 1.0 / k } else { 0.0 }).collect();
        }
        let t = total as f64;
        row.iter()
            .map(|&c| {
                let p = c as f64 / t;
                max_stderr = max_stderr.max((p * (1.0 - p) / t).sqrt());
                p
            })
            .collect()
    };
    let first = normalize(&first_counts, &|_| true);
    let transition: Vec<Vec<f64>> = (0..n)
        .map(|i| normalize(&counts[i], &|j| !group.interacts(alphabet[i], alphabet[j])))
        .collect();
    // the first-letter row does not take part in the row-count minimum
    let mut m = HarmonicMeasureModel::from_tables(group, renormalize(first), transition.into_iter().map(renormalize).collect())?;
    m.fit = Some(FitSummary {
        paths: fit.paths,
        depth: fit.depth,
        margin: fit.margin,
        max_stderr,
        min_row_count,
    });
    Ok(m)
}

// Counts divided by totals can miss 1 by an ulp or two; fold the residue
// into the largest entry so rows pass the exact-sum check.
fn renormalize(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    if let Some((k, _)) = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        row[k] += 1.0 - s;
    }
    row
}

/// A boundary point known to some depth. Sampled rays grow on demand;
/// rays built from a fixed word cannot.
#[derive(Debug, Clone)]
pub struct Ray {
    letters: Vec<Letter>,
    rng: Option<ChaCha8Rng>,
}

impl Ray {
    pub fn fixed(prefix: &Element) -> Self {
        Ray { letters: prefix.letters().to_vec(), rng: None }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn depth(&self) -> usize {
        self.letters.len()
    }

    /// Makes at least `depth` letters available.
    pub fn extend_to(&mut self, depth: usize, model: &HarmonicMeasureModel) -> Result<()> {
        while self.letters.len() < depth {
            let Some(rng) = self.rng.as_mut() else {
                return Err(Error::PrefixTooShort { needed: depth, available: self.letters.len() });
            };
            let l = model.draw(self.letters.last().copied(), rng);
            self.letters.push(l);
        }
        Ok(())
    }

    pub fn prefix(&mut self, depth: usize, model: &HarmonicMeasureModel) -> Result<Element> {
        self.extend_to(depth, model)?;
        Ok(Element::from_reduced(self.letters[..depth].to_vec()))
    }

    /// The ray `g xi`. The known part is reduced against `g`; a sampled ray
    /// keeps growing from the same stream.
    pub fn translate(&mut self, group: &GroupSpec, g: &Element, model: &HarmonicMeasureModel) -> Result<Ray> {
        // One letter beyond |g| survives every cancellation, so the last
        // known letter of the result is still the ray's own.
        self.extend_to(self.letters.len().max(g.len() + 1), model)?;
        let moved = group.multiply(g, &Element::from_reduced(self.letters.clone()));
        Ok(Ray { letters: moved.letters().to_vec(), rng: self.rng.clone() })
    }

    /// Space-separated generator string of the known prefix.
    pub fn to_string(&self, group: &GroupSpec) -> String {
        group.format(&Element::from_reduced(self.letters.clone()))
    }
}

/// `(d g nu / d nu)(xi)` as the cylinder ratio `nu(g^{-1} C_w) / nu(C_w)`
/// with `w` the prefix of `xi` of length `(g|xi) + 2`. When the next letter
/// is known the ratio one level deeper must agree.
pub fn radon_nikodym(model: &HarmonicMeasureModel, g: &Element, xi: &[Letter]) -> Result<f64> {
    if g.is_identity() {
        return Ok(1.0);
    }
    let depth = common_prefix_len(g.letters(), xi) + 2;
    if xi.len() < depth {
        return Err(Error::PrefixTooShort { needed: depth, available: xi.len() });
    }
    let ratio = |d: usize| -> Result<f64> {
        let base = model.cylinder_mass(&xi[..d]);
        if base <= 0.0 {
            return Err(Error::DegenerateBoundary(format!("cylinder of depth {d} has zero mass")));
        }
        Ok(model.translated_mass(g, &xi[..d]) / base)
    };
    let r = ratio(depth)?;
    if xi.len() > depth {
        let deeper = ratio(depth + 1)?;
        if (deeper - r).abs() > 1e-9 * r.abs().max(1.0) {
            return Err(Error::DegenerateBoundary(format!(
                "cylinder ratio did not stabilize: {r} vs {deeper}"
            )));
        }
    }
    Ok(r)
}

/// Same as [`radon_nikodym`], extending a lazy ray as far as needed.
pub fn radon_nikodym_ray(model: &HarmonicMeasureModel, g: &Element, xi: &mut Ray) -> Result<f64> {
    xi.extend_to(g.len() + 3, model)?;
    radon_nikodym(model, g, xi.letters())
}

/// `(2k-1)^{2(g|xi) - |g|}`, the derivative for simple random walk on `F_k`.
pub fn srw_free_rn(group: &GroupSpec, g: &Element, xi: &[Letter]) -> Result<f64> {
    let GroupKind::Free { rank } = group.kind() else {
        return Err(Error::InvalidArgument("closed form holds on free groups only".into()));
    };
    if xi.len() < g.len() + 1 {
        return Err(Error::PrefixTooShort { needed: g.len() + 1, available: xi.len() });
    }
    let c = common_prefix_len(g.letters(), xi) as i32;
    Ok(((2 * rank - 1) as f64).powi(2 * c - g.len() as i32))
}

/// `max_w |nu(C_w) - sum_g mu(g) nu(g^{-1} C_w)|` over cylinders of length
/// `depth`.
pub fn stationarity_residual(model: &HarmonicMeasureModel, mu: &Measure, depth: usize) -> f64 {
    model
        .cylinders(depth)
        .iter()
        .map(|(w, m)| {
            let pushed: f64 = mu.atoms().iter().map(|(g, p)| p * model.translated_mass(g, w)).sum();
            (m - pushed).abs()
        })
        .fold(0.0, f64::max)
}

/// For each `n`, the largest mass `x_n nu` gives a cylinder of length `depth`.
pub fn concentration(path: &PathSample, model: &HarmonicMeasureModel, depth: usize) -> Vec<f64> {
    let cyl = model.cylinders(depth);
    path.elements()
        .iter()
        .map(|x| cyl.iter().map(|(w, _)| model.translated_mass(x, w)).fold(0.0, f64::max))
        .collect()
}

//! Finitely supported probability measures on a group.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::group::{Element, GroupSpec};
use crate::scalar::{is_one_within, total, Weight};

/// A probability measure with finite support, stored in shortlex order.
#[derive(Debug, Clone)]
pub struct FiniteMeasure<W> {
    atoms: Vec<(Element, W)>,
    index: HashMap<Element, usize>,
    cumulative: Vec<f64>,
}

impl<W: Weight> FiniteMeasure<W> {
    /// Builds a measure from `(element, weight)` pairs; duplicate elements are
    /// merged. Weights must be positive and sum to one within
    /// `W::MASS_TOLERANCE`.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Element, W)>) -> Result<Self> {
        let atoms = merge(pairs)?;
        let mass = total(atoms.iter().map(|(_, w)| w));
        if !is_one_within(&mass) {
            return Err(Error::InvalidMeasure(format!(
                "weights must sum to 1 (got {})",
                mass.as_f64()
            )));
        }
        Ok(Self::from_sorted(atoms))
    }

    /// Normalizes positive weights to total mass one. Returns the measure
    /// and the original total.
    pub fn normalized(pairs: impl IntoIterator<Item = (Element, W)>) -> Result<(Self, W)> {
        let atoms = merge(pairs)?;
        let mass = total(atoms.iter().map(|(_, w)| w));
        let atoms = atoms
            .into_iter()
            .map(|(g, w)| (g, w / mass.clone()))
            .collect();
        Ok((Self::from_sorted(atoms), mass))
    }

    pub fn point_mass(g: Element) -> Self {
        Self::from_sorted(vec![(g, W::one())])
    }

    pub fn uniform(elements: impl IntoIterator<Item = Element>) -> Result<Self> {
        let mut elements: Vec<Element> = elements.into_iter().collect();
        elements.sort();
        elements.dedup();
        if elements.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        let w = W::ratio(1, elements.len() as u64);
        Ok(Self::from_sorted(elements.into_iter().map(|g| (g, w.clone())).collect()))
    }

    /// Simple random walk: uniform on the symmetric generating set.
    pub fn simple_random_walk(group: &GroupSpec) -> Self {
        Self::uniform(group.generators()).expect("generating set is nonempty")
    }

    fn from_sorted(atoms: Vec<(Element, W)>) -> Self {
        let index = atoms
            .iter()
            .enumerate()
            .map(|(i, (g, _))| (g.clone(), i))
            .collect();
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|(_, w)| {
                acc += w.as_f64();
                acc
            })
            .collect();
        FiniteMeasure {
            atoms,
            index,
            cumulative,
        }
    }

    pub fn atoms(&self) -> &[(Element, W)] {
        &self.atoms
    }

    pub fn support(&self) -> impl Iterator<Item = &Element> {
        self.atoms.iter().map(|(g, _)| g)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn get(&self, g: &Element) -> Option<&W> {
        self.index.get(g).map(|&i| &self.atoms[i].1)
    }

    pub fn mass(&self, g: &Element) -> W {
        self.get(g).cloned().unwrap_or_else(W::zero)
    }

    /// Total mass (1 up to rounding).
    pub fn total_mass(&self) -> W {
        total(self.atoms.iter().map(|(_, w)| w))
    }

    /// Shannon entropy with the natural logarithm.
    pub fn entropy(&self) -> f64 {
        self.atoms
            .iter()
            .map(|(_, w)| {
                let p = w.as_f64();
                -p * p.ln()
            })
            .sum()
    }

    /// `(a * b)(g) = sum_h a(h) b(h^{-1} g)`.
    pub fn convolve(&self, other: &Self, group: &GroupSpec, cap: usize) -> Result<Self> {
        let mut acc: HashMap<Element, W> = HashMap::new();
        for (h, wh) in &self.atoms {
            for (k, wk) in &other.atoms {
                let g = group.multiply(h, k);
                let w = wh.clone() * wk.clone();
                match acc.get_mut(&g) {
                    Some(v) => *v = v.clone() + w,
                    None => {
                        acc.insert(g, w);
                        if acc.len() > cap {
                            return Err(Error::Resource {
                                what: "convolution support".into(),
                                limit: cap,
                                max_feasible: None,
                            });
                        }
                    }
                }
            }
        }
        let mut atoms: Vec<(Element, W)> = acc.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self::from_sorted(atoms))
    }

    /// `n`-fold convolution power; `power(0)` is the point mass at `e`.
    pub fn power(&self, group: &GroupSpec, n: usize, cap: usize) -> Result<Self> {
        Ok(self.powers(group, n, cap)?.pop().expect("at least mu_0"))
    }

    /// All powers `mu_0, ..., mu_n`. On overflow the error reports the
    /// largest `n` whose support fits under `cap`.
    pub fn powers(&self, group: &GroupSpec, n: usize, cap: usize) -> Result<Vec<Self>> {
        let mut out = vec![Self::point_mass(Element::identity())];
        for j in 1..=n {
            let next = out[j - 1].convolve(self, group, cap).map_err(|e| match e {
                Error::Resource { limit, .. } => Error::Resource {
                    what: format!("support of mu_{j}"),
                    limit,
                    max_feasible: Some(j - 1),
                },
                other => other,
            })?;
            out.push(next);
        }
        Ok(out)
    }

    /// Reflected measure `mu_check(g) = mu(g^{-1})`.
    pub fn reflect(&self, group: &GroupSpec) -> Self {
        let mut atoms: Vec<(Element, W)> = self
            .atoms
            .iter()
            .map(|(g, w)| (group.inverse(g), w.clone()))
            .collect();
        atoms.sort_by(|a, b| a.0.cmp(&b.0));
        Self::from_sorted(atoms)
    }

    /// `sum |g| mu(g)`.
    pub fn first_moment(&self, group: &GroupSpec) -> f64 {
        self.atoms
            .iter()
            .map(|(g, w)| group.word_length(g) as f64 * w.as_f64())
            .sum()
    }

    /// `sum log(max(|g|, 1)) mu(g)`.
    pub fn log_moment(&self, group: &GroupSpec) -> f64 {
        self.atoms
            .iter()
            .map(|(g, w)| (group.word_length(g).max(1) as f64).ln() * w.as_f64())
            .sum()
    }

    /// Largest number of letters among support elements.
    pub fn max_letters(&self) -> usize {
        self.atoms.iter().map(|(g, _)| g.len()).max().unwrap_or(0)
    }

    /// Inverse-CDF draw over the shortlex support order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Element {
        let total = *self.cumulative.last().expect("nonempty measure");
        let u: f64 = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        &self.atoms[i.min(self.atoms.len() - 1)].0
    }

    /// Converts weights to another scalar type.
    pub fn map_weights<V: Weight>(&self, f: impl Fn(&W) -> V) -> FiniteMeasure<V> {
        FiniteMeasure::from_sorted(self.atoms.iter().map(|(g, w)| (g.clone(), f(w))).collect())
    }
}

fn merge<W: Weight>(pairs: impl IntoIterator<Item = (Element, W)>) -> Result<Vec<(Element, W)>> {
    let mut atoms: Vec<(Element, W)> = pairs.into_iter().collect();
    if atoms.is_empty() {
        return Err(Error::InvalidMeasure("empty support".into()));
    }
    if let Some((_, w)) = atoms.iter().find(|(_, w)| w.partial_cmp(&W::zero()) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::InvalidMeasure(format!(
            "weights must be strictly positive (got {})",
            w.as_f64()
        )));
    }
    atoms.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(Element, W)> = Vec::with_capacity(atoms.len());
    for (g, w) in atoms {
        match merged.last_mut() {
            Some((h, v)) if *h == g => *v = v.clone() + w,
            _ => merged.push((g, w)),
        }
    }
    Ok(merged)
}

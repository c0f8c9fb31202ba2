//! Free groups and free products of finite cyclic groups.
//!
//! Elements are kept in reduced normal form. A free-group element is a
//! sequence of letters `g^{±1}` with no adjacent cancelling pair; a
//! free-product element is a sequence of syllables `s^j` (`0 < j < order`)
//! with no two adjacent syllables from the same factor.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default element-count cap for ball enumeration and convolution supports.
pub const DEFAULT_ELEMENT_CAP: usize = 5_000_000;

/// One letter (free group) or syllable (free product) of a normal form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub gen: u16,
    pub exp: i16,
}

impl Letter {
    pub const fn new(gen: u16, exp: i16) -> Self {
        Letter { gen, exp }
    }
}

/// An immutable group element in normal form.
///
/// Ordering is shortlex on the letter sequence; it fixes the iteration order
/// of supports, balls and reports.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Element(Arc<[Letter]>);

impl Element {
    pub fn identity() -> Self {
        Element(Arc::from(Vec::new()))
    }

    /// Wraps letters that the caller guarantees are already reduced.
    pub(crate) fn from_reduced(letters: Vec<Letter>) -> Self {
        Element(Arc::from(letters))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    /// Number of letters (syllables) in the normal form.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// Initial subword with `t` letters.
    pub fn prefix(&self, t: usize) -> Element {
        Element(Arc::from(&self.0[..t.min(self.0.len())]))
    }

    pub fn last(&self) -> Option<Letter> {
        self.0.last().copied()
    }
}

impl Ord for Element {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.iter().cmp(other.0.iter()))
    }
}

impl PartialOrd for Element {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Element{:?}", &self.0[..])
    }
}

/// Length of the longest common prefix of two letter sequences.
pub fn common_prefix_len(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    /// Free group of the given rank.
    Free { rank: usize },
    /// Free product of cyclic groups of the given orders.
    FreeProduct { orders: Vec<u32> },
}

/// A free group `F_k` or a free product `Z_{m_1} * ... * Z_{m_q}` with its
/// standard symmetric generating set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    kind: GroupKind,
    labels: Vec<String>,
}

fn default_labels(count: usize, pool: &[&str], fallback: &str) -> Vec<String> {
    if count <= pool.len() {
        pool[..count].iter().map(|s| s.to_string()).collect()
    } else {
        (0..count).map(|i| format!("{fallback}{i:03}")).collect()
    }
}

fn check_labels(labels: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        let ok = !l.is_empty()
            && l != "e"
            && l.chars().all(|c| c.is_alphanumeric() || c == '_')
            && l.chars().next().is_some_and(|c| c.is_alphabetic());
        if !ok {
            return Err(Error::InvalidGroup(format!("bad generator label `{l}`")));
        }
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidGroup(format!("duplicate generator label `{l}`")));
        }
    }
    Ok(())
}

impl GroupSpec {
    /// Free group of rank `rank` with generators `a, b, c, ...`.
    pub fn free(rank: usize) -> Result<Self> {
        Self::free_with_labels(default_labels(
            rank,
            &["a", "b", "c", "d", "f", "g", "h", "k"],
            "x",
        ))
    }

    pub fn free_with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidGroup("free group rank must be >= 1".into()));
        }
        if labels.len() > u16::MAX as usize {
            return Err(Error::InvalidGroup("too many generators".into()));
        }
        check_labels(&labels)?;
        let mut labels = labels;
        labels.sort();
        Ok(GroupSpec {
            kind: GroupKind::Free { rank: labels.len() },
            labels,
        })
    }

    /// Free product of cyclic groups with generators `s, t, u, ...`.
    pub fn free_product(orders: Vec<u32>) -> Result<Self> {
        let labels = default_labels(
            orders.len(),
            &["s", "t", "u", "v", "w", "y", "z"],
            "z",
        );
        Self::free_product_with_labels(labels.into_iter().zip(orders).collect())
    }

    pub fn free_product_with_labels(factors: Vec<(String, u32)>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(Error::InvalidGroup(
                "free product needs at least 2 factors".into(),
            ));
        }
        if let Some((l, m)) = factors
            .iter()
            .find(|(_, m)| *m < 2 || *m > i16::MAX as u32)
        {
            return Err(Error::InvalidGroup(format!(
                "factor `{l}` has order {m}; orders must lie in [2, {}]",
                i16::MAX
            )));
        }
        let mut factors = factors;
        factors.sort();
        let labels: Vec<String> = factors.iter().map(|(l, _)| l.clone()).collect();
        check_labels(&labels)?;
        Ok(GroupSpec {
            kind: GroupKind::FreeProduct {
                orders: factors.iter().map(|(_, m)| *m).collect(),
            },
            labels,
        })
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    /// Generator labels, sorted lexicographically; index = generator id.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_generators(&self) -> usize {
        self.labels.len()
    }

    pub fn is_free(&self) -> bool {
        matches!(self.kind, GroupKind::Free { .. })
    }

    /// Order of factor `gen` in a free product, `None` in a free group.
    pub fn order(&self, gen: u16) -> Option<u32> {
        match &self.kind {
            GroupKind::Free { .. } => None,
            GroupKind::FreeProduct { orders } => Some(orders[gen as usize]),
        }
    }

    /// True when the Cayley graph of the standard generators is a tree.
    pub fn is_tree(&self) -> bool {
        match &self.kind {
            GroupKind::Free { .. } => true,
            GroupKind::FreeProduct { orders } => orders.iter().all(|&m| m == 2),
        }
    }

    /// Whether the group has infinitely many ends.
    pub fn has_infinitely_many_ends(&self) -> bool {
        match &self.kind {
            GroupKind::Free { rank } => *rank >= 2,
            GroupKind::FreeProduct { orders } => {
                orders.len() >= 3 || orders.iter().any(|&m| m >= 3)
            }
        }
    }

    fn check_letter(&self, l: Letter) -> bool {
        if l.gen as usize >= self.labels.len() {
            return false;
        }
        match self.order(l.gen) {
            None => l.exp == 1 || l.exp == -1,
            Some(m) => l.exp > 0 && (l.exp as u32) < m,
        }
    }

    /// Every letter that can occur in a normal form, in sorted order.
    pub fn alphabet(&self) -> Vec<Letter> {
        let mut out = Vec::new();
        for gen in 0..self.labels.len() as u16 {
            match self.order(gen) {
                None => {
                    out.push(Letter::new(gen, -1));
                    out.push(Letter::new(gen, 1));
                }
                Some(m) => out.extend((1..m as i16).map(|j| Letter::new(gen, j))),
            }
        }
        out
    }

    /// Symmetric generating set `S = S^{-1}` as elements, sorted.
    pub fn generators(&self) -> Vec<Element> {
        let mut out: Vec<Element> = Vec::new();
        for gen in 0..self.labels.len() as u16 {
            match self.order(gen) {
                None => {
                    out.push(Element::from_reduced(vec![Letter::new(gen, 1)]));
                    out.push(Element::from_reduced(vec![Letter::new(gen, -1)]));
                }
                Some(m) => {
                    out.push(Element::from_reduced(vec![Letter::new(gen, 1)]));
                    if m > 2 {
                        out.push(Element::from_reduced(vec![Letter::new(gen, (m - 1) as i16)]));
                    }
                }
            }
        }
        out.sort();
        out
    }

    pub fn letter_inverse(&self, l: Letter) -> Letter {
        match self.order(l.gen) {
            None => Letter::new(l.gen, -l.exp),
            Some(m) => Letter::new(l.gen, (m as i16) - l.exp),
        }
    }

    /// Word-gauge cost of one letter: 1 in a free group, `min(j, m - j)` for
    /// a syllable `s^j` in `Z_m`.
    pub fn letter_length(&self, l: Letter) -> usize {
        match self.order(l.gen) {
            None => 1,
            Some(m) => {
                let j = l.exp as u32;
                j.min(m - j) as usize
            }
        }
    }

    /// Whether `next` placed after `prev` would cancel or merge.
    pub fn interacts(&self, prev: Letter, next: Letter) -> bool {
        if prev.gen != next.gen {
            return false;
        }
        match self.order(prev.gen) {
            None => prev.exp == -next.exp,
            Some(_) => true,
        }
    }

    /// Pushes one letter onto a reduced word, keeping it reduced.
    ///
    /// Returns the change in word length.
    pub fn push_letter(&self, word: &mut Vec<Letter>, l: Letter) -> isize {
        match word.last().copied() {
            Some(top) if self.interacts(top, l) => match self.order(l.gen) {
                None => {
                    word.pop();
                    -1
                }
                Some(m) => {
                    let before = self.letter_length(top) as isize;
                    let merged = ((top.exp as u32 + l.exp as u32) % m) as i16;
                    if merged == 0 {
                        word.pop();
                        -before
                    } else {
                        let new = Letter::new(l.gen, merged);
                        *word.last_mut().unwrap() = new;
                        self.letter_length(new) as isize - before
                    }
                }
            },
            _ => {
                word.push(l);
                self.letter_length(l) as isize
            }
        }
    }

    /// Reduces an arbitrary sequence of `(generator, exponent)` pairs.
    pub fn reduce(&self, raw: impl IntoIterator<Item = (u16, i64)>) -> Result<Element> {
        let mut word = Vec::new();
        for (gen, exp) in raw {
            if gen as usize >= self.labels.len() {
                return Err(Error::InvalidArgument(format!("unknown generator {gen}")));
            }
            match self.order(gen) {
                None => {
                    let unit = if exp > 0 { 1 } else { -1 };
                    for _ in 0..exp.unsigned_abs() {
                        self.push_letter(&mut word, Letter::new(gen, unit));
                    }
                }
                Some(m) => {
                    let j = exp.rem_euclid(m as i64) as i16;
                    if j != 0 {
                        self.push_letter(&mut word, Letter::new(gen, j));
                    }
                }
            }
        }
        Ok(Element::from_reduced(word))
    }

    /// Validates a letter sequence as a normal form.
    pub fn element(&self, letters: Vec<Letter>) -> Result<Element> {
        for (i, &l) in letters.iter().enumerate() {
            if !self.check_letter(l) {
                return Err(Error::InvalidArgument(format!("letter {l:?} not valid here")));
            }
            if i > 0 && self.interacts(letters[i - 1], l) {
                return Err(Error::InvalidArgument("letter sequence is not reduced".into()));
            }
        }
        Ok(Element::from_reduced(letters))
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Element {
        let mut word = a.letters().to_vec();
        for &l in b.letters() {
            self.push_letter(&mut word, l);
        }
        Element::from_reduced(word)
    }

    pub fn inverse(&self, g: &Element) -> Element {
        Element::from_reduced(g.letters().iter().rev().map(|&l| self.letter_inverse(l)).collect())
    }

    /// Word length `|g|` for the standard generating set.
    pub fn word_length(&self, g: &Element) -> usize {
        g.letters().iter().map(|&l| self.letter_length(l)).sum()
    }

    /// `d(x, y) = |x^{-1} y|`.
    pub fn distance(&self, x: &Element, y: &Element) -> usize {
        self.word_length(&self.multiply(&self.inverse(x), y))
    }

    /// Gromov product `(x|y) = (|x| + |y| - d(x, y)) / 2` based at `e`.
    pub fn gromov_product(&self, x: &Element, y: &Element) -> Ratio<i64> {
        let s = self.word_length(x) as i64 + self.word_length(y) as i64 - self.distance(x, y) as i64;
        Ratio::new(s, 2)
    }

    /// Breadth-first enumeration of `{g : |g| <= k}`, sorted shortlex.
    pub fn ball(&self, k: usize, cap: usize) -> Result<Vec<Element>> {
        Ok(self.spheres(k, cap)?.into_iter().flatten().collect())
    }

    /// Spheres `{g : |g| = j}` for `j = 0..=k`, each sorted.
    pub fn spheres(&self, k: usize, cap: usize) -> Result<Vec<Vec<Element>>> {
        let gens = self.generators();
        let mut seen: HashSet<Element> = HashSet::new();
        seen.insert(Element::identity());
        let mut layers = vec![vec![Element::identity()]];
        for _ in 0..k {
            let mut next = Vec::new();
            for g in layers.last().unwrap() {
                for s in &gens {
                    let h = self.multiply(g, s);
                    if seen.insert(h.clone()) {
                        next.push(h);
                        if seen.len() > cap {
                            return Err(Error::Resource {
                                what: format!("ball of radius {k}"),
                                limit: cap,
                                max_feasible: None,
                            });
                        }
                    }
                }
            }
            next.sort();
            layers.push(next);
        }
        Ok(layers)
    }

    /// Vertices of a geodesic from `x` to `y` in the Cayley graph.
    ///
    /// On trees this is the unique geodesic. A syllable `s^j` of `Z_m` is
    /// walked with `s` when `j <= m - j` and with `s^{-1}` otherwise.
    pub fn geodesic(&self, x: &Element, y: &Element) -> Vec<Element> {
        let w = self.multiply(&self.inverse(x), y);
        let mut cur = x.letters().to_vec();
        let mut out = vec![x.clone()];
        for &l in w.letters() {
            let (step, count) = match self.order(l.gen) {
                None => (l, 1),
                Some(m) => {
                    let j = l.exp as u32;
                    if j <= m - j {
                        (Letter::new(l.gen, 1), j)
                    } else {
                        (Letter::new(l.gen, (m - 1) as i16), m - j)
                    }
                }
            };
            for _ in 0..count {
                self.push_letter(&mut cur, step);
                out.push(Element::from_reduced(cur.clone()));
            }
        }
        out
    }

    /// Renders an element as space-separated letters, e.g. `a b^-1 a`.
    /// The identity renders as `e`.
    pub fn format(&self, g: &Element) -> String {
        if g.is_identity() {
            return "e".to_string();
        }
        let parts: Vec<String> = g
            .letters()
            .iter()
            .map(|l| {
                let label = &self.labels[l.gen as usize];
                if l.exp == 1 {
                    label.clone()
                } else {
                    format!("{label}^{}", l.exp)
                }
            })
            .collect();
        parts.join(" ")
    }

    /// Parses the format produced by [`GroupSpec::format`]; any integer
    /// exponent is accepted and the result is reduced.
    pub fn parse(&self, s: &str) -> Result<Element> {
        let mut raw = Vec::new();
        for tok in s.split_whitespace() {
            if tok == "e" {
                continue;
            }
            let (label, exp) = match tok.split_once('^') {
                Some((l, e)) => {
                    let exp: i64 = e.parse().map_err(|_| Error::Parse {
                        input: s.to_string(),
                        reason: format!("bad exponent in `{tok}`"),
                    })?;
                    (l, exp)
                }
                None => (tok, 1),
            };
            let gen = self
                .labels
                .iter()
                .position(|x| x == label)
                .ok_or_else(|| Error::Parse {
                    input: s.to_string(),
                    reason: format!("unknown generator `{label}`"),
                })?;
            raw.push((gen as u16, exp));
        }
        self.reduce(raw)
    }

    /// Applies a permutation of generator ids, optionally inverting some
    /// generators. Only meaningful when it induces an automorphism (free
    /// groups, or free products with matching orders).
    pub fn relabel(&self, g: &Element, perm: &[u16], invert: &[bool]) -> Element {
        let mut word = Vec::with_capacity(g.len());
        for &l in g.letters() {
            let mut m = Letter::new(perm[l.gen as usize], l.exp);
            if invert[l.gen as usize] {
                m = self.letter_inverse(m);
            }
            self.push_letter(&mut word, m);
        }
        Element::from_reduced(word)
    }
}

/// Point at distance `t` along the ray determined by a confirmed prefix.
pub fn geodesic_ray_point(prefix: &Element, t: usize) -> Result<Element> {
    if t > prefix.len() {
        return Err(Error::PrefixTooShort {
            needed: t,
            available: prefix.len(),
        });
    }
    Ok(prefix.prefix(t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> GroupSpec {
        GroupSpec::free(2).unwrap()
    }

    fn z2_cubed() -> GroupSpec {
        GroupSpec::free_product(vec![2, 2, 2]).unwrap()
    }

    #[test]
    fn multiply_examples() {
        let g = f2();
        let x = g.parse("a b a^-1").unwrap();
        let y = g.parse("a b").unwrap();
        assert_eq!(g.format(&g.multiply(&x, &y)), "a b b");
        let h = g.parse("a b^-1 a a").unwrap();
        assert!(g.multiply(&h, &g.inverse(&h)).is_identity());

        let p = z2_cubed();
        let st = p.parse("s t").unwrap();
        let tu = p.parse("t u").unwrap();
        assert_eq!(p.format(&p.multiply(&st, &tu)), "s u");
    }

    #[test]
    fn inverse_examples() {
        let g = f2();
        assert_eq!(g.format(&g.inverse(&g.parse("a b").unwrap())), "b^-1 a^-1");
        assert!(g.inverse(&Element::identity()).is_identity());
        let p = z2_cubed();
        let sts = p.parse("s t s").unwrap();
        assert_eq!(p.inverse(&sts), sts);
    }

    #[test]
    fn lengths_and_balls() {
        let g = f2();
        assert_eq!(g.word_length(&g.parse("a b^-1 a").unwrap()), 3);
        assert_eq!(g.word_length(&Element::identity()), 0);
        assert_eq!(g.ball(0, 10).unwrap(), vec![Element::identity()]);
        assert_eq!(g.ball(1, 100).unwrap().len(), 5);
        assert_eq!(g.ball(2, 100).unwrap().len(), 17);
        assert_eq!(g.ball(3, 100).unwrap().len(), 53);
    }

    #[test]
    fn ball_cap_is_a_resource_error() {
        let err = f2().ball(6, 100).unwrap_err();
        assert!(err.is_resource());
    }

    #[test]
    fn free_product_syllable_length() {
        let p = GroupSpec::free_product(vec![5, 3]).unwrap();
        let s3 = p.parse("s^3").unwrap();
        assert_eq!(p.word_length(&s3), 2);
        assert_eq!(p.format(&p.parse("s^-1").unwrap()), "s^4");
        assert_eq!(p.geodesic(&Element::identity(), &s3).len(), 3);
        // the ball agrees with BFS distances
        for g in p.ball(4, 10_000).unwrap() {
            assert!(p.word_length(&g) <= 4);
        }
    }

    #[test]
    fn gromov_examples() {
        let g = f2();
        let p = |s: &str| g.parse(s).unwrap();
        assert_eq!(g.gromov_product(&p("a b"), &p("a b^-1")), Ratio::from(1));
        let x = p("a b a b^-1");
        assert_eq!(g.gromov_product(&x, &x), Ratio::from(4));
        assert_eq!(g.gromov_product(&p("a"), &p("b")), Ratio::from(0));
    }

    #[test]
    fn geodesic_examples() {
        let g = f2();
        let p = |s: &str| g.parse(s).unwrap();
        let path: Vec<String> = g
            .geodesic(&Element::identity(), &p("a b"))
            .iter()
            .map(|x| g.format(x))
            .collect();
        assert_eq!(path, ["e", "a", "a b"]);
        assert_eq!(g.geodesic(&p("a b"), &p("a b")).len(), 1);
        let path: Vec<String> = g.geodesic(&p("a"), &p("b")).iter().map(|x| g.format(x)).collect();
        assert_eq!(path, ["a", "e", "b"]);
    }

    #[test]
    fn ray_points() {
        let g = f2();
        let prefix = g.parse("a b a^-1 b").unwrap();
        assert_eq!(g.format(&geodesic_ray_point(&prefix, 2).unwrap()), "a b");
        assert!(geodesic_ray_point(&prefix, 0).unwrap().is_identity());
        assert_eq!(geodesic_ray_point(&prefix, 4).unwrap(), prefix);
        assert!(matches!(
            geodesic_ray_point(&prefix, 5),
            Err(Error::PrefixTooShort { needed: 5, available: 4 })
        ));
    }

    #[test]
    fn ends_flag() {
        assert!(!GroupSpec::free(1).unwrap().has_infinitely_many_ends());
        assert!(GroupSpec::free(2).unwrap().has_infinitely_many_ends());
        assert!(!GroupSpec::free_product(vec![2, 2]).unwrap().has_infinitely_many_ends());
        assert!(GroupSpec::free_product(vec![2, 3]).unwrap().has_infinitely_many_ends());
        assert!(z2_cubed().has_infinitely_many_ends());
    }

    #[test]
    fn invalid_specs() {
        assert!(GroupSpec::free(0).is_err());
        assert!(GroupSpec::free_product(vec![3]).is_err());
        assert!(GroupSpec::free_product(vec![2, 1]).is_err());
        assert!(GroupSpec::free_with_labels(vec!["a".into(), "a".into()]).is_err());
        assert!(f2().parse("a q").is_err());
        assert!(f2().parse("a^x").is_err());
    }

    #[test]
    fn parse_format_reduces() {
        let g = f2();
        assert_eq!(g.format(&g.parse("a a^-1 b^2").unwrap()), "b b");
        assert_eq!(g.format(&g.parse("e").unwrap()), "e");
        assert_eq!(g.format(&g.parse("").unwrap()), "e");
        let p = z2_cubed();
        assert_eq!(p.format(&p.parse("s s t").unwrap()), "t");
    }
}

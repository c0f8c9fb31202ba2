//! Random products in SL(d, R), d = 2, 3: radial parts, Lyapunov vectors,
//! regularity and convergence of singular flags.
//!
//! Products are tracked through the transposed product
//! `x_n^T = h_n^T ... h_1^T = Q_n R_n ... R_1`. The triangular factor is kept
//! as `diag(e^s) N` with `N` upper triangular with ±1 diagonal, which carries both the
//! log-diagonal (the classic Lyapunov surrogate) and enough of the product
//! to read off its singular values and flags without overflow.

pub mod linalg;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mc::{CompensatedSum, McConfig};
use crate::scalar::Real;
pub use linalg::{line_distance, subsets, symmetric_eigen, SquareMatrix};

/// Determinants must stay within this distance of 1.
pub const DET_TOLERANCE: f64 = 1e-8;

/// Finitely supported probability measure on SL(d, R).
#[derive(Debug, Clone)]
pub struct MatrixMeasure<T> {
    atoms: Vec<(SquareMatrix<T>, f64)>,
    integer: Option<Vec<Vec<Vec<i64>>>>,
    cumulative: Vec<f64>,
}

impl<T: Real> MatrixMeasure<T> {
    pub fn new(atoms: Vec<(SquareMatrix<T>, f64)>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidMeasure(m));
        let Some(d) = atoms.first().map(|a| a.0.dim()) else {
            return bad("empty support".into());
        };
        if !(2..=3).contains(&d) {
            return bad(format!("dimension {d} not supported (2 or 3)"));
        }
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(atoms.len());
        for (i, (m, w)) in atoms.iter().enumerate() {
            if m.dim() != d {
                return bad(format!("atom {i} has dimension {}, expected {d}", m.dim()));
            }
            if w.is_nan() || *w <= 0.0 {
                return bad(format!("atom {i} has non-positive weight {w}"));
            }
            let det = m.det().to_f64().unwrap_or(f64::NAN);
            if det.is_nan() || (det - 1.0).abs() > DET_TOLERANCE {
                return bad(format!("atom {i} has determinant {det}, expected 1"));
            }
            acc += w;
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > 1e-12 {
            return bad(format!("weights sum to {acc}, expected 1"));
        }
        Ok(MatrixMeasure { atoms, integer: None, cumulative })
    }

    /// Measure on integer matrices; keeps the integer form for exact products.
    pub fn from_integer(atoms: Vec<(Vec<Vec<i64>>, f64)>) -> Result<Self> {
        let real = atoms
            .iter()
            .map(|(rows, w)| {
                let r: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
                Ok((SquareMatrix::from_f64_rows(&r)?, *w))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = Self::new(real)?;
        m.integer = Some(atoms.into_iter().map(|(r, _)| r).collect());
        Ok(m)
    }

    pub fn uniform(mats: Vec<SquareMatrix<T>>) -> Result<Self> {
        let w = 1.0 / mats.len() as f64;
        Self::new(mats.into_iter().map(|m| (m, w)).collect())
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].0.dim()
    }

    pub fn atoms(&self) -> &[(SquareMatrix<T>, f64)] {
        &self.atoms
    }

    pub fn integer_atoms(&self) -> Option<&[Vec<Vec<i64>>]> {
        self.integer.as_deref()
    }

    /// Index of a sampled atom.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative.partition_point(|&c| c <= u).min(self.atoms.len() - 1)
    }

    /// `max_g ||r(g)||`, the largest single-step displacement.
    pub fn step_bound(&self) -> Result<f64> {
        self.atoms
            .iter()
            .map(|(m, _)| radial_part(m).map(|r| r.norm()))
            .try_fold(0.0, |a, r| r.map(|r| f64::max(a, r)))
    }
}

/// The standard generators of SL(2, Z): `T = [[1,1],[0,1]]`, `S = [[0,-1],[1,0]]`
/// and their inverses, with equal weights.
pub fn sl2z_uniform<T: Real>() -> MatrixMeasure<T> {
    let mats = vec![
        vec![vec![1, 1], vec![0, 1]],
        vec![vec![1, -1], vec![0, 1]],
        vec![vec![0, -1], vec![1, 0]],
        vec![vec![0, 1], vec![-1, 0]],
    ];
    MatrixMeasure::from_integer(mats.into_iter().map(|m| (m, 0.25)).collect()).expect("generators are in SL(2,Z)")
}

/// Sorted log singular values `alpha_1 >= ... >= alpha_d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialPart {
    pub alpha: Vec<f64>,
    /// `sum alpha_i = log |det|`.
    pub sum: f64,
}

impl RadialPart {
    fn from_compound_logs(logs: &[f64]) -> Self {
        let mut alpha: Vec<f64> = logs
            .iter()
            .enumerate()
            .map(|(j, &l)| if j == 0 { l } else { l - logs[j - 1] })
            .collect();
        alpha.sort_by(|a, b| b.total_cmp(a));
        let sum = alpha.iter().copied().collect::<CompensatedSum>().value();
        RadialPart { alpha, sum }
    }

    /// `||r(x)||`, the distance from the base point.
    pub fn norm(&self) -> f64 {
        self.alpha.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, k: f64) -> Vec<f64> {
        self.alpha.iter().map(|a| a / k).collect()
    }
}

/// Radial part by direct computation: `log(s_1 ... s_j)` is the log of the
/// top singular value of the `j`-th compound, and the last one is `log |det|`.
pub fn radial_part<T: Real>(x: &SquareMatrix<T>) -> Result<RadialPart> {
    if !x.is_finite() {
        return Err(Error::Overflow("matrix has non-finite entries; use the accumulator".into()));
    }
    let d = x.dim();
    let rows = x.rows();
    let scale = rows.iter().flatten().fold(T::zero(), |a, v| a.max(v.abs()));
    if scale == T::zero() {
        return Err(Error::InvalidArgument("zero matrix".into()));
    }
    let y_rows: Vec<Vec<T>> = rows.iter().map(|r| r.iter().map(|&v| v / scale).collect()).collect();
    let y = SquareMatrix::from_rows(&y_rows)?;
    let ls = scale.to_f64().unwrap().ln();
    let mut logs = Vec::with_capacity(d);
    for j in 1..d {
        let (s, _) = y.compound(j).top_singular();
        logs.push(j as f64 * ls + s.to_f64().unwrap().ln());
    }
    logs.push(d as f64 * ls + y.det().abs().to_f64().unwrap().ln());
    Ok(RadialPart::from_compound_logs(&logs))
}

/// Running QR factorization of a matrix random walk.
#[derive(Debug, Clone)]
pub struct QRAccumulator<T> {
    q: SquareMatrix<T>,
    /// Log-diagonal of the accumulated triangular factor.
    s: Vec<f64>,
    /// Row-scaled triangular factor with diagonal entries ±1.
    n: SquareMatrix<T>,
    steps: usize,
    max_defect: f64,
    max_log_det: f64,
}

impl<T: Real> QRAccumulator<T> {
    pub fn new(d: usize) -> Self {
        QRAccumulator {
            q: SquareMatrix::identity(d),
            s: vec![0.0; d],
            n: SquareMatrix::identity(d),
            steps: 0,
            max_defect: 0.0,
            max_log_det: 0.0,
        }
    }

    /// Starts the product at `g` instead of the identity.
    pub fn with_prefix(g: &SquareMatrix<T>) -> Result<Self> {
        let d = g.dim();
        let mut acc = Self::new(d);
        acc.absorb(&g.transpose())?;
        acc.steps = 0;
        Ok(acc)
    }

    /// Right-multiplies the product by `h`.
    pub fn step(&mut self, h: &SquareMatrix<T>) -> Result<()> {
        let a = &h.transpose() * &self.q;
        self.absorb(&a)
    }

    fn absorb(&mut self, a: &SquareMatrix<T>) -> Result<()> {
        let d = a.dim();
        let (q, r) = a.qr();
        let mut next = SquareMatrix::zeros(d);
        for i in 0..d {
            let rii = r[(i, i)];
            if rii == T::zero() {
                return Err(Error::InvalidArgument("singular step matrix".into()));
            }
            for j in i..d {
                let rij = r[(i, j)];
                if rij == T::zero() {
                    continue;
                }
                // dividing by |R_ii| keeps the sign in N, so R = diag(e^s) N exactly
                let f = (rij / rii.abs()).to_f64().unwrap() * (self.s[j] - self.s[i]).exp();
                if f == 0.0 {
                    continue;
                }
                if !f.is_finite() {
                    return Err(Error::Overflow(format!("scaled factor overflowed at step {}", self.steps + 1)));
                }
                let f = T::of(f);
                for k in j..d {
                    next[(i, k)] = next[(i, k)] + f * self.n[(j, k)];
                }
            }
        }
        if !next.is_finite() {
            return Err(Error::Overflow(format!("triangular factor overflowed at step {}", self.steps + 1)));
        }
        for i in 0..d {
            self.s[i] += r[(i, i)].abs().to_f64().unwrap().ln();
        }
        self.q = q;
        self.n = next;
        self.steps += 1;
        self.max_defect = self.max_defect.max(self.q.orthogonality_defect().to_f64().unwrap());
        let log_det = self.s.iter().copied().collect::<CompensatedSum>().value();
        self.max_log_det = self.max_log_det.max(log_det.abs());
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Accumulated `log |R_ii|`.
    pub fn log_diagonal(&self) -> &[f64] {
        &self.s
    }

    /// Largest orthogonality defect of `Q` seen so far.
    pub fn orthogonality_defect(&self) -> f64 {
        self.max_defect
    }

    /// Largest `|sum log |R_ii||` seen so far; 0 for determinant-one walks.
    pub fn max_log_det(&self) -> f64 {
        self.max_log_det
    }

    /// `Λ^j (diag(e^{s - max}) N)` and the factored-out exponent.
    fn scaled_compound(&self, j: usize) -> (SquareMatrix<T>, f64) {
        let d = self.s.len();
        let sets = subsets(d, j);
        let sums: Vec<f64> = sets.iter().map(|set| set.iter().map(|&i| self.s[i]).sum()).collect();
        let top = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut c = self.n.compound(j);
        for (a, &sa) in sums.iter().enumerate() {
            let f = T::of((sa - top).exp());
            for b in 0..sets.len() {
                c[(a, b)] = c[(a, b)] * f;
            }
        }
        (c, top)
    }

    /// `r(x_n)` from the triangular factor.
    pub fn radial_part(&self) -> RadialPart {
        let d = self.s.len();
        let mut logs = Vec::with_capacity(d);
        for j in 1..d {
            let (c, top) = self.scaled_compound(j);
            let (sv, _) = c.top_singular();
            logs.push(top + sv.to_f64().unwrap().ln());
        }
        logs.push(self.s.iter().copied().collect::<CompensatedSum>().value());
        RadialPart::from_compound_logs(&logs)
    }

    /// Top-`j` left singular subspaces of `x_n`, `j = 1..d-1`, as unit
    /// vectors in the exterior powers.
    pub fn flags(&self) -> Vec<Vec<f64>> {
        let d = self.s.len();
        (1..d)
            .map(|j| {
                let (c, _) = self.scaled_compound(j);
                let (_, v) = c.top_singular();
                let v: Vec<f64> = v.iter().map(|x| x.to_f64().unwrap()).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / norm).collect()
            })
            .collect()
    }
}

/// Distance between two flags: the largest sine over the subspace pairs.
pub fn flag_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(p, q)| line_distance(p, q)).fold(0.0, f64::max)
}

/// `Λ^j g` applied to a flag.
pub fn transform_flag<T: Real>(g: &SquareMatrix<T>, flag: &[Vec<f64>]) -> Vec<Vec<f64>> {
    flag.iter()
        .enumerate()
        .map(|(k, v)| {
            let c = g.compound(k + 1);
            let vt: Vec<T> = v.iter().map(|&x| T::of(x)).collect();
            let w: Vec<f64> = c.apply(&vt).iter().map(|x| x.to_f64().unwrap()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.iter().map(|x| x / norm).collect()
        })
        .collect()
}

/// Draws `n` step indices.
pub fn sample_indices<T: Real, R: Rng + ?Sized>(mu: &MatrixMeasure<T>, n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| mu.sample(rng)).collect()
}

pub fn accumulate<T: Real, R: Rng + ?Sized>(mu: &MatrixMeasure<T>, n: usize, rng: &mut R) -> Result<QRAccumulator<T>> {
    let mut acc = QRAccumulator::new(mu.dim());
    for _ in 0..n {
        let i = mu.sample(rng);
        acc.step(&mu.atoms[i].0)?;
    }
    Ok(acc)
}

/// Exact product of integer atoms in the given order.
pub fn exact_product(atoms: &[Vec<Vec<i64>>], indices: &[usize]) -> Result<Vec<Vec<i128>>> {
    let d = atoms.first().map_or(0, |a| a.len());
    let mut x: Vec<Vec<i128>> = (0..d).map(|i| (0..d).map(|j| i128::from(i == j)).collect()).collect();
    for &k in indices {
        let h = &atoms[k];
        let mut y = vec![vec![0i128; d]; d];
        for i in 0..d {
            for j in 0..d {
                let mut acc: i128 = 0;
                for (l, row) in h.iter().enumerate() {
                    acc = x[i][l]
                        .checked_mul(i128::from(row[j]))
                        .and_then(|p| acc.checked_add(p))
                        .ok_or_else(|| Error::Overflow("exact integer product exceeds i128".into()))?;
                }
                y[i][j] = acc;
            }
        }
        x = y;
    }
    Ok(x)
}

fn int_minor(x: &[Vec<i128>], rows: &[usize], cols: &[usize]) -> Option<i128> {
    match rows.len() {
        1 => Some(x[rows[0]][cols[0]]),
        _ => {
            let mut total: i128 = 0;
            for (t, &c) in cols.iter().enumerate() {
                let rest: Vec<usize> = cols.iter().copied().filter(|&cc| cc != c).collect();
                let m = int_minor(x, &rows[1..], &rest)?;
                let term = x[rows[0]][c].checked_mul(m)?;
                total = if t % 2 == 0 { total.checked_add(term)? } else { total.checked_sub(term)? };
            }
            Some(total)
        }
    }
}

/// Radial part of an exact integer matrix: compounds are formed exactly
/// and only their top singular values are taken in floating point; the
/// last coordinate comes from the exact determinant.
pub fn exact_radial_part(x: &[Vec<i128>]) -> Result<RadialPart> {
    let d = x.len();
    let overflow = || Error::Overflow("exact compound exceeds i128".into());
    let mut logs = Vec::with_capacity(d);
    for j in 1..d {
        let sets = subsets(d, j);
        let rows: Vec<Vec<f64>> = sets
            .iter()
            .map(|r| sets.iter().map(|c| int_minor(x, r, c).map(|v| v as f64).ok_or_else(overflow)).collect())
            .collect::<Result<_>>()?;
        let c = SquareMatrix::<f64>::from_rows(&rows)?;
        logs.push(c.top_singular().0.ln());
    }
    let all: Vec<usize> = (0..d).collect();
    let det = int_minor(x, &all, &all).ok_or_else(overflow)?;
    logs.push((det.unsigned_abs() as f64).ln());
    Ok(RadialPart::from_compound_logs(&logs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadPoint {
    pub n: usize,
    /// Cross-path standard deviation of `alpha_1(x_n) / n`.
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub n: usize,
    pub paths: usize,
    pub mean: Vec<f64>,
    pub stddev: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Largest `|sum r_i|` over all paths and steps.
    pub max_sum: f64,
    /// Spread at `n/16`, `n/4`, `n`; shrinks like `n^{-1/2}`.
    pub spread: Vec<SpreadPoint>,
}

fn checkpoints(n: usize) -> Vec<usize> {
    let mut c: Vec<usize> = [n / 16, n / 4, n].into_iter().filter(|&k| k > 0).collect();
    c.dedup();
    c
}

/// Runs `paths` walks (stream `i` for path `i`) and records `r(x_k)` at the
/// requested step counts.
fn radial_snapshots<T: Real>(
    mu: &MatrixMeasure<T>,
    marks: &[usize],
    paths: usize,
    mc: &McConfig,
) -> Result<Vec<(Vec<RadialPart>, f64)>> {
    let last = marks.iter().copied().max().unwrap_or(0);
    mc.map_indexed(paths, |i| {
        let mut rng = mc.rng(i as u64);
        let mut acc = QRAccumulator::new(mu.dim());
        let mut out = Vec::with_capacity(marks.len());
        for k in 1..=last {
            acc.step(&mu.atoms[mu.sample(&mut rng)].0)?;
            if marks.contains(&k) {
                out.push(acc.radial_part());
            }
        }
        let worst_sum = out.iter().map(|r| r.sum.abs()).fold(acc.max_log_det(), f64::max);
        Ok((out, worst_sum))
    })
    .into_iter()
    .collect()
}

fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = rows.first().map_or(0, |r| r.len());
    let mut mean = Vec::new();
    let mut sd = Vec::new();
    let mut se = Vec::new();
    for k in 0..d {
        let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let e = crate::mc::Estimate::from_samples(&col);
        mean.push(e.mean);
        sd.push(e.stddev());
        se.push(e.stderr);
    }
    (mean, sd, se)
}

/// Lyapunov vector estimate `r(x_n)/n`, averaged over paths.
pub fn lyapunov_vector<T: Real>(mu: &MatrixMeasure<T>, n: usize, paths: usize, mc: &McConfig) -> Result<LyapunovReport> {
    let marks = checkpoints(n);
    let snaps = radial_snapshots(mu, &marks, paths, mc)?;
    let spread = marks
        .iter()
        .enumerate()
        .map(|(m, &k)| {
            let rows: Vec<Vec<f64>> = snaps.iter().map(|(s, _)| s[m].scaled(k as f64)).collect();
            SpreadPoint { n: k, stddev: column_stats(&rows).1[0] }
        })
        .collect();
    let last: Vec<Vec<f64>> = snaps.iter().map(|(s, _)| s[marks.len() - 1].scaled(n as f64)).collect();
    let (mean, stddev, stderr) = column_stats(&last);
    let max_sum = snaps.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(LyapunovReport { n, paths, mean, stddev, stderr, max_sum, spread })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRegularityReport {
    pub horizons: Vec<usize>,
    /// Mean over paths of `||r(x_n)/n - a_hat||`.
    pub deviation: Vec<f64>,
    /// Cross-path mean of `r(x_N)/N` at the largest horizon.
    pub a_hat: Vec<f64>,
    /// `max_g ||r(g)||`; bounds every `dist(x_n o, x_{n+1} o)`.
    pub step_bound: f64,
    pub decreasing: bool,
    pub verdict: String,
}

pub fn matrix_regularity_check<T: Real>(
    mu: &MatrixMeasure<T>,
    horizons: &[usize],
    paths: usize,
    threshold: f64,
    mc: &McConfig,
) -> Result<MatrixRegularityReport> {
    let snaps = radial_snapshots(mu, horizons, paths, mc)?;
    let k = horizons.len();
    let big_n = horizons[k - 1];
    let last: Vec<Vec<f64>> = snaps.iter().map(|(s, _)| s[k - 1].scaled(big_n as f64)).collect();
    let a_hat = column_stats(&last).0;
    let deviation: Vec<f64> = horizons
        .iter()
        .enumerate()
        .map(|(m, &n)| {
            let devs: Vec<f64> = snaps
                .iter()
                .map(|(s, _)| {
                    s[m].scaled(n as f64)
                        .iter()
                        .zip(&a_hat)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            devs.iter().copied().collect::<CompensatedSum>().value() / devs.len() as f64
        })
        .collect();
    let decreasing = deviation.windows(2).all(|w| w[1] <= w[0]);
    let a_norm = a_hat.iter().map(|a| a * a).sum::<f64>().sqrt();
    let verdict = if a_norm < 1e-9 {
        "degenerate (a = 0)"
    } else if decreasing && deviation[k - 1] < threshold {
        "regular-consistent"
    } else {
        "not-regular"
    };
    Ok(MatrixRegularityReport {
        horizons: horizons.to_vec(),
        deviation,
        a_hat,
        step_bound: mu.step_bound()?,
        decreasing,
        verdict: verdict.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlagReport {
    pub horizons: Vec<usize>,
    /// Mean over paths of the flag distance between steps `n` and `2n`.
    pub distance: Vec<f64>,
    pub lyapunov: Vec<f64>,
    pub min_gap: f64,
    pub decreasing: bool,
    pub warning: Option<String>,
    pub verdict: Option<String>,
}

/// Distances below this count as converged when judging the trend.
pub const FLAG_FLOOR: f64 = 1e-12;

pub fn flag_convergence<T: Real>(
    mu: &MatrixMeasure<T>,
    horizons: &[usize],
    paths: usize,
    gap_tolerance: f64,
    mc: &McConfig,
) -> Result<FlagReport> {
    let last = 2 * horizons.iter().copied().max().unwrap_or(0);
    let per_path: Vec<(Vec<f64>, RadialPart)> = mc
        .map_indexed(paths, |i| -> Result<(Vec<f64>, RadialPart)> {
            let mut rng = mc.rng(i as u64);
            let mut acc = QRAccumulator::new(mu.dim());
            let mut at_n = vec![None; horizons.len()];
            let mut dist = vec![f64::NAN; horizons.len()];
            for k in 1..=last {
                acc.step(&mu.atoms[mu.sample(&mut rng)].0)?;
                for (m, &n) in horizons.iter().enumerate() {
                    if k == n {
                        at_n[m] = Some(acc.flags());
                    }
                    if k == 2 * n {
                        dist[m] = flag_distance(at_n[m].as_ref().unwrap(), &acc.flags());
                    }
                }
            }
            Ok((dist, acc.radial_part()))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let distance: Vec<f64> = (0..horizons.len())
        .map(|m| per_path.iter().map(|p| p.0[m]).collect::<CompensatedSum>().value() / paths as f64)
        .collect();
    let rows: Vec<Vec<f64>> = per_path.iter().map(|p| p.1.scaled(last as f64)).collect();
    let lyapunov = column_stats(&rows).0;
    let min_gap = lyapunov.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    let floor = |x: f64| if x < FLAG_FLOOR { 0.0 } else { x };
    let decreasing = distance.windows(2).all(|w| floor(w[1]) <= floor(w[0]));
    let (warning, verdict) = if min_gap < gap_tolerance {
        (Some(format!("near-degenerate spectrum: smallest gap {min_gap:.2e}")), None)
    } else {
        let v = if decreasing { "cauchy-consistent" } else { "not-convergent" };
        (None, Some(v.to_string()))
    };
    Ok(FlagReport { horizons: horizons.to_vec(), distance, lyapunov, min_gap, decreasing, warning, verdict })
}

/// Distance between the flag of `g x_n` and `g` applied to the flag of
/// `x_n`, on the path drawn from `stream`.
pub fn flag_equivariance<T: Real>(
    mu: &MatrixMeasure<T>,
    g: &SquareMatrix<T>,
    n: usize,
    stream: u64,
    mc: &McConfig,
) -> Result<f64> {
    let steps = sample_indices(mu, n, &mut mc.rng(stream));
    let mut plain = QRAccumulator::new(mu.dim());
    let mut moved = QRAccumulator::with_prefix(g)?;
    for &i in &steps {
        plain.step(&mu.atoms[i].0)?;
        moved.step(&mu.atoms[i].0)?;
    }
    Ok(flag_distance(&moved.flags(), &transform_flag(g, &plain.flags())))
}

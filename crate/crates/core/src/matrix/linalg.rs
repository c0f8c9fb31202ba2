//! Small dense linear algebra: Householder QR, cyclic Jacobi for symmetric
//! eigenproblems, exterior powers.

use std::ops::{Index, IndexMut, Mul};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument("matrix must be square and nonempty".into()));
        }
        Ok(SquareMatrix { n, data: rows.iter().flatten().copied().collect() })
    }

    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<T>> = rows.iter().map(|r| r.iter().map(|&x| T::of(x)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Applies the matrix to a vector.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| (0..self.n).fold(T::zero(), |acc, j| acc + self[(i, j)] * v[j]))
            .collect()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> T {
        let n = self.n;
        let mut a = self.clone();
        let mut det = T::one();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().partial_cmp(&a[(j, k)].abs()).unwrap())
                .unwrap();
            if a[(p, k)] == T::zero() {
                return T::zero();
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                }
                det = -det;
            }
            det = det * a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / a[(k, k)];
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] = a[(i, j)] - f * v;
                }
            }
        }
        det
    }

    /// Householder QR: `self = Q R` with `Q` orthogonal, `R` upper triangular.
    pub fn qr(&self) -> (Self, Self) {
        let n = self.n;
        let mut r = self.clone();
        let mut q = Self::identity(n);
        for k in 0..n.saturating_sub(1) {
            let norm = (k..n).fold(T::zero(), |acc, i| acc + r[(i, k)] * r[(i, k)]).sqrt();
            if norm == T::zero() {
                continue;
            }
            let alpha = if r[(k, k)] > T::zero() { -norm } else { norm };
            let mut v: Vec<T> = vec![T::zero(); n];
            for i in k..n {
                v[i] = r[(i, k)];
            }
            v[k] = v[k] - alpha;
            let vv = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
            if vv == T::zero() {
                continue;
            }
            let two = T::of(2.0);
            // r <- (I - 2 v v^T / v^T v) r
            for j in 0..n {
                let s = (k..n).fold(T::zero(), |acc, i| acc + v[i] * r[(i, j)]) * two / vv;
                for i in k..n {
                    r[(i, j)] = r[(i, j)] - s * v[i];
                }
            }
            // q <- q (I - 2 v v^T / v^T v)
            for i in 0..n {
                let s = (k..n).fold(T::zero(), |acc, j| acc + q[(i, j)] * v[j]) * two / vv;
                for j in k..n {
                    q[(i, j)] = q[(i, j)] - s * v[j];
                }
            }
            for i in k + 1..n {
                r[(i, k)] = T::zero();
            }
        }
        (q, r)
    }

    /// `max |(Q^T Q - I)_{ij}|`.
    pub fn orthogonality_defect(&self) -> T {
        let p = &self.transpose() * self;
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((p[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// The `j`-th exterior power in the lexicographic basis of `j`-subsets.
    pub fn compound(&self, j: usize) -> Self {
        let sets = subsets(self.n, j);
        let m = sets.len();
        let mut c = Self::zeros(m);
        for (a, rows) in sets.iter().enumerate() {
            for (b, cols) in sets.iter().enumerate() {
                c[(a, b)] = minor(self, rows, cols);
            }
        }
        c
    }

    /// Largest singular value with its right singular vector.
    pub fn top_singular(&self) -> (T, Vec<T>) {
        let g = &self.transpose() * self;
        let (vals, vecs) = symmetric_eigen(&g);
        let k = (0..vals.len())
            .max_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap())
            .unwrap();
        let v: Vec<T> = (0..self.n).map(|i| vecs[(i, k)]).collect();
        // recompute from |A v| for full relative accuracy
        let av = self.apply(&v);
        let s = av.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
        (s, v)
    }
}

impl<T> Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for SquareMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Real> Mul for &SquareMatrix<T> {
    type Output = SquareMatrix<T>;
    fn mul(self, rhs: &SquareMatrix<T>) -> SquareMatrix<T> {
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// All `j`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, j: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, j: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == j {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, j, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, j, &mut Vec::new(), &mut out);
    out
}

fn minor<T: Real>(a: &SquareMatrix<T>, rows: &[usize], cols: &[usize]) -> T {
    let k = rows.len();
    let mut m = SquareMatrix::zeros(k);
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            m[(i, j)] = a[(r, c)];
        }
    }
    m.det()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues (unsorted) and eigenvectors as columns.
pub fn symmetric_eigen<T: Real>(s: &SquareMatrix<T>) -> (Vec<T>, SquareMatrix<T>) {
    let n = s.dim();
    let mut a = s.clone();
    let mut v = SquareMatrix::identity(n);
    for _sweep in 0..64 {
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + a[(i, j)] * a[(i, j)]);
        let diag = (0..n).fold(T::zero(), |acc, i| acc + a[(i, i)] * a[(i, i)]);
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Sine of the angle between the lines through two vectors, computed from
/// the wedge product so that tiny angles keep their relative precision.
pub fn line_distance<T: Real>(p: &[T], q: &[T]) -> T {
    let np = p.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    let nq = q.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    let mut w = T::zero();
    for i in 0..p.len() {
        for k in i + 1..p.len() {
            let x = p[i] * q[k] - p[k] * q[i];
            w = w + x * x;
        }
    }
    (w.sqrt() / (np * nq)).min(T::one())
}

//! Reproducible Monte Carlo plumbing.
//!
//! Path `i` of an experiment seeded with `seed` draws from ChaCha8 stream
//! `(seed, i)`. Per-path results are collected in index order and reduced
//! sequentially with compensated summation, so a report is a function of
//! `(config, seed)` only, whatever the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Seed and worker count shared by every sampling operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub seed: u64,
    pub workers: usize,
}

impl McConfig {
    pub fn new(seed: u64) -> Self {
        McConfig { seed, workers: 1 }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        McConfig { workers, ..self }
    }

    /// Generator for stream `stream` of this seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        stream_rng(self.seed, stream)
    }

    /// Evaluates `f(0), ..., f(count - 1)` on up to `workers` threads and
    /// returns the results in index order.
    pub fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if self.workers <= 1 || count <= 1 {
            return (0..count).map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.workers).build() {
            Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
            Err(_) => (0..count).map(f).collect(),
        }
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, stderr: f64::NAN, count: 0 };
        }
        let mean = xs.iter().copied().collect::<CompensatedSum>().value() / n as f64;
        if n == 1 {
            return Estimate { mean, stderr: 0.0, count: 1 };
        }
        let ss = xs
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .collect::<CompensatedSum>()
            .value();
        let var = ss / (n - 1) as f64;
        Estimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            count: n,
        }
    }

    /// Sample standard deviation.
    pub fn stddev(&self) -> f64 {
        self.stderr * (self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub n: usize,
    pub value: f64,
    pub stderr: f64,
}

/// Point estimate plus per-horizon trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub stderr: f64,
    pub horizon: usize,
    pub paths: usize,
    pub trace: Vec<TracePoint>,
}

impl EstimatorReport {
    /// Builds a report from per-path traces `samples[path][j - 1]`, j = 1..=horizon.
    pub fn from_path_traces(samples: &[Vec<f64>], horizon: usize) -> Self {
        let trace: Vec<TracePoint> = (0..horizon)
            .map(|j| {
                let col: Vec<f64> = samples.iter().map(|s| s[j]).collect();
                let e = Estimate::from_samples(&col);
                TracePoint { n: j + 1, value: e.mean, stderr: e.stderr }
            })
            .collect();
        let (estimate, stderr) = trace
            .last()
            .map(|t| (t.value, t.stderr))
            .unwrap_or((f64::NAN, f64::NAN));
        EstimatorReport {
            estimate,
            stderr,
            horizon,
            paths: samples.len(),
            trace,
        }
    }

    /// Trace as CSV with columns `n,statistic,stderr`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("n,statistic,stderr\n");
        for t in &self.trace {
            out.push_str(&format!("{},{},{}\n", t.n, t.value, t.stderr));
        }
        out
    }
}

/// Empirical quantile by the nearest-rank rule on a sorted copy.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

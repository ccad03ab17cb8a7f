//! Mergeable mean accumulators with batch-mean standard errors, the
//! integrated autocorrelation time and jackknife errors.

use serde::{Deserialize, Serialize};

/// A mean value together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr > 0.0 {
            (self.value - target).abs() / self.stderr
        } else if self.value == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Running means of a fixed-length vector of observables.  Samples are
/// grouped into consecutive batches of `batch_size`; standard errors are
/// computed from the spread of the completed batch means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    dim: usize,
    batch_size: usize,
    current: Vec<f64>,
    current_n: usize,
    batch_sum: Vec<f64>,
    batch_sq: Vec<f64>,
    n_batches: usize,
    total: Vec<f64>,
    count: usize,
}

impl BatchMeans {
    pub fn new(dim: usize, batch_size: usize) -> Self {
        let batch_size = batch_size.max(1);
        Self {
            dim,
            batch_size,
            current: vec![0.0; dim],
            current_n: 0,
            batch_sum: vec![0.0; dim],
            batch_sq: vec![0.0; dim],
            n_batches: 0,
            total: vec![0.0; dim],
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.dim, "sample dimension mismatch");
        for ((c, t), &s) in self.current.iter_mut().zip(self.total.iter_mut()).zip(sample) {
            *c += s;
            *t += s;
        }
        self.current_n += 1;
        self.count += 1;
        if self.current_n == self.batch_size {
            self.close_batch();
        }
    }

    fn close_batch(&mut self) {
        let inv = 1.0 / self.batch_size as f64;
        for i in 0..self.dim {
            let m = self.current[i] * inv;
            self.batch_sum[i] += m;
            self.batch_sq[i] += m * m;
            self.current[i] = 0.0;
        }
        self.current_n = 0;
        self.n_batches += 1;
    }

    /// Combines two accumulators built with the same batch size.  Partially
    /// filled batches are pooled.
    pub fn merge(&mut self, other: &BatchMeans) {
        assert_eq!(self.dim, other.dim);
        assert_eq!(self.batch_size, other.batch_size);
        for i in 0..self.dim {
            self.total[i] += other.total[i];
            self.batch_sum[i] += other.batch_sum[i];
            self.batch_sq[i] += other.batch_sq[i];
        }
        self.count += other.count;
        self.n_batches += other.n_batches;
        let mut leftover = other.current_n;
        let mut pending = other.current.clone();
        // Pool the two partial batches; a full batch is closed immediately.
        while leftover > 0 {
            let take = leftover.min(self.batch_size - self.current_n);
            let frac = take as f64 / leftover as f64;
            for i in 0..self.dim {
                let part = pending[i] * frac;
                self.current[i] += part;
                pending[i] -= part;
            }
            self.current_n += take;
            leftover -= take;
            if self.current_n == self.batch_size {
                self.close_batch();
            }
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        assert!(self.count > 0, "no samples accumulated");
        self.total[i] / self.count as f64
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.mean(i)).collect()
    }

    /// Standard error of component `i` from the batch means.
    pub fn stderr(&self, i: usize) -> f64 {
        if self.n_batches < 2 {
            return f64::INFINITY;
        }
        let nb = self.n_batches as f64;
        let m = self.batch_sum[i] / nb;
        let var = (self.batch_sq[i] / nb - m * m).max(0.0) * nb / (nb - 1.0);
        (var / nb).sqrt()
    }

    pub fn estimate(&self, i: usize) -> Estimate {
        Estimate::new(self.mean(i), self.stderr(i))
    }
}

/// Integrated autocorrelation time `τ = 1/2 + Σ_t ρ(t)` with Sokal's
/// self-consistent window `t ≤ 6τ`.
pub fn integrated_autocorrelation_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return 0.5;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 0.5;
    }
    let mut tau = 0.5;
    for t in 1..n / 2 {
        let ct = (0..n - t).map(|i| (series[i] - mean) * (series[i + t] - mean)).sum::<f64>() / n as f64;
        tau += ct / c0;
        if (t as f64) >= 6.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// Jackknife estimate of an arbitrary statistic over `groups` contiguous
/// blocks of the sample index range `0..n`.  The closure receives the index
/// ranges to include and returns the statistic.
pub fn jackknife<F, T>(n: usize, groups: usize, stat: F) -> (T, Vec<T>)
where
    F: Fn(&dyn Fn(usize) -> bool) -> T,
{
    let groups = groups.clamp(2, n.max(2));
    let full = stat(&|_| true);
    let leave_out: Vec<T> = (0..groups)
        .map(|g| {
            let lo = g * n / groups;
            let hi = (g + 1) * n / groups;
            stat(&move |i| i < lo || i >= hi)
        })
        .collect();
    (full, leave_out)
}

/// Jackknife standard error of leave-one-group-out values.
pub fn jackknife_stderr(leave_out: &[f64]) -> f64 {
    let g = leave_out.len() as f64;
    let m = leave_out.iter().sum::<f64>() / g;
    ((g - 1.0) / g * leave_out.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sqrt()
}

//! Running moments and link-level SINR estimators.

use crate::channel::C64;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Number of standard errors between this estimate and `target`, with the
    /// target's own uncertainty combined in quadrature.
    pub fn z_score(&self, target: &Estimate) -> f64 {
        let se = (self.stderr.powi(2) + target.stderr.powi(2)).sqrt();
        let diff = (self.value - target.value).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / se
        }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

/// Welford accumulator for a real scalar.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Running) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean(),
            stderr: self.stderr(),
        }
    }
}

/// Sufficient statistics for projecting an output `y` onto a unit-power
/// reference symbol `x`: `y = a·x + r` with `r` uncorrelated with `x`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Projection {
    n: u64,
    syy: f64,
    syx: C64,
    sxx: f64,
}

impl Projection {
    pub fn push(&mut self, y: C64, x: C64) {
        self.n += 1;
        self.syy += y.norm_sqr();
        self.syx += y * x.conj();
        self.sxx += x.norm_sqr();
    }

    pub fn merge(&mut self, o: &Projection) {
        self.n += o.n;
        self.syy += o.syy;
        self.syx += o.syx;
        self.sxx += o.sxx;
    }

    /// Least-squares gain `a`.
    pub fn gain(&self) -> C64 {
        self.syx / self.sxx
    }

    /// Coherent power `|a|²` delivered per unit symbol power.
    pub fn coherent_power(&self) -> f64 {
        self.gain().norm_sqr()
    }

    /// Mean residual power `E|y − a·x|²`.
    pub fn residual_power(&self) -> f64 {
        ((self.syy - self.syx.norm_sqr() / self.sxx) / self.n as f64).max(0.0)
    }

    pub fn sinr(&self) -> f64 {
        self.coherent_power() / self.residual_power()
    }
}

/// Accumulators that can be combined.
pub trait Merge {
    fn merge_from(&mut self, other: &Self);
    fn is_empty(&self) -> bool;
}

impl Merge for Running {
    fn merge_from(&mut self, other: &Self) {
        self.merge(other)
    }
    fn is_empty(&self) -> bool {
        self.n == 0
    }
}

impl Merge for Projection {
    fn merge_from(&mut self, other: &Self) {
        self.merge(other)
    }
    fn is_empty(&self) -> bool {
        self.n == 0
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge_from(&mut self, other: &Self) {
        self.0.merge_from(&other.0);
        self.1.merge_from(&other.1);
    }
    fn is_empty(&self) -> bool {
        self.0.is_empty() && self.1.is_empty()
    }
}

/// Splits samples into contiguous batches so that any smooth statistic of
/// the accumulated sums gets a batch-means standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct Batched<T> {
    batches: Vec<T>,
    n_samples: usize,
}

pub const DEFAULT_BATCHES: usize = 32;

impl<T: Default + Clone> Batched<T> {
    /// Prepares for `n_samples` pushes spread over `batches` batches.
    pub fn new(n_samples: usize, batches: usize) -> Self {
        let batches = batches.clamp(1, n_samples.max(1));
        Self {
            batches: vec![T::default(); batches],
            n_samples: n_samples.max(1),
        }
    }

    pub fn batch_mut(&mut self, sample_index: usize) -> &mut T {
        let b = (sample_index * self.batches.len() / self.n_samples).min(self.batches.len() - 1);
        &mut self.batches[b]
    }

    pub fn batches(&self) -> &[T] {
        &self.batches
    }
}

impl<T: Merge + Default + Clone> Batched<T> {
    pub fn total(&self) -> T {
        let mut t = T::default();
        for b in &self.batches {
            t.merge_from(b);
        }
        t
    }

    /// Full-sample value of `f` with a batch-means standard error.
    pub fn estimate(&self, f: impl Fn(&T) -> f64) -> Estimate {
        let value = f(&self.total());
        let mut r = Running::default();
        for b in self.batches.iter().filter(|b| !b.is_empty()) {
            r.push(f(b));
        }
        Estimate {
            value,
            stderr: r.stderr(),
        }
    }
}

impl Batched<Projection> {
    pub fn sinr(&self) -> Estimate {
        self.estimate(Projection::sinr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn running_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25, 0.0];
        let mut r = Running::default();
        xs.iter().for_each(|x| r.push(*x));
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((r.mean() - mean).abs() < 1e-12);
        assert!((r.variance() - var).abs() < 1e-12);

        let (mut a, mut b) = (Running::default(), Running::default());
        xs[..2].iter().for_each(|x| a.push(*x));
        xs[2..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert!((a.mean() - mean).abs() < 1e-12);
        assert!((a.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn projection_recovers_gain_and_residual() {
        // y = (2 − i)·x + r with r ⟂ x by construction.
        let xs = [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
        let rs = [C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0)];
        let a = C64::new(2.0, -1.0);
        let mut p = Projection::default();
        for (x, r) in xs.iter().zip(&rs) {
            p.push(a * x + r, *x);
        }
        assert!((p.gain() - a).norm() < 1e-12);
        assert!((p.residual_power() - 0.25).abs() < 1e-12);
        assert!((p.sinr() - 5.0 / 0.25).abs() < 1e-9);
    }

    #[test]
    fn batches_cover_all_samples() {
        let mut b: Batched<Running> = Batched::new(100, 32);
        for i in 0..100 {
            b.batch_mut(i).push(i as f64);
        }
        assert_eq!(b.total().count(), 100);
        assert!(b.batches().iter().all(|r| r.count() > 0));
    }

    #[test]
    fn z_score_combines_errors() {
        let a = Estimate { value: 1.0, stderr: 3.0 };
        let b = Estimate { value: 6.0, stderr: 4.0 };
        assert!((a.z_score(&b) - 1.0).abs() < 1e-12);
        assert_eq!(Estimate::exact(2.0).z_score(&Estimate::exact(2.0)), 0.0);
    }
}

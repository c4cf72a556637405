use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::Matrix;

/// Seeded xoshiro256++ generator threaded explicitly through every stochastic step.
#[derive(Clone, Debug)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng { inner: Xoshiro256PlusPlus::seed_from_u64(seed) }
    }

    /// Independent child stream; consumes one draw from `self`.
    pub fn fork(&mut self) -> SeededRng {
        let s: u64 = self.inner.random();
        SeededRng::new(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    pub fn normal(&mut self) -> f32 {
        let v: f64 = self.inner.sample(StandardNormal);
        v as f32
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f32, hi: f32) -> f32 {
        self.inner.random_range(lo..hi)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.random_bool(p)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize, std: f32) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = self.normal() * std;
        }
        m
    }

    pub fn uniform_matrix(&mut self, rows: usize, cols: usize, lo: f32, hi: f32) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = self.uniform(lo, hi);
        }
        m
    }

    /// Random unit vector of length `d`.
    pub fn unit_vector(&mut self, d: usize) -> Vec<f32> {
        loop {
            let v: Vec<f32> = (0..d).map(|_| self.normal()).collect();
            let n = super::matrix::norm_f64(&v);
            if n > 1e-6 {
                return v.into_iter().map(|x| (x as f64 / n) as f32).collect();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        for _ in 0..10 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_eq!(a.normal_matrix(3, 3, 1.0), b.normal_matrix(3, 3, 1.0));
    }

    #[test]
    fn forks_diverge() {
        let mut a = SeededRng::new(1);
        let mut c1 = a.fork();
        let mut c2 = a.fork();
        assert_ne!(c1.next_u64(), c2.next_u64());
    }
}

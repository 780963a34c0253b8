use rand::Rng;

use crate::error::{invalid, Result};

/// Sorted sample with a right-continuous step CDF (jumps of `1/n`).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    sorted: Vec<f64>,
}

impl EmpiricalLaw {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(invalid("sample", "empirical law needs at least one value"));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(invalid(
                "sample",
                "empirical sample contains non-finite values",
            ));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Self { sorted: sample })
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&v| v <= x);
        count as f64 / self.sorted.len() as f64
    }

    pub fn mean(&self) -> f64 {
        crate::par::pairwise_sum(&self.sorted) / self.sorted.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let sq: Vec<f64> = self.sorted.iter().map(|x| (x - m) * (x - m)).collect();
        crate::par::pairwise_sum(&sq) / self.sorted.len() as f64
    }

    pub fn mean_exp(&self) -> f64 {
        let e: Vec<f64> = self.sorted.iter().map(|x| x.exp()).collect();
        crate::par::pairwise_sum(&e) / self.sorted.len() as f64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sorted[rng.random_range(0..self.sorted.len())]
    }
}

//! Synthetic experiments: test densities, random IFA models, the I₁
//! criterion, a plain kernel smoothing baseline and the replication harness.
//!
//! Everything here is `f64`.

pub mod baseline;
pub mod criterion;
pub mod densities;
pub mod harness;
pub mod truth;

use crate::aggregator::AggregateDensity;
use crate::candidates::CandidateModel;

pub use baseline::BaselineKde;
pub use criterion::{i1_criterion, I1Config, I1Result, TensorGrid};
pub use densities::TestDensity;
pub use harness::{run_benchmark, BenchmarkConfig, BenchmarkResult, MethodSummary, RepRecord};
pub use truth::{generate, random_orthonormal, ConvolvedFactor, FactorCache, Sample, SyntheticTruth, TrueDensity};

/// A density on `ℝᵈ` that can be tabulated on tensor grids.
pub trait DensityField: Sync {
    fn dim(&self) -> usize;

    fn density(&self, x: &[f64]) -> f64;

    /// Values at every node of `axes[0] × … × axes[d−1]`, last axis fastest.
    fn eval_grid(&self, axes: &[Vec<f64>]) -> Vec<f64> {
        let d = axes.len();
        let total: usize = axes.iter().map(Vec::len).product();
        let mut out = Vec::with_capacity(total);
        if total == 0 {
            return out;
        }
        let mut idx = vec![0usize; d];
        let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
        for _ in 0..total {
            out.push(self.density(&x));
            for ax in (0..d).rev() {
                idx[ax] += 1;
                if idx[ax] < axes[ax].len() {
                    x[ax] = axes[ax][idx[ax]];
                    break;
                }
                idx[ax] = 0;
                x[ax] = axes[ax][0];
            }
        }
        out
    }
}

impl DensityField for AggregateDensity<f64> {
    fn dim(&self) -> usize {
        AggregateDensity::dim(self)
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

impl DensityField for CandidateModel<f64> {
    fn dim(&self) -> usize {
        CandidateModel::dim(self)
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

/// Wraps a closure as a [`DensityField`].
pub struct FnDensity<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnDensity<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnDensity { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> DensityField for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

//! Noisy independent factor analysis (IFA) density estimation.
//!
//! Observations are modelled as `X = A S + ε` where `A` is a `d × m` matrix with
//! orthonormal columns, `S` has independent zero-mean coordinates and `ε` is
//! isotropic Gaussian noise. Under that model the density of `X` factorises into
//! a Gaussian term on the orthogonal complement of `span(A)` times a product of
//! one-dimensional convolved densities, each of which is estimated with a
//! band-limited kernel. Rank-`k` candidates built from the leading eigenvectors of
//! the sample covariance are combined by mirror averaging, and the resulting
//! aggregate is used as a class-conditional density in a plug-in classifier.
//!
//! The numerical core is generic over the floating point type through [`Scalar`]
//! (implemented for `f32` and `f64`); the aliases at the crate root name the
//! `f64` instantiations used by the simulation harness and the CLI.

pub mod aggregator;
pub mod candidates;
pub mod classifier;
pub mod error;
pub mod io;
pub mod kde1d;
pub mod linmodel;
pub mod matrix;
pub mod rng;
pub mod simbench;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub use error::{IfaError, Result};

/// Floating point type the estimators are generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Display
    + Debug
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal; exact for `f64`, rounded for `f32`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type DataMatrix64 = linmodel::DataMatrix<f64>;
pub type SpectralDecomposition64 = linmodel::SpectralDecomposition<f64>;
pub type RankKFrame64 = linmodel::RankKFrame<f64>;
pub type Kde1d64 = kde1d::Kde1d<f64>;
pub type CandidateModel64 = candidates::CandidateModel<f64>;
pub type AggregateDensity64 = aggregator::AggregateDensity<f64>;
pub type ClassifierModel64 = classifier::ClassifierModel<f64>;
pub type LdaModel64 = classifier::LdaModel<f64>;

pub type DataMatrix32 = linmodel::DataMatrix<f32>;
pub type Kde1d32 = kde1d::Kde1d<f32>;
pub type CandidateModel32 = candidates::CandidateModel<f32>;
pub type AggregateDensity32 = aggregator::AggregateDensity<f32>;

pub use aggregator::{AggregateConfig, AggregateDensity, SplitPlan};
pub use candidates::{CandidateConfig, CandidateModel, McConfig, McEstimate, RestrictionBall};
pub use classifier::{ClassifierConfig, ClassifierModel, LdaModel};
pub use kde1d::{GridSpec, KernelId, Kde1d};
pub use linmodel::{DataMatrix, RankKFrame, SpectralDecomposition};
pub use matrix::Matrix;

//! One-dimensional kernel density estimation on a uniform grid.
//!
//! A raw estimate `(1/nh) Σ K((x − Yᵢ)/h)` is computed on a power-of-two grid by
//! linear binning followed by a zero-padded circular convolution (FFT). Binning
//! runs on an oversampled copy of the grid when the grid step is large compared
//! with the bandwidth. The
//! band-limited kernels (sinc, de la Vallée-Poussin) produce negative side lobes,
//! so the raw estimate is truncated to the nonnegative run around its mode and
//! renormalised before use. The corrected estimate is a piecewise-linear density
//! with an exact cumulative distribution at the grid nodes, which also drives
//! inverse-CDF sampling.

use std::io::Write;
use std::str::FromStr;

use log::warn;
use num_complex::Complex;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{IfaError, Result, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelId {
    /// `sin(u) / (πu)`
    Sinc,
    /// `(cos u − cos 2u) / (πu²)`
    ValleePoussin,
    /// standard normal density
    Gaussian,
}

impl KernelId {
    pub const ALL: [KernelId; 3] = [KernelId::Sinc, KernelId::ValleePoussin, KernelId::Gaussian];

    pub fn name(self) -> &'static str {
        match self {
            KernelId::Sinc => "sinc",
            KernelId::ValleePoussin => "vallee_poussin",
            KernelId::Gaussian => "gaussian",
        }
    }
}

impl FromStr for KernelId {
    type Err = IfaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "sinc" => Ok(KernelId::Sinc),
            "vallee_poussin" | "vp" => Ok(KernelId::ValleePoussin),
            "gaussian" | "normal" => Ok(KernelId::Gaussian),
            other => Err(IfaError::Parameter(format!(
                "unknown kernel '{other}' (expected sinc, vallee_poussin or gaussian)"
            ))),
        }
    }
}

impl std::fmt::Display for KernelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn kernel_value<T: Scalar>(id: KernelId, u: T) -> T {
    let pi = T::PI();
    match id {
        KernelId::Sinc => {
            if u == T::zero() {
                T::FRAC_1_PI()
            } else {
                u.sin() / (pi * u)
            }
        }
        KernelId::ValleePoussin => {
            // cos u − cos 2u = 2 sin(3u/2) sin(u/2), free of cancellation near 0
            if u == T::zero() {
                T::lit(1.5) * T::FRAC_1_PI()
            } else {
                let half = T::lit(0.5);
                T::lit(2.0) * (T::lit(1.5) * u).sin() * (half * u).sin() / (pi * u * u)
            }
        }
        KernelId::Gaussian => (-(u * u) * T::lit(0.5)).exp() / (T::TAU()).sqrt(),
    }
}

/// `σ / √(ln n)`, with `ln n` clamped below at 1.
pub fn bandwidth<T: Scalar>(sigma: T, n: usize) -> Result<T> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(IfaError::Parameter(format!(
            "bandwidth needs a positive noise scale, got {sigma}"
        )));
    }
    let mut log_n = T::of_usize(n.max(1)).ln();
    if log_n < T::one() {
        warn!("sample size {n} gives ln n < 1; bandwidth denominator clamped to 1");
        log_n = T::one();
    }
    Ok(sigma / log_n.sqrt())
}

/// Evaluation grid layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of nodes, a power of two.
    pub points: usize,
    /// Grid extends this many bandwidths beyond the sample range on each side.
    pub pad_bandwidths: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 1024,
            pad_bandwidths: 4.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points < 4 || !self.points.is_power_of_two() {
            return Err(IfaError::Parameter(format!(
                "grid size must be a power of two >= 4, got {}",
                self.points
            )));
        }
        if !(self.pad_bandwidths >= 0.0) || !self.pad_bandwidths.is_finite() {
            return Err(IfaError::Parameter(format!(
                "grid padding must be finite and nonnegative, got {}",
                self.pad_bandwidths
            )));
        }
        Ok(())
    }
}

/// Uncorrected kernel estimate on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RawEstimate<T> {
    pub kernel: Option<KernelId>,
    pub bandwidth: Option<T>,
    pub lo: T,
    pub hi: T,
    pub values: Vec<T>,
}

impl<T: Scalar> RawEstimate<T> {
    /// Grid values of an arbitrary function, e.g. a reference density.
    pub fn tabulated(lo: T, hi: T, values: Vec<T>) -> Result<Self> {
        if values.len() < 2 || !(hi > lo) {
            return Err(IfaError::Parameter(format!(
                "a grid needs lo < hi and at least 2 nodes (got [{lo}, {hi}], {} nodes)",
                values.len()
            )));
        }
        Ok(RawEstimate {
            kernel: None,
            bandwidth: None,
            lo,
            hi,
            values,
        })
    }

    pub fn step(&self) -> T {
        (self.hi - self.lo) / T::of_usize(self.values.len() - 1)
    }

    pub fn node(&self, i: usize) -> T {
        self.lo + T::of_usize(i) * self.step()
    }
}

/// Largest fine-grid step, in bandwidths, used for binning.
const MAX_BIN_RATIO: f64 = 0.004;
/// Cap on the oversampled binning grid.
const MAX_FINE_NODES: usize = 1 << 20;

/// Raw kernel estimate on a grid covering `[min − pad·h, max + pad·h]`, by
/// linear binning and FFT convolution.
pub fn fit_raw<T: Scalar>(
    samples: &[T],
    kernel: KernelId,
    h: T,
    grid: &GridSpec,
) -> Result<RawEstimate<T>> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(IfaError::Parameter(format!("bandwidth must be positive, got {h}")));
    }
    if samples.len() < 2 {
        return Err(IfaError::Size(format!(
            "kernel estimate needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(IfaError::Numeric("non-finite sample".into()));
    }
    grid.validate()?;

    let p = grid.points;
    let (min, max) = samples
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &v| (a.min(v), b.max(v)));
    let pad = T::lit(grid.pad_bandwidths) * h;
    let lo = min - pad;
    let hi = max + pad;
    let step = (hi - lo) / T::of_usize(p - 1);

    // Binning error scales with (step/h)², so bin on a finer grid when the
    // output grid is coarse relative to the bandwidth.
    let ratio = (step / h).to_f64().unwrap_or(0.0);
    let mut os = 1usize;
    while ratio / (os as f64) > MAX_BIN_RATIO && (p - 1) * os * 2 < MAX_FINE_NODES {
        os *= 2;
    }
    let fine_p = (p - 1) * os + 1;
    let fine_step = step / T::of_usize(os);

    let len = (2 * fine_p).next_power_of_two();
    let zero = Complex::new(T::zero(), T::zero());
    let mut counts = vec![zero; len];
    for &y in samples {
        let t = (y - lo) / fine_step;
        let j = t.floor().to_usize().unwrap_or(0).min(fine_p - 2);
        let frac = t - T::of_usize(j);
        counts[j].re = counts[j].re + (T::one() - frac);
        counts[j + 1].re = counts[j + 1].re + frac;
    }

    let scale = T::one() / (T::of_usize(samples.len()) * h);
    let mut weights = vec![zero; len];
    for m in 0..fine_p {
        let k = kernel_value(kernel, T::of_usize(m) * fine_step / h) * scale;
        weights[m].re = k;
        if m > 0 {
            weights[len - m].re = k;
        }
    }

    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(len);
    let inverse = planner.plan_fft_inverse(len);
    forward.process(&mut counts);
    forward.process(&mut weights);
    for (c, w) in counts.iter_mut().zip(&weights) {
        *c = *c * *w;
    }
    inverse.process(&mut counts);
    let norm = T::one() / T::of_usize(len);
    let values = (0..p).map(|i| counts[i * os].re * norm).collect();

    Ok(RawEstimate {
        kernel: Some(kernel),
        bandwidth: Some(h),
        lo,
        hi,
        values,
    })
}

/// A corrected, normalised one-dimensional density on a uniform grid.
///
/// Between nodes the density is linear; outside the node interval
/// `[x_first, x_last]` of [`Kde1d::support`] it is exactly zero. `cdf[i]` is the
/// exact integral of that piecewise-linear density up to node `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Kde1d<T> {
    kernel: Option<KernelId>,
    bandwidth: Option<T>,
    lo: T,
    hi: T,
    values: Vec<T>,
    support: (usize, usize),
    cdf: Vec<T>,
}

/// Truncates a raw estimate to the maximal nonnegative run containing its
/// global maximum, renormalises it, and tabulates the CDF.
pub fn hall_murison_correct<T: Scalar>(raw: &RawEstimate<T>) -> Result<Kde1d<T>> {
    let v = &raw.values;
    let p = v.len();
    if p < 2 {
        return Err(IfaError::Parameter("grid has fewer than 2 nodes".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(IfaError::Numeric("raw estimate has non-finite values".into()));
    }
    let (mode, peak) = v
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, x)| if x > bv { (i, x) } else { (bi, bv) });
    if !(peak > T::zero()) {
        return Err(IfaError::Estimation(
            "raw estimate has no positive value".into(),
        ));
    }
    let mut a = mode;
    while a > 0 && v[a - 1] >= T::zero() {
        a -= 1;
    }
    let mut b = mode;
    while b + 1 < p && v[b + 1] >= T::zero() {
        b += 1;
    }
    if a == b {
        return Err(IfaError::Estimation(
            "nonnegative range around the mode is a single node".into(),
        ));
    }

    let step = raw.step();
    let half = T::lit(0.5);
    let mut values = vec![T::zero(); p];
    values[a..=b].copy_from_slice(&v[a..=b]);
    let mut cdf = vec![T::zero(); p];
    let mut acc = T::zero();
    for i in a..b {
        acc = acc + half * step * (values[i] + values[i + 1]);
        cdf[i + 1] = acc;
    }
    if !(acc > T::zero()) {
        return Err(IfaError::Estimation("corrected estimate has zero mass".into()));
    }
    for x in values.iter_mut() {
        *x = *x / acc;
    }
    for c in cdf[a..=b].iter_mut() {
        *c = *c / acc;
    }
    for c in cdf[b..].iter_mut() {
        *c = T::one();
    }

    Ok(Kde1d {
        kernel: raw.kernel,
        bandwidth: raw.bandwidth,
        lo: raw.lo,
        hi: raw.hi,
        values,
        support: (a, b),
        cdf,
    })
}

/// Raw fit followed by the nonnegativity correction.
pub fn fit<T: Scalar>(samples: &[T], kernel: KernelId, h: T, grid: &GridSpec) -> Result<Kde1d<T>> {
    hall_murison_correct(&fit_raw(samples, kernel, h, grid)?)
}

impl<T: Scalar> Kde1d<T> {
    /// Corrected density from tabulated grid values.
    pub fn tabulated(lo: T, hi: T, values: Vec<T>) -> Result<Self> {
        hall_murison_correct(&RawEstimate::tabulated(lo, hi, values)?)
    }

    pub fn kernel(&self) -> Option<KernelId> {
        self.kernel
    }

    pub fn bandwidth(&self) -> Option<T> {
        self.bandwidth
    }

    pub fn grid_points(&self) -> usize {
        self.values.len()
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn step(&self) -> T {
        (self.hi - self.lo) / T::of_usize(self.values.len() - 1)
    }

    pub fn node(&self, i: usize) -> T {
        self.lo + T::of_usize(i) * self.step()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn cdf(&self) -> &[T] {
        &self.cdf
    }

    /// Index range of the nodes carrying mass.
    pub fn support_nodes(&self) -> (usize, usize) {
        self.support
    }

    /// Interval outside which the density is exactly zero.
    pub fn support(&self) -> (T, T) {
        (self.node(self.support.0), self.node(self.support.1))
    }

    /// Density at `x`, linearly interpolated; zero outside the support.
    #[inline]
    pub fn eval(&self, x: T) -> T {
        let (a, b) = self.support;
        let step = self.step();
        let t = (x - self.lo) / step;
        let (ta, tb) = (T::of_usize(a), T::of_usize(b));
        if !(t >= ta && t <= tb) {
            return T::zero();
        }
        let i = t.floor().to_usize().unwrap_or(a).clamp(a, b - 1);
        let frac = t - T::of_usize(i);
        self.values[i] + (self.values[i + 1] - self.values[i]) * frac
    }

    /// Exact integral of the interpolated density (1 up to rounding).
    pub fn integral(&self) -> T {
        let (a, b) = self.support;
        let half = T::lit(0.5);
        (a..b).fold(T::zero(), |acc, i| {
            acc + half * self.step() * (self.values[i] + self.values[i + 1])
        })
    }

    /// Trapezoid integral of the squared grid values over the support.
    pub fn square_integral_trapezoid(&self) -> T {
        let (a, b) = self.support;
        let half = T::lit(0.5);
        (a..b).fold(T::zero(), |acc, i| {
            let (u, v) = (self.values[i], self.values[i + 1]);
            acc + half * self.step() * (u * u + v * v)
        })
    }

    pub fn mean(&self) -> T {
        let (a, b) = self.support;
        let h = self.step();
        let six = T::lit(6.0);
        let two = T::lit(2.0);
        (a..b).fold(T::zero(), |acc, i| {
            let (x0, x1) = (self.node(i), self.node(i + 1));
            let (f0, f1) = (self.values[i], self.values[i + 1]);
            acc + h * (f0 * (two * x0 + x1) + f1 * (x0 + two * x1)) / six
        })
    }

    pub fn variance(&self) -> T {
        let (a, b) = self.support;
        let h = self.step();
        let (two, three, twelve) = (T::lit(2.0), T::lit(3.0), T::lit(12.0));
        let second = (a..b).fold(T::zero(), |acc, i| {
            let (x0, x1) = (self.node(i), self.node(i + 1));
            let (f0, f1) = (self.values[i], self.values[i + 1]);
            acc + h
                * (f0 * (three * x0 * x0 + two * x0 * x1 + x1 * x1)
                    + f1 * (x0 * x0 + two * x0 * x1 + three * x1 * x1))
                / twelve
        });
        let m = self.mean();
        second - m * m
    }

    /// Maps a uniform variate through the linearly interpolated inverse CDF.
    #[inline]
    pub fn quantile(&self, u: T) -> T {
        let (a, b) = self.support;
        let window = &self.cdf[a..=b];
        // first node with cdf > u; cdf[a] = 0 <= u and cdf[b] = 1 > u for u in [0, 1)
        let idx = window.partition_point(|&c| c <= u).clamp(1, window.len() - 1);
        let i = a + idx - 1;
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let x0 = self.node(i);
        if c1 > c0 {
            x0 + self.step() * (u - c0) / (c1 - c0)
        } else {
            x0
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u = T::lit(rng.random::<f64>());
        self.quantile(u)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<T> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }

    /// Writes `x,density,cdf` rows for every grid node.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,density,cdf")?;
        for i in 0..self.values.len() {
            writeln!(out, "{},{},{}", self.node(i), self.values[i], self.cdf[i])?;
        }
        Ok(())
    }
}

/// Direct `O(nP)` evaluation of the raw estimate at `x`. Used as a reference
/// for the binned FFT path.
pub fn direct_sum<T: Scalar>(samples: &[T], kernel: KernelId, h: T, x: T) -> T {
    let s = samples
        .iter()
        .fold(T::zero(), |acc, &y| acc + kernel_value(kernel, (x - y) / h));
    s / (T::of_usize(samples.len()) * h)
}

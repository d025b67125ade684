//! Synthetic IFA models: random orthonormal mixing, sampling, and the exact
//! density of the observations.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::densities::TestDensity;
use super::DensityField;
use crate::matrix::{dot, norm_sq, Matrix};
use crate::rng::{self, label};
use crate::{IfaError, Result};

/// `d × m` matrix with i.i.d. N(0, 1) entries orthonormalised by modified
/// Gram-Schmidt.
pub fn random_orthonormal(d: usize, m: usize, seed: u64) -> Result<Matrix<f64>> {
    if m > d {
        return Err(IfaError::Rank { k: m, d });
    }
    if m == 0 {
        return Err(IfaError::Dimension("mixing matrix needs at least one column".into()));
    }
    let mut rng = rng::stream(seed, &[label::MIXING]);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    while cols.len() < m {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let start = norm_sq(&v).sqrt();
        for q in &cols {
            let c = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        // a second pass restores orthogonality lost to cancellation
        for q in &cols {
            let c = dot(q, &v);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let nrm = norm_sq(&v).sqrt();
        if nrm <= 1e-8 * start {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= nrm);
        cols.push(v);
    }
    Matrix::from_columns(&cols)
}

/// Parameters of a synthetic model `X = μ + A (S − E S) + ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub d: usize,
    pub m: usize,
    pub mixing: Matrix<f64>,
    pub factors: Vec<TestDensity>,
    /// Factor variances, the diagonal of `W`.
    pub variances: Vec<f64>,
    /// Noise standard deviation.
    pub sigma: f64,
    pub snr: f64,
    pub seed: u64,
    /// Location shift `μ` (zero unless set).
    #[serde(default)]
    pub offset: Vec<f64>,
}

impl SyntheticTruth {
    /// Random mixing from `seed` and `σ = √(tr W / d) / snr`. `snr` may be
    /// infinite (noiseless).
    pub fn new(d: usize, factors: &[TestDensity], snr: f64, seed: u64) -> Result<Self> {
        let m = factors.len();
        let mixing = random_orthonormal(d, m, seed)?;
        Self::with_mixing(mixing, factors, snr, seed)
    }

    pub fn with_mixing(
        mixing: Matrix<f64>,
        factors: &[TestDensity],
        snr: f64,
        seed: u64,
    ) -> Result<Self> {
        let (d, m) = (mixing.rows(), mixing.cols());
        if factors.len() != m || m == 0 {
            return Err(IfaError::Dimension(format!(
                "{} factor laws for a mixing matrix with {m} columns",
                factors.len()
            )));
        }
        if m > d {
            return Err(IfaError::Rank { k: m, d });
        }
        if mixing.orthonormality_defect() > 1e-10 {
            return Err(IfaError::Numeric("mixing matrix columns are not orthonormal".into()));
        }
        if !(snr > 0.0) {
            return Err(IfaError::Config(format!("SNR must be positive, got {snr}")));
        }
        let variances: Vec<f64> = factors.iter().map(|f| f.variance()).collect();
        let sigma = (variances.iter().sum::<f64>() / d as f64).sqrt() / snr;
        Ok(SyntheticTruth {
            d,
            m,
            mixing,
            factors: factors.to_vec(),
            variances,
            sigma,
            snr,
            seed,
            offset: vec![0.0; d],
        })
    }

    pub fn with_offset(mut self, offset: Vec<f64>) -> Result<Self> {
        if offset.len() != self.d {
            return Err(IfaError::Dimension(format!(
                "offset has length {}, expected {}",
                offset.len(),
                self.d
            )));
        }
        self.offset = offset;
        Ok(self)
    }

    /// Covariance `A W Aᵀ + σ² I`.
    pub fn covariance(&self) -> Matrix<f64> {
        let mut c = Matrix::zeros(self.d, self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                let s: f64 = (0..self.m)
                    .map(|k| self.mixing[(i, k)] * self.variances[k] * self.mixing[(j, k)])
                    .sum();
                c[(i, j)] = s + if i == j { self.sigma * self.sigma } else { 0.0 };
            }
        }
        c
    }

    /// Standard deviation along the most spread direction.
    pub fn max_std(&self) -> f64 {
        let w = self.variances.iter().copied().fold(0.0, f64::max);
        (w + self.sigma * self.sigma).sqrt()
    }
}

/// Observations with the latent quantities that produced them.
#[derive(Clone, Debug)]
pub struct Sample {
    /// `n × d`, uncentered.
    pub x: Matrix<f64>,
    /// Centered factors, `n × m`.
    pub factors: Matrix<f64>,
    /// Noise, `n × d`.
    pub noise: Matrix<f64>,
}

/// Draws `n` observations. Factor `k` uses stream `[FACTORS, k]` and the noise
/// stream `[NOISE]` under `seed`, so the first rows of a larger sample equal a
/// smaller one.
pub fn generate(truth: &SyntheticTruth, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(IfaError::Size("cannot generate an empty sample".into()));
    }
    let (d, m) = (truth.d, truth.m);
    let mut s = Matrix::zeros(n, m);
    for (k, law) in truth.factors.iter().enumerate() {
        let mut r = rng::stream(seed, &[label::FACTORS, k as u64]);
        let mu = law.mean();
        for i in 0..n {
            s[(i, k)] = law.sample(&mut r) - mu;
        }
    }
    let mut noise = Matrix::zeros(n, d);
    if truth.sigma > 0.0 {
        let mut r = rng::stream(seed, &[label::NOISE]);
        for i in 0..n {
            for v in noise.row_mut(i) {
                let z: f64 = r.sample(StandardNormal);
                *v = truth.sigma * z;
            }
        }
    }
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        let si = s.row(i).to_vec();
        let ni = noise.row(i).to_vec();
        let row = x.row_mut(i);
        for j in 0..d {
            let mut v = truth.offset[j] + ni[j];
            for (k, sk) in si.iter().enumerate() {
                v += truth.mixing[(j, k)] * sk;
            }
            row[j] = v;
        }
    }
    Ok(Sample { x, factors: s, noise })
}

/// Density of a centered factor convolved with N(0, σ²).
#[derive(Clone, Debug)]
pub struct ConvolvedFactor {
    law: TestDensity,
    sigma: f64,
    mean: f64,
    kind: Convolved,
}

#[derive(Clone, Debug)]
enum Convolved {
    /// `(weight, centered mean, variance + σ²)`
    Gaussian(Vec<(f64, f64, f64)>),
    Grid { lo: f64, step: f64, values: Vec<f64> },
}

const GRID_STEPS_PER_SIGMA: f64 = 32.0;
const MAX_GRID: usize = 1 << 20;
const KERNEL_HALF_WIDTH: f64 = 8.0;

impl ConvolvedFactor {
    /// Gaussian mixtures convolve in closed form. Other laws use
    /// `g = F * φ_σ'` (integration by parts, which avoids the pdf singularity of
    /// χ²(1)) tabulated with trapezoid sums at spacing `σ / 32`; outside the
    /// table `g` is replaced by the factor pdf, whose tails are flat on the scale `σ`.
    pub fn new(law: TestDensity, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(IfaError::Parameter(format!(
                "convolution needs a positive noise level, got {sigma}"
            )));
        }
        let mean = law.mean();
        if let Some(comp) = law.gaussian_components() {
            let c = comp
                .into_iter()
                .map(|(w, m, v)| (w, m - mean, v + sigma * sigma))
                .collect();
            return Ok(ConvolvedFactor { law, sigma, mean, kind: Convolved::Gaussian(c) });
        }
        let (a, b) = law.tail_bounds(1e-10);
        let lo = a - mean - KERNEL_HALF_WIDTH * sigma;
        let hi = b - mean + KERNEL_HALF_WIDTH * sigma;
        let mut step = sigma / GRID_STEPS_PER_SIGMA;
        let mut nodes = ((hi - lo) / step).ceil() as usize + 1;
        if nodes > MAX_GRID {
            nodes = MAX_GRID;
            step = (hi - lo) / (nodes - 1) as f64;
        }
        // F on the grid extended by the kernel half-width on both sides
        let w = (KERNEL_HALF_WIDTH * sigma / step).ceil() as usize;
        let ext_lo = lo - w as f64 * step;
        let cdf: Vec<f64> = (0..nodes + 2 * w)
            .map(|i| law.cdf(ext_lo + i as f64 * step + mean))
            .collect();
        let s2 = sigma * sigma;
        let norm = 1.0 / (2.0 * PI * s2).sqrt();
        // φ_σ'(t) = −t/σ² φ_σ(t) at t = j·step, j = −w..=w
        let kernel: Vec<f64> = (0..=2 * w)
            .map(|j| {
                let t = (j as f64 - w as f64) * step;
                -t / s2 * norm * (-t * t / (2.0 * s2)).exp() * step
            })
            .collect();
        // g(u_i) = Σ_j F(u_i − t_j) φ'(t_j) step
        let values: Vec<f64> = (0..nodes)
            .map(|i| {
                let centre = i + w;
                let v: f64 = kernel
                    .iter()
                    .enumerate()
                    .map(|(j, kv)| kv * cdf[centre + w - j])
                    .sum();
                v.max(0.0)
            })
            .collect();
        Ok(ConvolvedFactor {
            law,
            sigma,
            mean,
            kind: Convolved::Grid { lo, step, values },
        })
    }

    pub fn law(&self) -> TestDensity {
        self.law
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match &self.kind {
            Convolved::Gaussian(c) => c
                .iter()
                .map(|&(w, m, v)| w * (-(u - m) * (u - m) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt())
                .sum(),
            Convolved::Grid { lo, step, values } => {
                let t = (u - lo) / step;
                let last = values.len() - 1;
                if t >= 0.0 && t <= last as f64 {
                    let i = (t.floor() as usize).min(last - 1);
                    let f = t - i as f64;
                    values[i] + (values[i + 1] - values[i]) * f
                } else {
                    self.law.pdf(u + self.mean)
                }
            }
        }
    }
}

/// Shares convolved factor tables between models with the same noise level.
#[derive(Default)]
pub struct FactorCache {
    map: Mutex<HashMap<(TestDensity, u64), Arc<ConvolvedFactor>>>,
}

impl FactorCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, law: TestDensity, sigma: f64) -> Result<Arc<ConvolvedFactor>> {
        let key = (law, sigma.to_bits());
        if let Some(f) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(f.clone());
        }
        let f = Arc::new(ConvolvedFactor::new(law, sigma)?);
        self.map.lock().expect("cache lock").insert(key, f.clone());
        Ok(f)
    }
}

/// Exact density of a [`SyntheticTruth`]:
/// `(2πσ²)^(−(d−m)/2) exp(−|P⊥(x − μ)|² / 2σ²) ∏ₖ gₖ(aₖᵀ(x − μ))`.
#[derive(Clone, Debug)]
pub struct TrueDensity {
    truth: SyntheticTruth,
    factors: Vec<Arc<ConvolvedFactor>>,
    prefactor: f64,
}

impl TrueDensity {
    pub fn new(truth: &SyntheticTruth) -> Result<Self> {
        Self::with_cache(truth, &FactorCache::new())
    }

    pub fn with_cache(truth: &SyntheticTruth, cache: &FactorCache) -> Result<Self> {
        if !(truth.sigma > 0.0) {
            return Err(IfaError::Parameter(
                "the observation density needs positive noise".into(),
            ));
        }
        let factors = truth
            .factors
            .iter()
            .map(|&law| cache.get(law, truth.sigma))
            .collect::<Result<Vec<_>>>()?;
        let s2 = truth.sigma * truth.sigma;
        let prefactor = (2.0 * PI * s2).powf(-((truth.d - truth.m) as f64) / 2.0);
        Ok(TrueDensity {
            truth: truth.clone(),
            factors,
            prefactor,
        })
    }

    pub fn truth(&self) -> &SyntheticTruth {
        &self.truth
    }

    pub fn factors(&self) -> &[Arc<ConvolvedFactor>] {
        &self.factors
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let t = &self.truth;
        let mut y = [0.0f64; 16];
        let mut heap;
        let y: &mut [f64] = if t.d <= 16 {
            &mut y[..t.d]
        } else {
            heap = vec![0.0; t.d];
            &mut heap
        };
        for (j, v) in y.iter_mut().enumerate() {
            *v = x[j] - t.offset[j];
        }
        let mut perp = norm_sq(y);
        let mut prod = 1.0;
        for (k, g) in self.factors.iter().enumerate() {
            let u: f64 = (0..t.d).map(|j| t.mixing[(j, k)] * y[j]).sum();
            perp -= u * u;
            prod *= g.eval(u);
        }
        if t.d == t.m {
            return prod;
        }
        let perp = perp.max(0.0);
        self.prefactor * (-perp / (2.0 * t.sigma * t.sigma)).exp() * prod
    }
}

impl DensityField for TrueDensity {
    fn dim(&self) -> usize {
        self.truth.d
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

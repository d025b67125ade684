//! Rank-`k` IFA candidate densities.
//!
//! For an orthonormal frame `B` (`d × k`) and noise variance `σ²`, the candidate
//! is
//!
//! ```text
//! p̂(x) = (2πσ²)^(−(d−k)/2) · exp(−|x − Bᵀx B|² / 2σ²) · ∏ⱼ ĝⱼ(bⱼᵀx)
//! ```
//!
//! evaluated at centered coordinates and set to zero outside a Euclidean
//! restriction ball. `∫p̂²` is estimated by Monte-Carlo with draws from `p̂`
//! itself, so that `∫p̂² = E_p̂[p̂(X)]`.

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kde1d::{self, GridSpec, Kde1d, KernelId};
use crate::linmodel::{self, DataMatrix, RankKFrame};
use crate::matrix::{dot, norm_sq, Matrix};
use crate::rng::{self, label};
use crate::{IfaError, Result, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RestrictionBall<T> {
    center: Vec<T>,
    radius: T,
}

impl<T: Scalar> RestrictionBall<T> {
    /// `radius` may be infinite (no restriction).
    pub fn new(center: Vec<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(IfaError::Parameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(IfaError::Numeric("ball center is not finite".into()));
        }
        Ok(RestrictionBall { center, radius })
    }

    /// Ball at the sample mean with radius `multiplier ×` the `quantile` of the
    /// centered sample norms.
    pub fn from_data(data: &DataMatrix<T>, multiplier: f64, quantile: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&quantile) || !(multiplier > 0.0) {
            return Err(IfaError::Parameter(format!(
                "ball needs a quantile in [0, 1] and a positive multiplier, got {quantile} and {multiplier}"
            )));
        }
        let mut norms: Vec<T> = data.values().row_iter().map(|r| norm_sq(r).sqrt()).collect();
        norms.sort_by(|a, b| a.partial_cmp(b).expect("finite norms"));
        let n = norms.len();
        let idx = ((quantile * n as f64).ceil() as usize).clamp(1, n) - 1;
        let mut radius = norms[idx] * T::lit(multiplier);
        if !(radius > T::zero()) {
            warn!("degenerate sample: restriction ball radius set to 1");
            radius = T::one();
        }
        Self::new(data.center().to_vec(), radius)
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    #[inline]
    pub fn contains(&self, x: &[T]) -> bool {
        if self.radius.is_infinite() {
            return true;
        }
        let d2 = x
            .iter()
            .zip(&self.center)
            .fold(T::zero(), |acc, (&a, &c)| acc + (a - c) * (a - c));
        d2 <= self.radius * self.radius
    }

    /// Uniform draw from the ball.
    fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let d = self.dim();
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let r = self.radius.as_f64() * rng.random::<f64>().powf(1.0 / d as f64);
        dir.iter()
            .zip(&self.center)
            .map(|(&u, &c)| c + T::lit(r * u / norm))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Initial number of draws.
    pub q0: usize,
    /// Relative change between doublings at which the estimate is accepted.
    pub tol: f64,
    /// Draw cap.
    pub max_draws: usize,
    /// Draws per independently seeded block.
    pub block: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            q0: 4096,
            tol: 0.005,
            max_draws: 1 << 20,
            block: 1024,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q0 == 0 || self.block == 0 || self.max_draws == 0 {
            return Err(IfaError::Parameter(
                "Monte-Carlo sizes must be positive".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(IfaError::Parameter(format!(
                "Monte-Carlo tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct McEstimate<T> {
    pub estimate: T,
    pub stderr: T,
    pub draws: usize,
    /// `false` when the draw cap was hit before the stopping rule fired.
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub kernel: KernelId,
    pub grid: GridSpec,
    /// Multiplier on the default bandwidth `σ̂/√(ln n)`.
    pub bandwidth_scale: f64,
    pub ball_radius_multiplier: f64,
    pub ball_quantile: f64,
    pub mc: McConfig,
    /// Random probes per dimension used for the sup-norm estimate.
    pub probes_per_dim: usize,
    /// Known noise variance; replaces the eigenvalue-based estimate.
    pub known_sigma2: Option<f64>,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig {
            kernel: KernelId::Sinc,
            grid: GridSpec::default(),
            bandwidth_scale: 1.0,
            ball_radius_multiplier: 1.2,
            ball_quantile: 0.995,
            mc: McConfig::default(),
            probes_per_dim: 10,
            known_sigma2: None,
        }
    }
}

impl CandidateConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.mc.validate()?;
        if !(self.bandwidth_scale > 0.0) || !self.bandwidth_scale.is_finite() {
            return Err(IfaError::Parameter(format!(
                "bandwidth scale must be positive, got {}",
                self.bandwidth_scale
            )));
        }
        if !(self.ball_radius_multiplier > 0.0) {
            return Err(IfaError::Parameter(format!(
                "ball radius multiplier must be positive, got {}",
                self.ball_radius_multiplier
            )));
        }
        if !(0.0..=1.0).contains(&self.ball_quantile) {
            return Err(IfaError::Parameter(format!(
                "ball quantile must lie in [0, 1], got {}",
                self.ball_quantile
            )));
        }
        if let Some(s) = self.known_sigma2 {
            if !(s > 0.0) || !s.is_finite() {
                return Err(IfaError::Parameter(format!(
                    "known noise variance must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// A fitted rank-`k` candidate density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CandidateModel<T> {
    center: Vec<T>,
    frame: RankKFrame<T>,
    /// Rows are the frame directions `bⱼᵀ`.
    directions: Matrix<T>,
    marginals: Vec<Kde1d<T>>,
    ball: RestrictionBall<T>,
    prefactor: T,
    inv_two_sigma2: T,
    sq_integral: McEstimate<T>,
    sup_estimate: T,
}

impl<T: Scalar> CandidateModel<T> {
    /// Fits the marginals of `frame` on `data` and computes `∫p̂²` and the sup
    /// estimate with streams derived from `seed`.
    pub fn fit(
        data: &DataMatrix<T>,
        frame: RankKFrame<T>,
        ball: RestrictionBall<T>,
        config: &CandidateConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        check_dims(data.cols(), &frame, &ball)?;
        if data.rows() < 10 {
            return Err(IfaError::Size(format!(
                "candidate fit needs at least 10 observations, got {}",
                data.rows()
            )));
        }
        let sigma = frame.sigma2().sqrt();
        let h = kde1d::bandwidth(sigma, data.rows())? * T::lit(config.bandwidth_scale);
        let mut marginals = Vec::with_capacity(frame.k());
        for j in 0..frame.k() {
            let b = frame.basis().column(j);
            let proj: Vec<T> = data.values().row_iter().map(|r| dot(r, &b)).collect();
            marginals.push(kde1d::fit(&proj, config.kernel, h, &config.grid)?);
        }
        Self::from_parts(data.center().to_vec(), frame, marginals, ball, config, seed)
    }

    /// Assembles a candidate from already fitted marginals.
    pub fn from_parts(
        center: Vec<T>,
        frame: RankKFrame<T>,
        marginals: Vec<Kde1d<T>>,
        ball: RestrictionBall<T>,
        config: &CandidateConfig,
        seed: u64,
    ) -> Result<Self> {
        config.mc.validate()?;
        let (d, k) = (frame.dim(), frame.k());
        check_dims(d, &frame, &ball)?;
        if center.len() != d {
            return Err(IfaError::Dimension(format!(
                "center has {} coordinates, frame has {d}",
                center.len()
            )));
        }
        if marginals.len() != k {
            return Err(IfaError::Dimension(format!(
                "{} marginals for a rank-{k} frame",
                marginals.len()
            )));
        }
        let sigma2 = frame.sigma2();
        if k < d && !(sigma2 > T::zero()) {
            return Err(IfaError::Estimation(format!(
                "rank-{k} candidate in dimension {d} needs a positive noise variance, got {sigma2}"
            )));
        }
        let (prefactor, inv_two_sigma2) = if k < d {
            let exponent = -T::of_usize(d - k) / T::lit(2.0);
            ((T::TAU() * sigma2).powf(exponent), T::one() / (T::lit(2.0) * sigma2))
        } else {
            (T::one(), T::zero())
        };
        let directions = frame.basis().transpose();
        let mut model = CandidateModel {
            center,
            frame,
            directions,
            marginals,
            ball,
            prefactor,
            inv_two_sigma2,
            sq_integral: McEstimate {
                estimate: T::zero(),
                stderr: T::zero(),
                draws: 0,
                converged: false,
            },
            sup_estimate: T::zero(),
        };

        let (sq, mc_max) = square_integral_with_max(&model, rng::derive(seed, &[label::MC_BLOCK]), &config.mc);
        if !sq.converged {
            warn!(
                "rank-{k} candidate: Monte-Carlo integral not converged after {} draws",
                sq.draws
            );
        }
        if !(sq.estimate > T::zero()) {
            return Err(IfaError::Estimation(format!(
                "rank-{k} candidate has vanishing square integral"
            )));
        }
        let mut sup = mc_max.max(model.eval(&model.center.clone()));
        if model.ball.radius().is_finite() {
            let mut probe_rng = rng::stream(seed, &[label::PROBE]);
            for _ in 0..config.probes_per_dim * d {
                let x = model.ball.sample_uniform(&mut probe_rng);
                sup = sup.max(model.eval(&x));
            }
        }
        model.sq_integral = sq;
        model.sup_estimate = sup;
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.frame.k()
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn frame(&self) -> &RankKFrame<T> {
        &self.frame
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn marginals(&self) -> &[Kde1d<T>] {
        &self.marginals
    }

    pub fn ball(&self) -> &RestrictionBall<T> {
        &self.ball
    }

    pub fn sq_integral(&self) -> McEstimate<T> {
        self.sq_integral
    }

    pub fn sup_estimate(&self) -> T {
        self.sup_estimate
    }

    /// Density at `x`; zero outside the restriction ball.
    pub fn eval(&self, x: &[T]) -> T {
        if !self.ball.contains(x) {
            return T::zero();
        }
        self.eval_unrestricted(x)
    }

    /// Density without the ball restriction.
    pub fn eval_unrestricted(&self, x: &[T]) -> T {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        let mut total_sq = T::zero();
        let mut xc = [T::zero(); 16];
        let mut heap;
        let xc: &mut [T] = if d <= xc.len() {
            &mut xc[..d]
        } else {
            heap = vec![T::zero(); d];
            &mut heap
        };
        for ((c, &xi), &m) in xc.iter_mut().zip(x).zip(&self.center) {
            *c = xi - m;
            total_sq = total_sq + *c * *c;
        }
        let mut density = self.prefactor;
        let mut proj_sq = T::zero();
        for (dir, g) in self.directions.row_iter().zip(&self.marginals) {
            let p = dot(dir, xc);
            let gv = g.eval(p);
            if gv == T::zero() {
                return T::zero();
            }
            density = density * gv;
            proj_sq = proj_sq + p * p;
        }
        if self.k() < d {
            let q = (total_sq - proj_sq).max(T::zero());
            density = density * (-q * self.inv_two_sigma2).exp();
        }
        density
    }

    /// One draw from the unrestricted candidate, written into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) {
        let d = self.dim();
        let k = self.k();
        out.copy_from_slice(&self.center);
        for (j, g) in self.marginals.iter().enumerate() {
            let y = g.sample_one(rng);
            for (o, &b) in out.iter_mut().zip(self.directions.row(j)) {
                *o = *o + b * y;
            }
        }
        if k < d {
            let sigma = self.frame.sigma2().sqrt();
            let eps: Vec<T> = (0..d)
                .map(|_| sigma * T::lit(rng.sample::<f64, _>(StandardNormal)))
                .collect();
            // (I − B Bᵀ) ε
            let mut resid = eps.clone();
            for dir in self.directions.row_iter() {
                let c = dot(dir, &eps);
                for (r, &b) in resid.iter_mut().zip(dir) {
                    *r = *r - b * c;
                }
            }
            for (o, r) in out.iter_mut().zip(resid) {
                *o = *o + r;
            }
        }
    }

    /// `count × d` draws from the unrestricted candidate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Matrix<T> {
        let d = self.dim();
        let mut data = vec![T::zero(); count * d];
        for chunk in data.chunks_exact_mut(d) {
            self.sample_into(rng, chunk);
        }
        Matrix::new(count, d, data).expect("sized")
    }
}

fn check_dims<T: Scalar>(d: usize, frame: &RankKFrame<T>, ball: &RestrictionBall<T>) -> Result<()> {
    if frame.dim() != d || ball.dim() != d {
        return Err(IfaError::Dimension(format!(
            "data dimension {d}, frame dimension {}, ball dimension {}",
            frame.dim(),
            ball.dim()
        )));
    }
    Ok(())
}

/// Fits the rank-`k` candidate on `data`: spectral frame, marginals, ball
/// from the sample, Monte-Carlo integral.
pub fn fit_candidate<T: Scalar>(
    data: &DataMatrix<T>,
    k: usize,
    config: &CandidateConfig,
    seed: u64,
) -> Result<CandidateModel<T>> {
    let d = data.cols();
    let known = config.known_sigma2.map(T::lit);
    let max_rank = if known.is_some() { d } else { d.saturating_sub(1) };
    let spec = linmodel::spectral(data)?;
    let frame = linmodel::rank_k_frame(&spec, k, max_rank, known)?;
    let ball = RestrictionBall::from_data(data, config.ball_radius_multiplier, config.ball_quantile)?;
    CandidateModel::fit(data, frame, ball, config, seed)
}

/// `∫p̂²` by Monte-Carlo with draws from `p̂`, doubling the draw count from
/// `q0` until the running mean changes by less than `tol` (relative).
pub fn mc_square_integral<T: Scalar>(
    model: &CandidateModel<T>,
    seed: u64,
    config: &McConfig,
) -> McEstimate<T> {
    square_integral_with_max(model, seed, config).0
}

/// Plain Monte-Carlo mean of `p̂(X)` over `q` draws `X ~ p̂`.
pub fn mc_square_integral_fixed<T: Scalar>(model: &CandidateModel<T>, seed: u64, q: usize) -> McEstimate<T> {
    let config = McConfig {
        q0: q,
        tol: f64::INFINITY,
        max_draws: q,
        block: 1024,
    };
    let mut acc = McAccumulator::default();
    run_blocks(model, seed, &config, q, 0, &mut acc);
    McEstimate {
        converged: true,
        ..acc.estimate()
    }
}

#[derive(Default, Clone, Copy)]
struct McAccumulator {
    n: usize,
    sum: f64,
    sum_sq: f64,
    max: f64,
}

impl McAccumulator {
    fn merge(&mut self, o: McAccumulator) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.max = self.max.max(o.max);
    }

    fn mean(&self) -> f64 {
        self.sum / self.n.max(1) as f64
    }

    fn estimate<T: Scalar>(&self) -> McEstimate<T> {
        let n = self.n.max(1) as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq / n - mean * mean) * n / (n - 1.0).max(1.0)).max(0.0);
        McEstimate {
            estimate: T::lit(mean),
            stderr: T::lit((var / n).sqrt()),
            draws: self.n,
            converged: false,
        }
    }
}

/// Draws `count` samples in blocks starting at block index `first_block`.
/// Returns the next block index.
fn run_blocks<T: Scalar>(
    model: &CandidateModel<T>,
    seed: u64,
    config: &McConfig,
    count: usize,
    first_block: usize,
    acc: &mut McAccumulator,
) -> usize {
    let nblocks = count.div_ceil(config.block);
    let partials: Vec<McAccumulator> = (first_block..first_block + nblocks)
        .into_par_iter()
        .map(|b| {
            let take = if b + 1 == first_block + nblocks {
                count - (nblocks - 1) * config.block
            } else {
                config.block
            };
            let mut rng = rng::stream(seed, &[b as u64]);
            let mut x = vec![T::zero(); model.dim()];
            let mut part = McAccumulator::default();
            for _ in 0..take {
                model.sample_into(&mut rng, &mut x);
                let v = model.eval(&x).as_f64();
                part.n += 1;
                part.sum += v;
                part.sum_sq += v * v;
                part.max = part.max.max(v);
            }
            part
        })
        .collect();
    for p in partials {
        acc.merge(p);
    }
    first_block + nblocks
}

fn square_integral_with_max<T: Scalar>(
    model: &CandidateModel<T>,
    seed: u64,
    config: &McConfig,
) -> (McEstimate<T>, T) {
    let mut acc = McAccumulator::default();
    let first = config.q0.min(config.max_draws).div_ceil(config.block) * config.block;
    let mut next_block = run_blocks(model, seed, config, first, 0, &mut acc);
    let mut converged = false;
    while acc.n < config.max_draws {
        let previous = acc.mean();
        let more = acc.n.min(config.max_draws - acc.n);
        next_block = run_blocks(model, seed, config, more, next_block, &mut acc);
        let current = acc.mean();
        if (current - previous).abs() <= config.tol * current.abs() {
            converged = true;
            break;
        }
    }
    let est = McEstimate {
        converged,
        ..acc.estimate()
    };
    (est, T::lit(acc.max))
}

/// `∫p̂² − 2p̂(x)`.
pub fn score_uk<T: Scalar>(model: &CandidateModel<T>, x: &[T]) -> T {
    model.sq_integral.estimate - T::lit(2.0) * model.eval(x)
}

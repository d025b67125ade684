//! Sample splitting and mirror-averaging aggregation of the rank candidates.
//!
//! Candidates are fitted on the training part `D₁`. Each observation `X_r` of
//! the holdout part `D₂` contributes the score vector `uₖ(X_r) = ∫p̂ₖ² − 2p̂ₖ(X_r)`;
//! the weights are the average of the softmax iterates
//!
//! ```text
//! θ̃ = (1/n₂) Σ_{ℓ=1..n₂} θ⁽ℓ⁻¹⁾,   θₖ⁽ℓ⁾ ∝ exp(−β⁻¹ Σ_{r≤ℓ} uₖ(X_r))
//! ```
//!
//! with `θ⁽⁰⁾` uniform and temperature `β = 12 L̂`.

use std::path::Path;

use log::warn;
use num_traits::Float;
use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{score_uk, CandidateConfig, CandidateModel, RestrictionBall};
use crate::linmodel::{self, DataMatrix};
use crate::matrix::Matrix;
use crate::rng::{self, label};
use crate::{IfaError, Result, Scalar};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    /// Training rows, ascending.
    pub indices1: Vec<usize>,
    /// Holdout rows in the order they enter the weight recursion.
    pub indices2: Vec<usize>,
    pub seed: u64,
}

/// `n₂ = clamp(⌊c n / √(ln n)⌋, 1, n − 1)` holdout rows drawn without
/// replacement; their draw order is the recursion order.
pub fn split(n: usize, c: f64, seed: u64) -> Result<SplitPlan> {
    if n < 4 {
        return Err(IfaError::Size(format!("sample splitting needs n >= 4, got {n}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(IfaError::Parameter(format!("split constant must be positive, got {c}")));
    }
    let raw = (c * n as f64 / (n as f64).ln().sqrt()).floor();
    let n2 = if raw.is_finite() { (raw as usize).clamp(1, n - 1) } else { n - 1 };
    let mut rng = rng::stream(seed, &[label::SPLIT]);
    let mut indices2 = index::sample(&mut rng, n, n2).into_vec();
    indices2.shuffle(&mut rng);
    let mut held = vec![false; n];
    for &i in &indices2 {
        held[i] = true;
    }
    let indices1: Vec<usize> = (0..n).filter(|&i| !held[i]).collect();
    Ok(SplitPlan {
        n,
        n1: n - n2,
        n2,
        indices1,
        indices2,
        seed,
    })
}

/// Averaged exponential-weights iterates over the columns of `scores`
/// (`M × n₂`, candidate by observation).
pub fn mirror_average<T: Scalar>(scores: &Matrix<T>, beta: T, theta0: &[T]) -> Result<Vec<T>> {
    let m = scores.rows();
    let n2 = scores.cols();
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(IfaError::Parameter(format!("temperature must be positive, got {beta}")));
    }
    if theta0.len() != m || m == 0 {
        return Err(IfaError::Dimension(format!(
            "initial weights have length {}, expected {m}",
            theta0.len()
        )));
    }
    let total: T = theta0.iter().copied().sum();
    if theta0.iter().any(|&t| !(t >= T::zero())) || Float::abs(total - T::one()) > T::lit(1e-9) {
        return Err(IfaError::Parameter("initial weights are not in the simplex".into()));
    }
    if n2 == 0 {
        return Err(IfaError::Size("no holdout observations".into()));
    }
    if !scores.is_finite() {
        return Err(IfaError::Numeric("score matrix has non-finite entries".into()));
    }

    let mut avg = theta0.to_vec();
    let mut cum = vec![T::zero(); m];
    let mut w = vec![T::zero(); m];
    for l in 1..n2 {
        for (k, c) in cum.iter_mut().enumerate() {
            *c = *c + scores[(k, l - 1)];
        }
        let best = cum.iter().copied().fold(T::infinity(), T::min);
        let mut z = T::zero();
        for (wk, &c) in w.iter_mut().zip(&cum) {
            *wk = (-(c - best) / beta).exp();
            z = z + *wk;
        }
        for (a, &wk) in avg.iter_mut().zip(&w) {
            *a = *a + wk / z;
        }
    }
    let count = T::of_usize(n2);
    Ok(avg.into_iter().map(|a| a / count).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateConfig {
    pub candidate: CandidateConfig,
    /// Constant `c` in `n₂ = ⌊c n / √(ln n)⌋`.
    pub split_c: f64,
    pub seed: u64,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig {
            candidate: CandidateConfig::default(),
            split_c: 1.0,
            seed: 0,
        }
    }
}

/// `θ̃ᵀ H(x)`: convex combination of the candidates restricted to the ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AggregateDensity<T> {
    candidates: Vec<CandidateModel<T>>,
    weights: Vec<T>,
    beta: T,
    l0: T,
    ball: RestrictionBall<T>,
    n1: usize,
    n2: usize,
    seed: u64,
}

impl<T: Scalar> AggregateDensity<T> {
    /// Aggregates fitted candidates with holdout points given as rows of
    /// `holdout` (in recursion order). `beta` defaults to `12·max(L₀, maxₖ supₖ)`
    /// with `L₀ = (2π σ̂²)^(−d/2)` for the noise variance of the highest-rank
    /// candidate.
    pub fn from_candidates(
        candidates: Vec<CandidateModel<T>>,
        holdout: &Matrix<T>,
        beta: Option<T>,
        n1: usize,
        seed: u64,
    ) -> Result<Self> {
        let first = candidates
            .first()
            .ok_or_else(|| IfaError::Estimation("no candidate densities".into()))?;
        let d = first.dim();
        let ball = first.ball().clone();
        if candidates.iter().any(|c| c.dim() != d || c.ball() != &ball) {
            return Err(IfaError::Dimension(
                "candidates must share dimension and restriction ball".into(),
            ));
        }
        if holdout.cols() != d {
            return Err(IfaError::Dimension(format!(
                "holdout points have dimension {}, expected {d}",
                holdout.cols()
            )));
        }
        let top = candidates.iter().max_by_key(|c| c.k()).expect("nonempty");
        let l0 = (T::TAU() * top.frame().sigma2()).powf(-T::of_usize(d) / T::lit(2.0));
        let beta = match beta {
            Some(b) => b,
            None => {
                let sup = candidates
                    .iter()
                    .map(|c| c.sup_estimate())
                    .fold(T::zero(), T::max);
                let l = if l0.is_finite() { l0.max(sup) } else { sup };
                T::lit(12.0) * l
            }
        };
        let scores = score_matrix(&candidates, holdout);
        let m = candidates.len();
        let theta0 = vec![T::one() / T::of_usize(m); m];
        let weights = mirror_average(&scores, beta, &theta0)?;
        Ok(AggregateDensity {
            candidates,
            weights,
            beta,
            l0,
            ball,
            n1,
            n2: holdout.rows(),
            seed,
        })
    }

    /// Replaces the weights (must lie in the simplex).
    pub fn with_weights(mut self, weights: Vec<T>) -> Result<Self> {
        let sum: T = weights.iter().copied().sum();
        if weights.len() != self.candidates.len()
            || weights.iter().any(|&w| !(w >= T::zero()))
            || Float::abs(sum - T::one()) > T::lit(1e-9)
        {
            return Err(IfaError::Parameter("weights are not in the simplex".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.ball.dim()
    }

    pub fn candidates(&self) -> &[CandidateModel<T>] {
        &self.candidates
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn l0(&self) -> T {
        self.l0
    }

    pub fn ball(&self) -> &RestrictionBall<T> {
        &self.ball
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn eval(&self, x: &[T]) -> T {
        if !self.ball.contains(x) {
            return T::zero();
        }
        self.candidates
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > T::zero())
            .fold(T::zero(), |acc, (c, &w)| acc + w * c.eval_unrestricted(x))
    }

    pub fn eval_batch(&self, points: &Matrix<T>) -> Vec<T> {
        let rows: Vec<&[T]> = points.row_iter().collect();
        rows.par_iter().map(|x| self.eval(x)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            scalar: std::any::type_name::<T>().to_string(),
            model: self.clone(),
        };
        serde_json::to_string(&doc).map_err(|e| IfaError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument<T> =
            serde_json::from_str(text).map_err(|e| IfaError::Format(e.to_string()))?;
        if doc.format != FORMAT_NAME {
            return Err(IfaError::Format(format!("not a model document: '{}'", doc.format)));
        }
        if doc.version != FORMAT_VERSION {
            return Err(IfaError::Format(format!(
                "unsupported model version {} (expected {FORMAT_VERSION})",
                doc.version
            )));
        }
        if doc.scalar != std::any::type_name::<T>() {
            return Err(IfaError::Format(format!(
                "model stores {} values, requested {}",
                doc.scalar,
                std::any::type_name::<T>()
            )));
        }
        Ok(doc.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| IfaError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| IfaError::io(path, e))?;
        Self::from_json(&text)
    }
}

pub const FORMAT_NAME: &str = "noisy-ifa/aggregate-density";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ModelDocument<T> {
    format: String,
    version: u32,
    scalar: String,
    model: AggregateDensity<T>,
}

/// `uₖ(X_r)` for every candidate `k` (rows) and holdout row `r` (columns).
pub fn score_matrix<T: Scalar>(candidates: &[CandidateModel<T>], holdout: &Matrix<T>) -> Matrix<T> {
    let n2 = holdout.rows();
    let rows: Vec<Vec<T>> = candidates
        .par_iter()
        .map(|c| holdout.row_iter().map(|x| score_uk(c, x)).collect())
        .collect();
    let mut out = Matrix::zeros(candidates.len(), n2);
    for (k, r) in rows.into_iter().enumerate() {
        out.row_mut(k).copy_from_slice(&r);
    }
    out
}

/// Fits candidates of rank `1..=max_rank` on a random training part of
/// `data` and aggregates them on the holdout part.
///
/// `max_rank` defaults to `d − 1`, or `d` when the noise variance is known.
pub fn fit_aggregate<T: Scalar>(
    data: &DataMatrix<T>,
    max_rank: Option<usize>,
    config: &AggregateConfig,
) -> Result<AggregateDensity<T>> {
    config.candidate.validate()?;
    let d = data.cols();
    let known = config.candidate.known_sigma2.map(T::lit);
    let max_rank = max_rank.unwrap_or(if known.is_some() { d } else { d.saturating_sub(1) });
    if max_rank == 0 {
        return Err(IfaError::Config(format!(
            "no candidate ranks available in dimension {d} without a known noise variance"
        )));
    }
    if max_rank > d || (max_rank == d && known.is_none()) {
        return Err(IfaError::Config(format!(
            "upper bound M = {max_rank} needs M < d = {d} unless the noise variance is known"
        )));
    }

    let plan = split(data.rows(), config.split_c, config.seed)?;
    let train = data.subset(&plan.indices1)?;
    let raw = data.to_raw();
    let holdout = raw.select_rows(&plan.indices2);

    let spec = linmodel::spectral(&train)?;
    let ball = RestrictionBall::from_data(
        &train,
        config.candidate.ball_radius_multiplier,
        config.candidate.ball_quantile,
    )?;

    let fitted: Vec<(usize, Result<CandidateModel<T>>)> = (1..=max_rank)
        .into_par_iter()
        .map(|k| {
            let fit = linmodel::rank_k_frame(&spec, k, max_rank, known).and_then(|frame| {
                CandidateModel::fit(
                    &train,
                    frame,
                    ball.clone(),
                    &config.candidate,
                    rng::derive(config.seed, &[label::CANDIDATE, k as u64]),
                )
            });
            (k, fit)
        })
        .collect();

    let mut candidates = Vec::with_capacity(max_rank);
    let mut last_err = None;
    for (k, fit) in fitted {
        match fit {
            Ok(c) => candidates.push(c),
            Err(e) => {
                warn!("rank-{k} candidate dropped: {e}");
                last_err = Some(e);
            }
        }
    }
    if candidates.is_empty() {
        return Err(IfaError::Estimation(format!(
            "every candidate failed to fit{}",
            last_err.map(|e| format!(" (last error: {e})")).unwrap_or_default()
        )));
    }
    AggregateDensity::from_candidates(candidates, &holdout, None, plan.n1, config.seed)
}

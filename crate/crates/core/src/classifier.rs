//! Plug-in classifier over per-class aggregate densities, and a pooled
//! covariance LDA baseline.

use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregator::{fit_aggregate, AggregateConfig, AggregateDensity};
use crate::linmodel::{self, DataMatrix};
use crate::matrix::{cholesky, cholesky_solve, dot, Matrix};
use crate::rng::{self, label};
use crate::{IfaError, Result, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub aggregate: AggregateConfig,
    /// Per-class upper rank bound; `None` uses the aggregator default.
    pub max_rank: Option<usize>,
    pub min_class_size: usize,
    /// Class priors; `None` uses the empirical class proportions.
    pub priors: Option<Vec<f64>>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            aggregate: AggregateConfig::default(),
            max_rank: None,
            min_class_size: 50,
            priors: None,
        }
    }
}

fn validate_priors(priors: &[f64], classes: usize) -> Result<()> {
    if priors.len() != classes {
        return Err(IfaError::Config(format!(
            "{} priors given for {classes} classes",
            priors.len()
        )));
    }
    let sum: f64 = priors.iter().sum();
    if priors.iter().any(|&p| !(p > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(IfaError::Config(format!(
            "priors must be positive and sum to 1, got {priors:?}"
        )));
    }
    Ok(())
}

fn empirical_priors(sizes: &[usize]) -> Vec<f64> {
    let total: usize = sizes.iter().sum();
    sizes.iter().map(|&s| s as f64 / total as f64).collect()
}

/// Index of the largest score; ties go to the smallest index. When every score
/// is zero the class with the largest prior wins.
fn decide<T: Scalar>(scores: &[T], priors: &[T]) -> usize {
    let mut best = 0;
    for (j, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = j;
        }
    }
    if scores[best] > T::zero() {
        return best;
    }
    let mut best = 0;
    for (j, &p) in priors.iter().enumerate().skip(1) {
        if p > priors[best] {
            best = j;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassifierModel<T> {
    densities: Vec<AggregateDensity<T>>,
    priors: Vec<T>,
}

impl<T: Scalar> ClassifierModel<T> {
    /// Builds a classifier from already fitted class densities.
    pub fn from_parts(densities: Vec<AggregateDensity<T>>, priors: Vec<f64>) -> Result<Self> {
        if densities.len() < 2 {
            return Err(IfaError::Config("a classifier needs at least two classes".into()));
        }
        validate_priors(&priors, densities.len())?;
        let d = densities[0].dim();
        if densities.iter().any(|f| f.dim() != d) {
            return Err(IfaError::Dimension("class densities differ in dimension".into()));
        }
        Ok(ClassifierModel {
            densities,
            priors: priors.into_iter().map(T::lit).collect(),
        })
    }

    pub fn classes(&self) -> usize {
        self.densities.len()
    }

    pub fn dim(&self) -> usize {
        self.densities[0].dim()
    }

    pub fn densities(&self) -> &[AggregateDensity<T>] {
        &self.densities
    }

    pub fn priors(&self) -> &[T] {
        &self.priors
    }

    /// `πⱼ f̂ⱼ(x)` for every class.
    pub fn scores(&self, x: &[T]) -> Vec<T> {
        self.densities
            .iter()
            .zip(&self.priors)
            .map(|(f, &p)| p * f.eval(x))
            .collect()
    }

    /// `ln πⱼ + ln f̂ⱼ(x)`; `-inf` where the density vanishes.
    pub fn log_scores(&self, x: &[T]) -> Vec<T> {
        self.scores(x).into_iter().map(|s| s.ln()).collect()
    }

    pub fn predict(&self, x: &[T]) -> usize {
        decide(&self.scores(x), &self.priors)
    }

    pub fn predict_batch(&self, points: &Matrix<T>) -> Vec<usize> {
        let rows: Vec<&[T]> = points.row_iter().collect();
        rows.par_iter().map(|x| self.predict(x)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ClassifierDocument {
            format: CLASSIFIER_FORMAT.to_string(),
            version: CLASSIFIER_VERSION,
            scalar: std::any::type_name::<T>().to_string(),
            model: self.clone(),
        };
        serde_json::to_string(&doc).map_err(|e| IfaError::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ClassifierDocument<T> =
            serde_json::from_str(text).map_err(|e| IfaError::Format(e.to_string()))?;
        if doc.format != CLASSIFIER_FORMAT || doc.version != CLASSIFIER_VERSION {
            return Err(IfaError::Format(format!(
                "expected {CLASSIFIER_FORMAT} version {CLASSIFIER_VERSION}, found {} version {}",
                doc.format, doc.version
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

pub const CLASSIFIER_FORMAT: &str = "noisy-ifa/classifier";
pub const CLASSIFIER_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct ClassifierDocument<T> {
    format: String,
    version: u32,
    scalar: String,
    model: ClassifierModel<T>,
}

/// Fits one aggregate density per class. Class `j` uses seed
/// `derive(seed, [CLASS, j])`.
pub fn fit_classifier<T: Scalar>(
    classes: &[DataMatrix<T>],
    config: &ClassifierConfig,
) -> Result<ClassifierModel<T>> {
    if classes.len() < 2 {
        return Err(IfaError::Config("a classifier needs at least two classes".into()));
    }
    for (j, c) in classes.iter().enumerate() {
        if c.rows() < config.min_class_size.max(4) {
            return Err(IfaError::Size(format!(
                "class {j} has {} training observations, at least {} required",
                c.rows(),
                config.min_class_size.max(4)
            )));
        }
    }
    let sizes: Vec<usize> = classes.iter().map(|c| c.rows()).collect();
    let priors = match &config.priors {
        Some(p) => p.clone(),
        None => empirical_priors(&sizes),
    };
    validate_priors(&priors, classes.len())?;

    let densities = classes
        .par_iter()
        .enumerate()
        .map(|(j, c)| {
            let mut cfg = config.aggregate.clone();
            cfg.seed = rng::derive(config.aggregate.seed, &[label::CLASS, j as u64]);
            fit_aggregate(c, config.max_rank, &cfg)
                .map_err(|e| IfaError::Estimation(format!("class {j}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    ClassifierModel::from_parts(densities, priors)
}

/// Fraction of wrongly predicted labels. Labels outside `0..classes` always
/// count as errors.
pub fn misclassification_rate(predicted: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    if truth.is_empty() {
        return Err(IfaError::Size("empty test set".into()));
    }
    if predicted.len() != truth.len() {
        return Err(IfaError::Dimension(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let unseen = truth.iter().filter(|&&t| t >= classes).count();
    if unseen > 0 {
        warn!("{unseen} test labels are not among the {classes} training classes");
    }
    let wrong = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / truth.len() as f64)
}

/// Pooled-covariance linear discriminant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LdaModel<T> {
    means: Vec<Vec<T>>,
    covariance: Matrix<T>,
    priors: Vec<T>,
    chol: Matrix<T>,
    /// `Σ⁻¹ μⱼ` per class.
    directions: Vec<Vec<T>>,
    offsets: Vec<T>,
}

impl<T: Scalar> LdaModel<T> {
    /// Fits on uncentered class samples given as matrices of rows.
    pub fn fit(classes: &[Matrix<T>], priors: Option<&[f64]>) -> Result<Self> {
        let j = classes.len();
        if j < 2 {
            return Err(IfaError::Config("LDA needs at least two classes".into()));
        }
        let d = classes[0].cols();
        if classes.iter().any(|c| c.cols() != d || c.rows() == 0) {
            return Err(IfaError::Dimension("LDA classes must be nonempty and share dimension".into()));
        }
        let total: usize = classes.iter().map(|c| c.rows()).sum();
        if total <= j {
            return Err(IfaError::Size("LDA needs more observations than classes".into()));
        }
        let sizes: Vec<usize> = classes.iter().map(|c| c.rows()).collect();
        let priors = match priors {
            Some(p) => p.to_vec(),
            None => empirical_priors(&sizes),
        };
        validate_priors(&priors, j)?;

        let mut means = Vec::with_capacity(j);
        let mut cov = Matrix::<T>::zeros(d, d);
        for c in classes {
            let mut mu = vec![T::zero(); d];
            for r in c.row_iter() {
                for (m, &v) in mu.iter_mut().zip(r) {
                    *m = *m + v;
                }
            }
            let inv = T::one() / T::of_usize(c.rows());
            mu.iter_mut().for_each(|m| *m = *m * inv);
            for r in c.row_iter() {
                for a in 0..d {
                    let da = r[a] - mu[a];
                    for b in 0..=a {
                        cov[(a, b)] = cov[(a, b)] + da * (r[b] - mu[b]);
                    }
                }
            }
            means.push(mu);
        }
        let denom = T::of_usize(total - j);
        for a in 0..d {
            for b in 0..=a {
                let v = cov[(a, b)] / denom;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let chol = match cholesky(&cov) {
            Some(l) => l,
            None => {
                let trace: T = (0..d).map(|a| cov[(a, a)]).sum();
                let mut eps = T::lit(1e-8) * trace / T::of_usize(d);
                if !(eps > T::zero()) {
                    eps = T::lit(1e-8);
                }
                warn!("singular pooled covariance regularised by {eps} on the diagonal");
                let mut reg = cov.clone();
                for a in 0..d {
                    reg[(a, a)] = reg[(a, a)] + eps;
                }
                cholesky(&reg).ok_or_else(|| {
                    IfaError::Numeric("pooled covariance is not positive definite".into())
                })?
            }
        };
        let priors: Vec<T> = priors.into_iter().map(T::lit).collect();
        let directions: Vec<Vec<T>> = means.iter().map(|m| cholesky_solve(&chol, m)).collect();
        let offsets = means
            .iter()
            .zip(&directions)
            .zip(&priors)
            .map(|((m, w), &p)| p.ln() - dot(m, w) / T::lit(2.0))
            .collect();
        Ok(LdaModel {
            means,
            covariance: cov,
            priors,
            chol,
            directions,
            offsets,
        })
    }

    pub fn means(&self) -> &[Vec<T>] {
        &self.means
    }

    pub fn covariance(&self) -> &Matrix<T> {
        &self.covariance
    }

    pub fn priors(&self) -> &[T] {
        &self.priors
    }

    /// Linear discriminant `xᵀΣ⁻¹μⱼ − μⱼᵀΣ⁻¹μⱼ/2 + ln πⱼ` per class.
    pub fn discriminants(&self, x: &[T]) -> Vec<T> {
        self.directions
            .iter()
            .zip(&self.offsets)
            .map(|(w, &o)| dot(x, w) + o)
            .collect()
    }

    pub fn predict(&self, x: &[T]) -> usize {
        let s = self.discriminants(x);
        let mut best = 0;
        for j in 1..s.len() {
            if s[j] > s[best] {
                best = j;
            }
        }
        best
    }

    pub fn predict_batch(&self, points: &Matrix<T>) -> Vec<usize> {
        points.row_iter().map(|x| self.predict(x)).collect()
    }

    /// Cholesky factor of the (possibly regularised) pooled covariance.
    pub fn cholesky_factor(&self) -> &Matrix<T> {
        &self.chol
    }
}

/// Splits row indices per label so that each class contributes
/// `round(train_fraction · Nⱼ)` rows to the training part.
pub fn stratified_split(
    labels: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(IfaError::Parameter(format!(
            "training fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut rng = rng::stream(seed, &[label::SPLIT]);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for j in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == j).collect();
        idx.shuffle(&mut rng);
        let cut = (train_fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..cut]);
        test.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Groups rows by label into `classes` matrices.
pub fn group_by_label<T: Scalar>(
    points: &Matrix<T>,
    labels: &[usize],
    classes: usize,
) -> Result<Vec<Matrix<T>>> {
    if points.rows() != labels.len() {
        return Err(IfaError::Dimension(format!(
            "{} rows but {} labels",
            points.rows(),
            labels.len()
        )));
    }
    (0..classes)
        .map(|j| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == j).collect();
            if idx.is_empty() {
                return Err(IfaError::Size(format!("class {j} has no observations")));
            }
            Ok(points.select_rows(&idx))
        })
        .collect()
}

/// Centers each class sample.
pub fn center_classes<T: Scalar>(groups: Vec<Matrix<T>>) -> Result<Vec<DataMatrix<T>>> {
    groups.into_iter().map(linmodel::center).collect()
}

/// Test error of the plug-in rule and of LDA on one stratified split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub split: usize,
    pub plugin_rate: f64,
    pub lda_rate: f64,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Repeats a stratified `train_fraction` split `splits` times; split `s` uses
/// seed `derive(seed, [SPLIT, s])` for both the partition and the fit.
pub fn split_experiment<T: Scalar>(
    points: &Matrix<T>,
    labels: &[usize],
    splits: usize,
    train_fraction: f64,
    config: &ClassifierConfig,
    seed: u64,
) -> Result<Vec<SplitOutcome>> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(IfaError::Config("split experiment needs at least two classes".into()));
    }
    (0..splits)
        .map(|s| {
            let sseed = rng::derive(seed, &[label::SPLIT, s as u64]);
            let (tr, te) = stratified_split(labels, train_fraction, sseed)?;
            let tr_labels: Vec<usize> = tr.iter().map(|&i| labels[i]).collect();
            let te_labels: Vec<usize> = te.iter().map(|&i| labels[i]).collect();
            let groups = group_by_label(&points.select_rows(&tr), &tr_labels, classes)?;
            let test = points.select_rows(&te);

            let lda = LdaModel::fit(&groups, config.priors.as_deref())?;
            let lda_rate = misclassification_rate(&lda.predict_batch(&test), &te_labels, classes)?;

            let mut cfg = config.clone();
            cfg.aggregate.seed = sseed;
            let model = fit_classifier(&center_classes(groups)?, &cfg)?;
            let plugin_rate = misclassification_rate(&model.predict_batch(&test), &te_labels, classes)?;
            Ok(SplitOutcome {
                split: s,
                plugin_rate,
                lda_rate,
                train_rows: tr.len(),
                test_rows: te.len(),
            })
        })
        .collect()
}

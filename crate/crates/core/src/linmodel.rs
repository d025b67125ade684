//! Centering, the spectral decomposition of the sample covariance, the
//! noise-variance estimate and rank-`k` projection frames.
//!
//! The decomposition is computed from the centered `n × d` data matrix by a
//! one-sided Jacobi SVD: `D V = U Σ`, so the eigenvalues of `(1/n) DᵀD` are
//! `σᵢ² / n` and its eigenvectors are the columns of `V`. The cross-product
//! matrix is never formed.

use log::warn;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::matrix::{dot, Matrix};
use crate::{IfaError, Result, Scalar};

/// Centered observations together with the offset that was removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DataMatrix<T> {
    values: Matrix<T>,
    center: Vec<T>,
}

impl<T: Scalar> DataMatrix<T> {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    /// Centered values.
    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    /// Column means of the raw data.
    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.values.row(i)
    }

    /// Row `i` in the original (uncentered) coordinates.
    pub fn raw_row(&self, i: usize) -> Vec<T> {
        self.values
            .row(i)
            .iter()
            .zip(&self.center)
            .map(|(&v, &c)| v + c)
            .collect()
    }

    pub fn to_raw(&self) -> Matrix<T> {
        let mut raw = self.values.clone();
        for i in 0..raw.rows() {
            for (v, &c) in raw.row_mut(i).iter_mut().zip(&self.center) {
                *v = *v + c;
            }
        }
        raw
    }

    /// The rows `idx`, re-centered on their own mean.
    pub fn subset(&self, idx: &[usize]) -> Result<DataMatrix<T>> {
        center(self.to_raw().select_rows(idx))
    }
}

/// Subtracts the column means.
pub fn center<T: Scalar>(raw: Matrix<T>) -> Result<DataMatrix<T>> {
    let (n, d) = (raw.rows(), raw.cols());
    if n < 2 {
        return Err(IfaError::Dimension(format!(
            "need at least 2 observations, got {n}"
        )));
    }
    if d < 1 {
        return Err(IfaError::Dimension("observations have no coordinates".into()));
    }
    let mut values = raw;
    let mut center = vec![T::zero(); d];
    // second pass removes the rounding residue of the first
    for _ in 0..2 {
        let mut mean = vec![T::zero(); d];
        for r in values.row_iter() {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m = *m + v;
            }
        }
        let inv_n = T::one() / T::of_usize(n);
        for m in mean.iter_mut() {
            *m = *m * inv_n;
        }
        for i in 0..n {
            for (v, &m) in values.row_mut(i).iter_mut().zip(&mean) {
                *v = *v - m;
            }
        }
        for (c, m) in center.iter_mut().zip(mean) {
            *c = *c + m;
        }
    }
    Ok(DataMatrix { values, center })
}

/// Eigen-decomposition of the sample covariance `(1/n) DᵀD`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SpectralDecomposition<T> {
    eigenvalues: Vec<T>,
    eigenvectors: Matrix<T>,
}

impl<T: Scalar> SpectralDecomposition<T> {
    /// Assembles a decomposition from precomputed parts. Eigenvalues must be
    /// non-increasing and the eigenvector matrix square with matching size.
    pub fn from_parts(eigenvalues: Vec<T>, eigenvectors: Matrix<T>) -> Result<Self> {
        let d = eigenvalues.len();
        if eigenvectors.rows() != d || eigenvectors.cols() != d {
            return Err(IfaError::Dimension(format!(
                "{d} eigenvalues but a {}x{} eigenvector matrix",
                eigenvectors.rows(),
                eigenvectors.cols()
            )));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(IfaError::Parameter(
                "eigenvalues must be sorted in decreasing order".into(),
            ));
        }
        Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Columns are eigenvectors, ordered like [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &Matrix<T> {
        &self.eigenvectors
    }

    /// `V diag(λ) Vᵀ`.
    pub fn covariance(&self) -> Matrix<T> {
        let d = self.dim();
        let mut c = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut s = T::zero();
                for (l, &lam) in self.eigenvalues.iter().enumerate() {
                    s = s + self.eigenvectors[(i, l)] * lam * self.eigenvectors[(j, l)];
                }
                c[(i, j)] = s;
            }
        }
        c
    }
}

const MAX_SWEEPS: usize = 100;

/// Spectral decomposition of the sample covariance of centered data.
///
/// Eigenvectors are sign-normalised so that the entry of largest magnitude is
/// positive.
pub fn spectral<T: Scalar>(data: &DataMatrix<T>) -> Result<SpectralDecomposition<T>> {
    let x = data.values();
    if !x.is_finite() {
        return Err(IfaError::Numeric("data contain non-finite entries".into()));
    }
    let (n, d) = (x.rows(), x.cols());
    let mut cols: Vec<Vec<T>> = (0..d).map(|j| x.column(j)).collect();
    let mut v = Matrix::<T>::identity(d);
    let tol = T::epsilon() * T::of_usize(n.max(d)).sqrt() * T::lit(4.0);

    let mut converged = d < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if Float::abs(gamma) <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (Float::abs(zeta) + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (a, b) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (ap, bq) = (*a, *b);
                    *a = c * ap - s * bq;
                    *b = s * ap + c * bq;
                }
                for i in 0..d {
                    let (ap, bq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * ap - s * bq;
                    v[(i, q)] = s * ap + c * bq;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        warn!("Jacobi SVD did not converge in {MAX_SWEEPS} sweeps");
    }

    let inv_n = T::one() / T::of_usize(n);
    let raw_eigs: Vec<T> = cols.iter().map(|c| dot(c, c) * inv_n).collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| raw_eigs[b].partial_cmp(&raw_eigs[a]).expect("finite"));

    let mut eigenvectors = Matrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<T> = (0..d).map(|i| v[(i, src)]).collect();
        let lead = col
            .iter()
            .copied()
            .fold(T::zero(), |best, e| if Float::abs(e) > Float::abs(best) { e } else { best });
        if lead < T::zero() {
            col.iter_mut().for_each(|e| *e = -*e);
        }
        for (i, e) in col.into_iter().enumerate() {
            eigenvectors[(i, dst)] = e;
        }
    }
    let eigenvalues: Vec<T> = order.iter().map(|&j| raw_eigs[j]).collect();

    if let Some(&top) = eigenvalues.first() {
        let gap_tol = top * T::lit(1e-8);
        for (i, w) in eigenvalues.windows(2).enumerate() {
            if top > T::zero() && w[0] - w[1] < gap_tol {
                warn!(
                    "eigenvalues {} and {} are nearly tied ({} vs {})",
                    i + 1,
                    i + 2,
                    w[0],
                    w[1]
                );
            }
        }
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Noise variance as the mean of the `d − k` smallest eigenvalues.
pub fn estimate_sigma2<T: Scalar>(
    spec: &SpectralDecomposition<T>,
    k: usize,
    max_rank: usize,
) -> Result<T> {
    let d = spec.dim();
    if k == 0 || k >= d {
        return Err(IfaError::Rank { k, d });
    }
    if k > max_rank {
        return Err(IfaError::Config(format!(
            "rank {k} exceeds the upper bound {max_rank}"
        )));
    }
    let tail = &spec.eigenvalues()[k..];
    let mean = tail.iter().copied().sum::<T>() / T::of_usize(tail.len());
    if mean < T::zero() {
        warn!("negative noise variance estimate {mean} clamped to 0");
        return Ok(T::zero());
    }
    Ok(mean)
}

/// A rank-`k` candidate frame: orthonormal `d × k` basis and noise variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RankKFrame<T> {
    k: usize,
    basis: Matrix<T>,
    sigma2: T,
}

pub(crate) fn orthonormal_tolerance<T: Scalar>() -> T {
    T::lit(1e-8).max(T::epsilon().sqrt() * T::lit(10.0))
}

impl<T: Scalar> RankKFrame<T> {
    /// A frame from a known basis and noise variance (e.g. the true mixing
    /// matrix). The basis must have orthonormal columns.
    pub fn new(basis: Matrix<T>, sigma2: T) -> Result<Self> {
        let (d, k) = (basis.rows(), basis.cols());
        if k == 0 || k > d {
            return Err(IfaError::Rank { k, d });
        }
        if !(sigma2 >= T::zero()) || !sigma2.is_finite() {
            return Err(IfaError::Parameter(format!(
                "noise variance must be finite and nonnegative, got {sigma2}"
            )));
        }
        let defect = basis.orthonormality_defect();
        if defect > orthonormal_tolerance() {
            return Err(IfaError::Parameter(format!(
                "basis columns are not orthonormal (defect {defect})"
            )));
        }
        Ok(RankKFrame { k, basis, sigma2 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn basis(&self) -> &Matrix<T> {
        &self.basis
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    /// Coordinates `Bᵀx` of a (centered) point.
    pub fn project(&self, x: &[T]) -> Vec<T> {
        self.basis.tr_mul_vec(x)
    }
}

/// Frame spanned by the leading `k` eigenvectors.
///
/// The noise variance is `known_sigma2` when supplied, otherwise the tail
/// eigenvalue mean, which requires `k < d`. An upper bound `max_rank = d` is
/// only accepted together with a known variance.
pub fn rank_k_frame<T: Scalar>(
    spec: &SpectralDecomposition<T>,
    k: usize,
    max_rank: usize,
    known_sigma2: Option<T>,
) -> Result<RankKFrame<T>> {
    let d = spec.dim();
    if k == 0 || k > d {
        return Err(IfaError::Rank { k, d });
    }
    if k > max_rank {
        return Err(IfaError::Config(format!(
            "rank {k} exceeds the upper bound {max_rank}"
        )));
    }
    if max_rank >= d && known_sigma2.is_none() {
        return Err(IfaError::Config(format!(
            "upper bound M = {max_rank} needs M < d = {d} unless the noise variance is known"
        )));
    }
    let sigma2 = match known_sigma2 {
        Some(s) => s,
        None => estimate_sigma2(spec, k, max_rank)?,
    };
    Ok(RankKFrame {
        k,
        basis: spec.eigenvectors().leading_columns(k),
        sigma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn data(rows: &[[f64; 2]]) -> DataMatrix<f64> {
        center(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn centering_examples() {
        let dm = data(&[[0.0, 0.0], [2.0, 4.0]]);
        assert_eq!(dm.values().as_slice(), &[-1.0, -2.0, 1.0, 2.0]);
        assert_eq!(dm.center(), &[1.0, 2.0]);

        let zero_mean = data(&[[1.0, -2.0], [-1.0, 2.0]]);
        assert_eq!(zero_mean.values().as_slice(), &[1.0, -2.0, -1.0, 2.0]);
        assert_eq!(zero_mean.center(), &[0.0, 0.0]);

        let constant = data(&[[3.5, -1.25], [3.5, -1.25], [3.5, -1.25]]);
        assert!(constant.values().as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(constant.center(), &[3.5, -1.25]);
    }

    #[test]
    fn centering_needs_two_rows() {
        let one = Matrix::<f64>::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(center(one), Err(IfaError::Dimension(_))));
    }

    #[test]
    fn centered_columns_have_zero_mean() {
        let mut rng = crate::rng::stream(3, &[]);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| (0..4).map(|j| 1e3 * j as f64 + rng.random::<f64>()).collect())
            .collect();
        let dm = center(Matrix::from_rows(&rows).unwrap()).unwrap();
        for j in 0..4 {
            let mean: f64 = dm.values().column(j).iter().sum::<f64>() / 500.0;
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn isotropic_covariance_gives_unit_eigenvalues() {
        let d = 3;
        let s = (d as f64).sqrt();
        let mut rows = Vec::new();
        for i in 0..d {
            let mut r = vec![0.0; d];
            r[i] = s;
            rows.push(r.clone());
            r[i] = -s;
            rows.push(r);
        }
        let spec = spectral(&center(Matrix::from_rows(&rows).unwrap()).unwrap()).unwrap();
        for &l in spec.eigenvalues() {
            assert!((l - 1.0).abs() < 1e-12);
        }
        assert!(spec.eigenvectors().orthonormality_defect() < 1e-8);
    }

    #[test]
    fn rank_one_data() {
        let u = [3.0, -4.0, 12.0];
        let rows: Vec<Vec<f64>> = [-2.0, -1.0, 0.5, 1.0, 1.5]
            .iter()
            .map(|t| u.iter().map(|x| x * t).collect())
            .collect();
        let spec = spectral(&center(Matrix::from_rows(&rows).unwrap()).unwrap()).unwrap();
        let e = spec.eigenvalues();
        assert!(e[0] > 1.0);
        assert!(e[1].abs() < 1e-10 * e[0] && e[2].abs() < 1e-10 * e[0]);
        let v0 = spec.eigenvectors().column(0);
        let norm_u = 13.0;
        for (a, b) in v0.iter().zip(u) {
            assert!((a - b / norm_u).abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_sample_eigenvalues() {
        let mut rng = crate::rng::stream(11, &[]);
        let rows: Vec<[f64; 2]> = (0..5000)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                [2.0 * a, b]
            })
            .collect();
        let dm = center(Matrix::from_rows(&rows).unwrap()).unwrap();
        let spec = spectral(&dm).unwrap();
        let e = spec.eigenvalues();
        assert!((e[0] / 4.0 - 1.0).abs() < 0.1, "{e:?}");
        assert!((e[1] - 1.0).abs() < 0.1, "{e:?}");

        // reconstruction of the sample covariance
        let x = dm.values();
        let direct = x.transpose().matmul(x).unwrap();
        let rebuilt = spec.covariance();
        for i in 0..2 {
            for j in 0..2 {
                let c = direct[(i, j)] / 5000.0;
                assert!((c - rebuilt[(i, j)]).abs() < 1e-6 * e[0]);
            }
        }
    }

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let mut rng = crate::rng::stream(5, &[]);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|j| (j as f64 + 1.0) * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let spec = spectral(&center(Matrix::from_rows(&rows).unwrap()).unwrap()).unwrap();
        for j in 0..4 {
            let col = spec.eigenvectors().column(j);
            let lead = col.iter().copied().fold(0.0f64, |b, e| if e.abs() > b.abs() { e } else { b });
            assert!(lead > 0.0);
        }
    }

    #[test]
    fn non_finite_data_rejected() {
        let dm = DataMatrix {
            values: Matrix::from_rows(&[[f64::NAN, 0.0], [0.0, 1.0]]).unwrap(),
            center: vec![0.0, 0.0],
        };
        assert!(matches!(spectral(&dm), Err(IfaError::Numeric(_))));
    }

    fn diag_spec(eigs: &[f64]) -> SpectralDecomposition<f64> {
        SpectralDecomposition::from_parts(eigs.to_vec(), Matrix::identity(eigs.len())).unwrap()
    }

    #[test]
    fn sigma2_examples() {
        let spec = diag_spec(&[5.0, 3.0, 1.0, 1.0, 1.0]);
        assert_eq!(estimate_sigma2(&spec, 2, 4).unwrap(), 1.0);
        let iso = diag_spec(&[0.7; 4]);
        for k in 1..4 {
            assert!((estimate_sigma2(&iso, k, 3).unwrap() - 0.7).abs() < 1e-15);
        }
        assert!(matches!(
            estimate_sigma2(&spec, 5, 5),
            Err(IfaError::Rank { k: 5, d: 5 })
        ));
        let negative = diag_spec(&[1.0, -1e-17, -2e-17]);
        assert_eq!(estimate_sigma2(&negative, 1, 2).unwrap(), 0.0);
    }

    #[test]
    fn frame_examples() {
        let iso = diag_spec(&[2.0; 3]);
        let f = rank_k_frame(&iso, 1, 2, None).unwrap();
        assert_eq!(f.basis().column(0), vec![1.0, 0.0, 0.0]);
        assert_eq!(f.sigma2(), 2.0);

        let spec = diag_spec(&[5.0, 3.0, 2.0, 0.5]);
        let f = rank_k_frame(&spec, 3, 3, None).unwrap();
        assert_eq!(f.sigma2(), 0.5);

        assert!(matches!(
            rank_k_frame(&spec, 4, 4, None),
            Err(IfaError::Config(_))
        ));
        let full = rank_k_frame(&spec, 4, 4, Some(0.25)).unwrap();
        assert_eq!(full.sigma2(), 0.25);
        assert_eq!(full.basis().cols(), 4);
    }

    #[test]
    fn frames_are_nested_and_bounded_by_next_eigenvalue() {
        let mut rng = crate::rng::stream(9, &[]);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..5).map(|j| (5 - j) as f64 * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let spec = spectral(&center(Matrix::from_rows(&rows).unwrap()).unwrap()).unwrap();
        for k in 1..4 {
            let a = rank_k_frame(&spec, k, 4, None).unwrap();
            let b = rank_k_frame(&spec, k + 1, 4, None).unwrap();
            assert!(a.basis().orthonormality_defect() < 1e-8);
            assert_eq!(a.basis(), &b.basis().leading_columns(k));
            assert!(a.sigma2() <= spec.eigenvalues()[k]);
        }
    }

    #[test]
    fn generic_over_f32() {
        let rows = [[0.0f32, 1.0], [2.0, 0.5], [4.0, 3.0], [1.0, -1.0]];
        let spec = spectral(&center(Matrix::from_rows(&rows).unwrap()).unwrap()).unwrap();
        assert!(spec.eigenvectors().orthonormality_defect() < 1e-5);
        assert!(spec.eigenvalues()[0] >= spec.eigenvalues()[1]);
    }
}

//! Plain multivariate kernel smoothing: product Gaussian kernel with Scott
//! bandwidths `hⱼ = n^(−1/(d+4)) sⱼ`.

use std::f64::consts::PI;

use log::warn;

use super::DensityField;
use crate::matrix::Matrix;
use crate::{IfaError, Result};

pub const MAX_BASELINE_DIM: usize = 6;

/// Kernel support used when splatting onto grids, in bandwidths.
const SPLAT_RADIUS: f64 = 7.0;

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineKde {
    data: Matrix<f64>,
    bandwidths: Vec<f64>,
    norm: f64,
}

impl BaselineKde {
    /// Scott's rule on the sample standard deviations. A coordinate with zero
    /// spread falls back to unit scale.
    pub fn fit(data: &Matrix<f64>) -> Result<Self> {
        let (n, d) = (data.rows(), data.cols());
        check_dim(d)?;
        if n == 0 {
            return Err(IfaError::Size("baseline needs at least one observation".into()));
        }
        let factor = (n as f64).powf(-1.0 / (d as f64 + 4.0));
        let bandwidths = (0..d)
            .map(|j| {
                let c = data.column(j);
                let mean = c.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                let s = if var > 0.0 {
                    var.sqrt()
                } else {
                    warn!("coordinate {j} has no spread; baseline uses unit scale");
                    1.0
                };
                factor * s
            })
            .collect();
        Self::with_bandwidths(data.clone(), bandwidths)
    }

    pub fn with_bandwidths(data: Matrix<f64>, bandwidths: Vec<f64>) -> Result<Self> {
        let d = data.cols();
        check_dim(d)?;
        if bandwidths.len() != d || bandwidths.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(IfaError::Parameter(format!(
                "need {d} positive bandwidths, got {bandwidths:?}"
            )));
        }
        if data.rows() == 0 {
            return Err(IfaError::Size("baseline needs at least one observation".into()));
        }
        let prod: f64 = bandwidths.iter().product();
        let norm = 1.0 / (data.rows() as f64 * prod * (2.0 * PI).powf(d as f64 / 2.0));
        Ok(BaselineKde { data, bandwidths, norm })
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .data
            .row_iter()
            .map(|r| {
                let q: f64 = r
                    .iter()
                    .zip(x)
                    .zip(&self.bandwidths)
                    .map(|((a, b), h)| ((b - a) / h).powi(2))
                    .sum();
                (-0.5 * q).exp()
            })
            .sum();
        s * self.norm
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(IfaError::Dimension("baseline needs d >= 1".into()));
    }
    if d > MAX_BASELINE_DIM {
        return Err(IfaError::UnsupportedDimension { d, max: MAX_BASELINE_DIM });
    }
    Ok(())
}

impl DensityField for BaselineKde {
    fn dim(&self) -> usize {
        self.data.cols()
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    /// Adds each observation's separable kernel to the nodes within
    /// `7 h` of it; the neglected mass is below `1e-11` per axis.
    fn eval_grid(&self, axes: &[Vec<f64>]) -> Vec<f64> {
        let d = axes.len();
        assert_eq!(d, self.dim(), "grid dimension");
        let lens: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = lens.iter().product();
        let mut out = vec![0.0; total];
        if total == 0 {
            return out;
        }
        let mut strides = vec![1usize; d];
        for j in (0..d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * lens[j + 1];
        }
        // per axis: index range of nodes and kernel factors
        let mut ranges: Vec<(usize, Vec<f64>)> = vec![(0, Vec::new()); d];
        for r in self.data.row_iter() {
            let mut empty = false;
            for j in 0..d {
                let h = self.bandwidths[j];
                let ax = &axes[j];
                let lo = ax.partition_point(|&v| v < r[j] - SPLAT_RADIUS * h);
                let hi = ax.partition_point(|&v| v <= r[j] + SPLAT_RADIUS * h);
                if lo >= hi {
                    empty = true;
                    break;
                }
                let (start, vals) = &mut ranges[j];
                *start = lo;
                vals.clear();
                vals.extend(ax[lo..hi].iter().map(|&v| (-0.5 * ((v - r[j]) / h).powi(2)).exp()));
            }
            if empty {
                continue;
            }
            splat(&mut out, &ranges, &strides, 0, 0, self.norm);
        }
        out
    }
}

fn splat(out: &mut [f64], ranges: &[(usize, Vec<f64>)], strides: &[usize], axis: usize, base: usize, w: f64) {
    let (start, vals) = &ranges[axis];
    if axis + 1 == ranges.len() {
        let dst = &mut out[base + start..base + start + vals.len()];
        for (o, v) in dst.iter_mut().zip(vals) {
            *o += w * v;
        }
        return;
    }
    for (i, v) in vals.iter().enumerate() {
        splat(out, ranges, strides, axis + 1, base + (start + i) * strides[axis], w * v);
    }
}

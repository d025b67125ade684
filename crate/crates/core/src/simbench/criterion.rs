//! The I₁ accuracy criterion `100 (1 − ∫(p̂ − p)² / ∫p²)` and tensor-grid
//! quadrature.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::truth::{generate, TrueDensity};
use super::DensityField;
use crate::rng::{self, label};
use crate::{IfaError, Result};

/// Uniform tensor grid; integrals are node sums times the cell volume.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorGrid {
    pub axes: Vec<Vec<f64>>,
    pub cell: f64,
}

impl TensorGrid {
    /// Nodes `center ± half` with spacing at most `spacing`.
    pub fn uniform_box(center: &[f64], half: f64, spacing: f64) -> Result<Self> {
        if !(half > 0.0) || !(spacing > 0.0) || center.is_empty() {
            return Err(IfaError::Parameter(format!(
                "grid needs positive extent and spacing, got {half} and {spacing}"
            )));
        }
        let nodes = (2.0 * half / spacing).ceil() as usize + 1;
        let step = 2.0 * half / (nodes - 1) as f64;
        let axes: Vec<Vec<f64>> = center
            .iter()
            .map(|&c| (0..nodes).map(|i| c - half + i as f64 * step).collect())
            .collect();
        Ok(TensorGrid {
            cell: step.powi(center.len() as i32),
            axes,
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn nodes(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    /// `Σ_nodes f(values) · cell` where `values[i]` is field `i` at the node and
    /// `f` writes `outputs` summands.
    pub fn integrate<F>(&self, fields: &[&dyn DensityField], outputs: usize, f: F) -> Vec<f64>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        let sums = self.axes[0]
            .par_iter()
            .map(|&x0| {
                let mut sub = Vec::with_capacity(self.dim());
                sub.push(vec![x0]);
                sub.extend(self.axes[1..].iter().cloned());
                let tables: Vec<Vec<f64>> = fields.iter().map(|p| p.eval_grid(&sub)).collect();
                let mut acc = vec![0.0; outputs];
                let mut vals = vec![0.0; fields.len()];
                let mut out = vec![0.0; outputs];
                for node in 0..tables.first().map_or(0, Vec::len) {
                    for (v, t) in vals.iter_mut().zip(&tables) {
                        *v = t[node];
                    }
                    f(&vals, &mut out);
                    for (a, o) in acc.iter_mut().zip(&out) {
                        *a += o;
                    }
                }
                acc
            })
            .reduce(
                || vec![0.0; outputs],
                |mut a, b| {
                    a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        sums.into_iter().map(|s| s * self.cell).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct I1Config {
    /// Half-width of the quadrature box in units of the largest standard
    /// deviation of the model.
    pub box_stds: f64,
    /// Node spacing as a fraction of the smallest feature scale.
    pub spacing_factor: f64,
    /// Upper limit on quadrature nodes; the spacing grows to respect it.
    pub max_nodes: usize,
    /// Largest dimension integrated on a grid; above it importance sampling is used.
    pub max_grid_dim: usize,
    pub is_draws: usize,
    pub max_ratio: f64,
    pub seed: u64,
}

impl Default for I1Config {
    fn default() -> Self {
        I1Config {
            box_stds: 6.0,
            spacing_factor: 0.8,
            max_nodes: 20_000_000,
            max_grid_dim: 3,
            is_draws: 100_000,
            max_ratio: 1e6,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMethod {
    Quadrature,
    ImportanceSampling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct I1Result {
    pub i1: f64,
    /// `∫(p̂ − p)²`
    pub sq_error: f64,
    /// `∫p²`
    pub sq_truth: f64,
    /// Standard error of `sq_error` (0 for quadrature).
    pub stderr: f64,
    pub method: IntegrationMethod,
    pub evaluations: usize,
}

/// Quadrature box for `truth`: centered at its mean, half-width
/// `box_stds × max_std`, spacing `spacing_factor × min(σ, resolution)`.
pub fn quadrature_grid(truth: &TrueDensity, resolution: f64, cfg: &I1Config) -> Result<TensorGrid> {
    let t = truth.truth();
    let half = cfg.box_stds * t.max_std();
    let mut spacing = cfg.spacing_factor * t.sigma.min(resolution);
    let per_axis = (cfg.max_nodes as f64).powf(1.0 / t.d as f64).floor().max(2.0);
    if 2.0 * half / spacing + 1.0 > per_axis {
        let coarse = 2.0 * half / (per_axis - 1.0);
        warn!("quadrature spacing raised from {spacing:.4} to {coarse:.4} by the node limit");
        spacing = coarse;
    }
    TensorGrid::uniform_box(&t.offset, half, spacing)
}

/// I₁ of `estimate` against `truth`. `resolution` is the smallest length scale
/// of the estimate (its kernel bandwidth), used to size the quadrature grid.
pub fn i1_criterion(
    estimate: &dyn DensityField,
    truth: &TrueDensity,
    resolution: f64,
    cfg: &I1Config,
) -> Result<I1Result> {
    let d = truth.truth().d;
    if estimate.dim() != d {
        return Err(IfaError::Dimension(format!(
            "estimate has dimension {}, model has {d}",
            estimate.dim()
        )));
    }
    if d <= cfg.max_grid_dim {
        let grid = quadrature_grid(truth, resolution, cfg)?;
        let sums = grid.integrate(&[estimate, truth], 2, |v, out| {
            let diff = v[0] - v[1];
            out[0] = diff * diff;
            out[1] = v[1] * v[1];
        });
        if !sums.iter().all(|s| s.is_finite()) {
            return Err(IfaError::Numeric("non-finite quadrature sum".into()));
        }
        return Ok(I1Result {
            i1: 100.0 * (1.0 - sums[0] / sums[1]),
            sq_error: sums[0],
            sq_truth: sums[1],
            stderr: 0.0,
            method: IntegrationMethod::Quadrature,
            evaluations: grid.nodes(),
        });
    }
    importance_sampling(estimate, truth, cfg)
}

/// `∫(p̂ − p)² = E_p[(p̂ − p)² / p]` and `∫p² = E_p[p]` with draws from `p`.
fn importance_sampling(
    estimate: &dyn DensityField,
    truth: &TrueDensity,
    cfg: &I1Config,
) -> Result<I1Result> {
    if cfg.is_draws < 2 {
        return Err(IfaError::Config("importance sampling needs at least 2 draws".into()));
    }
    let sample = generate(truth.truth(), cfg.is_draws, rng::derive(cfg.seed, &[label::IMPORTANCE]))?;
    let rows: Vec<&[f64]> = sample.x.row_iter().collect();
    let terms: Vec<(f64, f64, bool)> = rows
        .par_iter()
        .map(|x| {
            let p = truth.density(x);
            let q = estimate.density(x);
            let mut r = if p > 0.0 { (q - p) * (q - p) / p } else { f64::INFINITY };
            let clipped = !(r <= cfg.max_ratio);
            if clipped {
                r = cfg.max_ratio;
            }
            (r, p, clipped)
        })
        .collect();
    let clipped = terms.iter().filter(|t| t.2).count();
    if clipped > 0 {
        warn!("{clipped} importance ratios clipped at {}", cfg.max_ratio);
    }
    let n = terms.len() as f64;
    let mean_r = terms.iter().map(|t| t.0).sum::<f64>() / n;
    let mean_p = terms.iter().map(|t| t.1).sum::<f64>() / n;
    let var_r = terms.iter().map(|t| (t.0 - mean_r).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(I1Result {
        i1: 100.0 * (1.0 - mean_r / mean_p),
        sq_error: mean_r,
        sq_truth: mean_p,
        stderr: (var_r / n).sqrt(),
        method: IntegrationMethod::ImportanceSampling,
        evaluations: cfg.is_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simbench::densities::TestDensity;
    use crate::simbench::truth::SyntheticTruth;
    use crate::simbench::FnDensity;
    use crate::Matrix;

    fn gaussian_1d() -> TrueDensity {
        // d = m = 1 with N(0,1) factor: p = N(0, 1 + σ²)
        let truth = SyntheticTruth::with_mixing(
            Matrix::from_rows(&[[1.0]]).unwrap(),
            &[TestDensity::Normal],
            3.0,
            0,
        )
        .unwrap();
        TrueDensity::new(&truth).unwrap()
    }

    #[test]
    fn perfect_and_zero_estimates() {
        let cfg = I1Config::default();
        for d in [1usize, 2, 4] {
            let truth = SyntheticTruth::new(d, &[TestDensity::ChiSquare1], 3.0, 5).unwrap();
            let p = TrueDensity::new(&truth).unwrap();
            let r = i1_criterion(&p, &p, 0.2, &cfg).unwrap();
            assert_eq!(r.i1, 100.0, "d {d}");
            let zero = FnDensity::new(d, |_| 0.0);
            let r = i1_criterion(&zero, &p, 0.2, &cfg).unwrap();
            if d <= 3 {
                assert_eq!(r.i1, 0.0);
            } else {
                assert!(r.i1.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn shifted_gaussian_closed_form() {
        let p = gaussian_1d();
        let v = 1.0 + p.truth().sigma.powi(2);
        let s = v.sqrt();
        for delta in [0.5, 1.0] {
            let shifted = FnDensity::new(1, move |x: &[f64]| {
                (-(x[0] - delta * s).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
            });
            let r = i1_criterion(&shifted, &p, 0.05, &I1Config::default()).unwrap();
            // in units of the standard deviation the value is scale free
            let expect = 100.0 * (1.0 - 2.0 * (1.0 - (-delta * delta / 4.0f64).exp()));
            assert!((r.i1 - expect).abs() < 1e-6, "{} vs {expect}", r.i1);
        }
        let expect = 100.0 * (1.0 - 2.0 * (1.0 - (-0.25f64).exp()));
        assert!((expect - 55.76).abs() < 5e-3);
    }

    #[test]
    fn grid_integrates_constant() {
        let g = TensorGrid::uniform_box(&[0.0, 1.0], 1.0, 0.1).unwrap();
        let one = FnDensity::new(2, |_| 1.0);
        let v = g.integrate(&[&one], 1, |vals, out| out[0] = vals[0]);
        // node sum over a closed box overcounts the boundary by one cell layer
        let nodes = g.axes[0].len() as f64;
        let step = g.axes[0][1] - g.axes[0][0];
        assert!((v[0] - (nodes * step).powi(2)).abs() < 1e-9);
    }
}

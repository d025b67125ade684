//! Replicated density-estimation experiments.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::BaselineKde;
use super::criterion::{i1_criterion, I1Config};
use super::densities::TestDensity;
use super::truth::{generate, FactorCache, SyntheticTruth, TrueDensity};
use crate::aggregator::{fit_aggregate, AggregateConfig};
use crate::candidates::CandidateConfig;
use crate::linmodel;
use crate::rng::{self, label};
use crate::{IfaError, Result};

pub const METHOD_IFA: &str = "ifa";
pub const METHOD_BASELINE: &str = "ks";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub d: usize,
    pub factors: Vec<TestDensity>,
    pub snr: f64,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub baseline: bool,
    /// Upper rank bound `M`; `None` uses `d − 1`.
    pub max_rank: Option<usize>,
    pub candidate: CandidateConfig,
    pub split_c: f64,
    pub i1: I1Config,
    /// Largest tolerated fraction of failed replications per method.
    pub max_failure_fraction: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            d: 2,
            factors: vec![TestDensity::ChiSquare1],
            snr: 3.0,
            n: 1000,
            replications: 50,
            seed: 0,
            baseline: true,
            max_rank: None,
            candidate: CandidateConfig::default(),
            split_c: 1.0,
            i1: I1Config::default(),
            max_failure_fraction: 0.2,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.factors.is_empty() || self.factors.len() > self.d {
            return Err(IfaError::Config(format!(
                "need 1 <= m <= d, got d = {} and m = {}",
                self.d,
                self.factors.len()
            )));
        }
        if self.baseline && self.d > super::baseline::MAX_BASELINE_DIM {
            return Err(IfaError::UnsupportedDimension {
                d: self.d,
                max: super::baseline::MAX_BASELINE_DIM,
            });
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(IfaError::Config(format!("SNR must be positive and finite, got {}", self.snr)));
        }
        if self.n < 20 {
            return Err(IfaError::Config(format!("n must be at least 20, got {}", self.n)));
        }
        if self.replications == 0 {
            return Err(IfaError::Config("replications must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err(IfaError::Config("max_failure_fraction must lie in [0, 1]".into()));
        }
        self.candidate.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub method: String,
    pub i1: Option<f64>,
    pub fit_seconds: f64,
    /// `"ok"` or `"failed: <reason>"`.
    pub status: String,
    pub n: usize,
}

/// Five-number summary of the successful replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub succeeded: usize,
    pub failed: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub config: BenchmarkConfig,
    pub per_rep: Vec<RepRecord>,
    pub summary: Vec<MethodSummary>,
}

/// Linearly interpolated quantile of sorted data (`(n − 1) p` rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n - 1) as f64 * p;
    let i = h.floor() as usize;
    if i + 1 >= n {
        return sorted[n - 1];
    }
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

/// `[min, q1, median, q3, max]`.
pub fn five_numbers(values: &[f64]) -> [f64; 5] {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|p| quantile_sorted(&v, p))
}

pub fn summarize(records: &[RepRecord]) -> Vec<MethodSummary> {
    let mut methods: Vec<&str> = Vec::new();
    for r in records {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let ok: Vec<f64> = records.iter().filter(|r| r.method == m).filter_map(|r| r.i1).collect();
            let failed = records.iter().filter(|r| r.method == m && r.i1.is_none()).count();
            let [min, q1, median, q3, max] = if ok.is_empty() {
                [f64::NAN; 5]
            } else {
                five_numbers(&ok)
            };
            MethodSummary {
                method: m.to_string(),
                succeeded: ok.len(),
                failed,
                min,
                q1,
                median,
                q3,
                max,
            }
        })
        .collect()
}

fn record(rep: usize, method: &str, n: usize, secs: f64, r: Result<f64>) -> RepRecord {
    match r {
        Ok(i1) => RepRecord {
            rep,
            method: method.into(),
            i1: Some(i1),
            fit_seconds: secs,
            status: "ok".into(),
            n,
        },
        Err(e) => {
            warn!("replication {rep} ({method}) failed: {e}");
            RepRecord {
                rep,
                method: method.into(),
                i1: None,
                fit_seconds: secs,
                status: format!("failed: {e}"),
                n,
            }
        }
    }
}

/// One replication: fresh mixing, factors and noise from
/// `derive(seed, [REPLICATION, rep])`.
pub fn run_replication(cfg: &BenchmarkConfig, rep: usize, cache: &FactorCache) -> Vec<RepRecord> {
    let seed = rng::derive(cfg.seed, &[label::REPLICATION, rep as u64]);
    let n = cfg.n;
    let setup = (|| {
        let truth = SyntheticTruth::new(cfg.d, &cfg.factors, cfg.snr, seed)?;
        let density = TrueDensity::with_cache(&truth, cache)?;
        let sample = generate(&truth, n, seed)?;
        Ok::<_, IfaError>((density, sample))
    })();
    let (density, sample) = match setup {
        Ok(v) => v,
        Err(e) => {
            let mut out = vec![record(rep, METHOD_IFA, n, 0.0, Err(IfaError::Estimation(e.to_string())))];
            if cfg.baseline {
                out.push(record(rep, METHOD_BASELINE, n, 0.0, Err(e)));
            }
            return out;
        }
    };
    let sigma = density.truth().sigma;
    let resolution = sigma / (n as f64).ln().max(1.0).sqrt();
    let i1cfg = I1Config {
        seed: rng::derive(seed, &[label::IMPORTANCE]),
        ..cfg.i1.clone()
    };

    let mut out = Vec::with_capacity(2);
    let agg_cfg = AggregateConfig {
        candidate: cfg.candidate.clone(),
        split_c: cfg.split_c,
        seed,
    };
    let t0 = Instant::now();
    let fitted = linmodel::center(sample.x.clone()).and_then(|data| fit_aggregate(&data, cfg.max_rank, &agg_cfg));
    let secs = t0.elapsed().as_secs_f64();
    let ifa = fitted.and_then(|agg| i1_criterion(&agg, &density, resolution, &i1cfg).map(|r| r.i1));
    out.push(record(rep, METHOD_IFA, n, secs, ifa));

    if cfg.baseline {
        let t0 = Instant::now();
        let fitted = BaselineKde::fit(&sample.x);
        let secs = t0.elapsed().as_secs_f64();
        let ks = fitted.and_then(|kde| i1_criterion(&kde, &density, resolution, &i1cfg).map(|r| r.i1));
        out.push(record(rep, METHOD_BASELINE, n, secs, ks));
    }
    out
}

/// Runs all replications (in parallel) and summarises I₁ per method.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    cfg.validate()?;
    let cache = FactorCache::new();
    let mut per_rep: Vec<RepRecord> = (0..cfg.replications)
        .into_par_iter()
        .flat_map_iter(|rep| {
            let recs = run_replication(cfg, rep, &cache);
            info!(
                "replication {rep}: {}",
                recs.iter()
                    .map(|r| format!("{}={}", r.method, r.i1.map_or("failed".into(), |v| format!("{v:.2}"))))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            recs
        })
        .collect();
    per_rep.sort_by(|a, b| (a.rep, &a.method).cmp(&(b.rep, &b.method)));
    let summary = summarize(&per_rep);
    for s in &summary {
        let total = s.succeeded + s.failed;
        if s.failed as f64 > cfg.max_failure_fraction * total as f64 {
            return Err(IfaError::Estimation(format!(
                "{} of {total} replications failed for method {}",
                s.failed, s.method
            )));
        }
    }
    Ok(BenchmarkResult {
        config: cfg.clone(),
        per_rep,
        summary,
    })
}

impl BenchmarkResult {
    pub fn summary_for(&self, method: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| IfaError::Format(e.to_string()))
    }

    /// Flat `rep,method,i1,fit_seconds,status,n` table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rep,method,i1,fit_seconds,status,n\n");
        for r in &self.per_rep {
            let i1 = r.i1.map_or(String::new(), |v| format!("{v:.16e}"));
            let status = r.status.replace(['"', ','], ";");
            let _ = writeln!(s, "{},{},{},{:.6},{},{}", r.rep, r.method, i1, r.fit_seconds, status, r.n);
        }
        s
    }

    pub fn write(&self, json: &Path, csv: &Path) -> Result<()> {
        std::fs::write(json, self.to_json()?).map_err(|e| IfaError::io(json, e))?;
        std::fs::write(csv, self.to_csv()).map_err(|e| IfaError::io(csv, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate() {
        assert_eq!(five_numbers(&[3.0, 1.0, 2.0, 4.0, 5.0]), [1.0, 2.0, 3.0, 4.0, 5.0]);
        let q = five_numbers(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(q, [1.0, 1.75, 2.5, 3.25, 4.0]);
        assert_eq!(five_numbers(&[7.0]), [7.0; 5]);
    }

    #[test]
    fn summary_counts_failures() {
        let recs = vec![
            record(0, "a", 10, 0.0, Ok(1.0)),
            record(1, "a", 10, 0.0, Err(IfaError::Estimation("x".into()))),
            record(2, "a", 10, 0.0, Ok(3.0)),
        ];
        let s = summarize(&recs);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].succeeded, s[0].failed), (2, 1));
        assert_eq!(s[0].median, 2.0);
    }

    #[test]
    fn config_validation() {
        let mut c = BenchmarkConfig { d: 7, ..BenchmarkConfig::default() };
        assert!(matches!(c.validate(), Err(IfaError::UnsupportedDimension { .. })));
        c.baseline = false;
        assert!(c.validate().is_ok());
        c.factors = vec![TestDensity::Normal; 8];
        assert!(c.validate().is_err());
    }
}

//! The seven one-dimensional source laws used to build synthetic factors.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Gamma, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{
    ChiSquared as ChiSq, Continuous, ContinuousCDF, Gamma as GammaD, Laplace, Normal,
    StudentsT,
};

use crate::{IfaError, Result};

/// Source laws, numbered 1 to 7.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum TestDensity {
    /// N(0, 1)
    Normal,
    /// χ²(1)
    ChiSquare1,
    /// 0.5 N(−3, 1) + 0.5 N(2, 1)
    GaussianMixture,
    /// 0.4 Γ(5) + 0.6 Γ(13), unit scale
    GammaMixture,
    /// χ²(8)
    ChiSquare8,
    /// Student t with 5 degrees of freedom
    StudentT5,
    /// ½ e^{−|x|}
    DoubleExponential,
}

impl TestDensity {
    pub const ALL: [TestDensity; 7] = [
        TestDensity::Normal,
        TestDensity::ChiSquare1,
        TestDensity::GaussianMixture,
        TestDensity::GammaMixture,
        TestDensity::ChiSquare8,
        TestDensity::StudentT5,
        TestDensity::DoubleExponential,
    ];

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1..=7 => Ok(Self::ALL[id as usize - 1]),
            _ => Err(IfaError::Config(format!("test density id must be 1..=7, got {id}"))),
        }
    }

    pub fn id(self) -> u8 {
        Self::ALL.iter().position(|&t| t == self).expect("listed") as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            TestDensity::Normal => "normal",
            TestDensity::ChiSquare1 => "chi2(1)",
            TestDensity::GaussianMixture => "0.5N(-3,1)+0.5N(2,1)",
            TestDensity::GammaMixture => "0.4gamma(5)+0.6gamma(13)",
            TestDensity::ChiSquare8 => "chi2(8)",
            TestDensity::StudentT5 => "t(5)",
            TestDensity::DoubleExponential => "laplace",
        }
    }

    pub fn mean(self) -> f64 {
        match self {
            TestDensity::Normal | TestDensity::StudentT5 | TestDensity::DoubleExponential => 0.0,
            TestDensity::ChiSquare1 => 1.0,
            TestDensity::GaussianMixture => -0.5,
            TestDensity::GammaMixture => 0.4 * 5.0 + 0.6 * 13.0,
            TestDensity::ChiSquare8 => 8.0,
        }
    }

    pub fn variance(self) -> f64 {
        match self {
            TestDensity::Normal => 1.0,
            TestDensity::ChiSquare1 => 2.0,
            // 1 + 0.5·0.5·(−3 − 2)²
            TestDensity::GaussianMixture => 1.0 + 0.25 * 25.0,
            TestDensity::GammaMixture => {
                let m2 = 0.4 * (5.0 + 25.0) + 0.6 * (13.0 + 169.0);
                m2 - self.mean() * self.mean()
            }
            TestDensity::ChiSquare8 => 16.0,
            TestDensity::StudentT5 => 5.0 / 3.0,
            TestDensity::DoubleExponential => 2.0,
        }
    }

    pub fn std(self) -> f64 {
        self.variance().sqrt()
    }

    /// `(weight, mean, variance)` when the law is a finite Gaussian mixture.
    pub fn gaussian_components(self) -> Option<Vec<(f64, f64, f64)>> {
        match self {
            TestDensity::Normal => Some(vec![(1.0, 0.0, 1.0)]),
            TestDensity::GaussianMixture => Some(vec![(0.5, -3.0, 1.0), (0.5, 2.0, 1.0)]),
            _ => None,
        }
    }

    pub fn pdf(self, x: f64) -> f64 {
        match self {
            TestDensity::Normal | TestDensity::GaussianMixture => self
                .gaussian_components()
                .expect("gaussian")
                .iter()
                .map(|&(w, m, v)| w * normal(m, v).pdf(x))
                .sum(),
            TestDensity::ChiSquare1 => chi2(1.0).pdf(x),
            TestDensity::ChiSquare8 => chi2(8.0).pdf(x),
            TestDensity::GammaMixture => 0.4 * gamma(5.0).pdf(x) + 0.6 * gamma(13.0).pdf(x),
            TestDensity::StudentT5 => t5().pdf(x),
            TestDensity::DoubleExponential => laplace().pdf(x),
        }
    }

    pub fn cdf(self, x: f64) -> f64 {
        match self {
            TestDensity::Normal | TestDensity::GaussianMixture => self
                .gaussian_components()
                .expect("gaussian")
                .iter()
                .map(|&(w, m, v)| w * normal(m, v).cdf(x))
                .sum(),
            TestDensity::ChiSquare1 => chi2(1.0).cdf(x),
            TestDensity::ChiSquare8 => chi2(8.0).cdf(x),
            TestDensity::GammaMixture => 0.4 * gamma(5.0).cdf(x) + 0.6 * gamma(13.0).cdf(x),
            TestDensity::StudentT5 => t5().cdf(x),
            TestDensity::DoubleExponential => laplace().cdf(x),
        }
    }

    /// Left end of the support (`-inf` for laws on the whole line).
    pub fn support_lo(self) -> f64 {
        match self {
            TestDensity::ChiSquare1 | TestDensity::ChiSquare8 | TestDensity::GammaMixture => 0.0,
            _ => f64::NEG_INFINITY,
        }
    }

    /// `(lo, hi)` with `cdf(lo) ≤ tail` and `1 − cdf(hi) ≤ tail`, found by
    /// doubling then bisection.
    pub fn tail_bounds(self, tail: f64) -> (f64, f64) {
        let (m, s) = (self.mean(), self.std());
        let mut hi = m + s;
        while 1.0 - self.cdf(hi) > tail {
            hi = m + 2.0 * (hi - m);
        }
        let lo = if self.support_lo().is_finite() {
            self.support_lo()
        } else {
            let mut lo = m - s;
            while self.cdf(lo) > tail {
                lo = m - 2.0 * (m - lo);
            }
            lo
        };
        (lo, hi)
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            TestDensity::Normal => rng.sample(StandardNormal),
            TestDensity::ChiSquare1 => ChiSquared::new(1.0).expect("valid").sample(rng),
            TestDensity::ChiSquare8 => ChiSquared::new(8.0).expect("valid").sample(rng),
            TestDensity::GaussianMixture => {
                let z: f64 = rng.sample(StandardNormal);
                if rng.random::<bool>() {
                    z - 3.0
                } else {
                    z + 2.0
                }
            }
            TestDensity::GammaMixture => {
                let shape = if rng.random::<f64>() < 0.4 { 5.0 } else { 13.0 };
                Gamma::new(shape, 1.0).expect("valid").sample(rng)
            }
            TestDensity::StudentT5 => StudentT::new(5.0).expect("valid").sample(rng),
            TestDensity::DoubleExponential => {
                let e: f64 = rng.sample(Exp1);
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
        }
    }
}

fn normal(mean: f64, var: f64) -> Normal {
    Normal::new(mean, var.sqrt()).expect("valid normal")
}

fn chi2(k: f64) -> ChiSq {
    ChiSq::new(k).expect("valid chi-square")
}

fn gamma(shape: f64) -> GammaD {
    GammaD::new(shape, 1.0).expect("valid gamma")
}

fn t5() -> StudentsT {
    StudentsT::new(0.0, 1.0, 5.0).expect("valid t")
}

fn laplace() -> Laplace {
    Laplace::new(0.0, 1.0).expect("valid laplace")
}

impl TryFrom<u8> for TestDensity {
    type Error = IfaError;

    fn try_from(id: u8) -> Result<Self> {
        Self::from_id(id)
    }
}

impl From<TestDensity> for u8 {
    fn from(t: TestDensity) -> u8 {
        t.id()
    }
}

impl FromStr for TestDensity {
    type Err = IfaError;

    fn from_str(s: &str) -> Result<Self> {
        let id: u8 = s
            .trim()
            .parse()
            .map_err(|_| IfaError::Config(format!("test density id must be 1..=7, got '{s}'")))?;
        Self::from_id(id)
    }
}

impl fmt::Display for TestDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

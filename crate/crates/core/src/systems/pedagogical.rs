//! One-shot quadratic cost `φ(u, w) = u² + (w + u)²` under skewed noise.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::risk::{certainty_equivalent, cvar_exact, FiniteDistribution};

const CDF_HALF_WIDTH: f64 = 12.0;
const CDF_STEPS: usize = 48_000;

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Quantiles of the skew-normal with shape `shape` at the midpoints
/// `(i + ½)/n`, from a trapezoidal table of its CDF.
fn skew_normal_quantiles(shape: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * CDF_HALF_WIDTH / CDF_STEPS as f64;
    let xs: Vec<f64> = (0..=CDF_STEPS).map(|i| -CDF_HALF_WIDTH + h * i as f64).collect();
    let pdf: Vec<f64> = xs
        .iter()
        .map(|&x| 2.0 * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * normal_cdf(shape * x))
        .collect();
    let mut cdf = vec![0.0; xs.len()];
    for i in 1..xs.len() {
        cdf[i] = cdf[i - 1] + 0.5 * h * (pdf[i - 1] + pdf[i]);
    }
    let total = cdf[CDF_STEPS];
    (0..n)
        .map(|i| {
            let p = (i as f64 + 0.5) / n as f64 * total;
            let k = cdf.partition_point(|&c| c < p).clamp(1, CDF_STEPS);
            let t = (p - cdf[k - 1]) / (cdf[k] - cdf[k - 1]);
            xs[k - 1] + t * h
        })
        .collect()
}

fn standardize(mut values: Vec<f64>) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    values.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    values
}

fn skewness(values: &[f64]) -> f64 {
    values.iter().map(|v| v.powi(3)).sum::<f64>() / values.len() as f64
}

/// `n` equiprobable atoms with mean 0, variance 1 and the given skewness,
/// taken as standardized midpoint quantiles of a skew-normal whose shape is
/// tuned by bisection.
pub fn skewed_unit_disturbance(n: usize, target_skew: f64) -> Result<FiniteDistribution> {
    if n < 3 || target_skew.abs() >= 0.99 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 atoms and |skewness| < 0.99, got {n} and {target_skew}"
        )));
    }
    let atoms_for = |shape: f64| standardize(skew_normal_quantiles(shape, n));
    let sign = target_skew.signum();
    let (mut lo, mut hi) = (0.0f64, 60.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if sign * skewness(&atoms_for(sign * mid)) < target_skew.abs() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    FiniteDistribution::equiprobable(&atoms_for(sign * 0.5 * (lo + hi)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PedagogicalRow {
    pub u: f64,
    pub mean: f64,
    pub variance: f64,
    /// Certainty equivalents, one per requested γ.
    pub ce: Vec<f64>,
    /// CVaR of the cost, one per requested α.
    pub cvar: Vec<f64>,
}

/// The noise `W` and its first four raw moments.
#[derive(Clone, Debug)]
pub struct Pedagogical {
    pub w: FiniteDistribution,
    pub moments: [f64; 4],
}

impl Pedagogical {
    pub fn new() -> Result<Self> {
        Self::with_noise(skewed_unit_disturbance(1001, -0.5)?)
    }

    pub fn with_noise(w: FiniteDistribution) -> Result<Self> {
        let mut moments = [0.0; 4];
        for (k, m) in moments.iter_mut().enumerate() {
            *m = w.atoms().iter().map(|&(x, p)| p * x.powi(k as i32 + 1)).sum();
        }
        Ok(Self { w, moments })
    }

    pub fn cost(u: f64, w: f64) -> f64 {
        u * u + (w + u) * (w + u)
    }

    /// `E φ(u, W)` from the moments of `W`.
    pub fn mean(&self, u: f64) -> f64 {
        let [m1, m2, ..] = self.moments;
        2.0 * u * u + 2.0 * u * m1 + m2
    }

    /// `var φ(u, W)` from the moments of `W`.
    pub fn variance(&self, u: f64) -> f64 {
        let [m1, m2, m3, m4] = self.moments;
        4.0 * u * u * (m2 - m1 * m1) + 4.0 * u * (m3 - m1 * m2) + (m4 - m2 * m2)
    }

    pub fn cost_distribution(&self, u: f64) -> Result<FiniteDistribution> {
        self.w.map(|w| Self::cost(u, w))
    }

    pub fn row(&self, u: f64, gammas: &[f64], alphas: &[f64]) -> Result<PedagogicalRow> {
        let mean = self.mean(u);
        let variance = self.variance(u);
        let phi = self.cost_distribution(u)?;
        Ok(PedagogicalRow {
            u,
            mean,
            variance,
            ce: gammas
                .iter()
                .map(|&g| certainty_equivalent(mean, variance.max(0.0), g))
                .collect::<Result<_>>()?,
            cvar: alphas.iter().map(|&a| cvar_exact(&phi, a)).collect::<Result<_>>()?,
        })
    }
}

/// Mean, variance, certainty equivalents and CVaRs of `φ(u, W)` along `u_grid`.
pub fn pedagogical_curves(u_grid: &[f64], gammas: &[f64], alphas: &[f64]) -> Result<Vec<PedagogicalRow>> {
    let p = Pedagogical::new()?;
    u_grid.iter().map(|&u| p.row(u, gammas, alphas)).collect()
}

//! Risk functionals on finite distributions and on sample sets.
//!
//! Exponential utility, CVaR in its variational (Rockafellar–Uryasev) form,
//! empirical VaR, and the summary statistics used by the trade-off studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total probability mass of a [`FiniteDistribution`].
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// A random cost with finitely many outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    atoms: Vec<(f64, f64)>,
}

impl FiniteDistribution {
    /// Builds a distribution from `(value, probability)` pairs.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput("distribution has no atoms".into()));
        }
        let mut total = 0.0;
        for &(value, prob) in &atoms {
            if !value.is_finite() {
                return Err(Error::Domain(format!("atom value {value} is not finite")));
            }
            if !(0.0..=1.0).contains(&prob) {
                return Err(Error::InvalidParameter(format!(
                    "atom probability {prob} outside [0, 1]"
                )));
            }
            total += prob;
        }
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms })
    }

    pub fn from_parts(values: &[f64], probabilities: &[f64]) -> Result<Self> {
        if values.len() != probabilities.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values but {} probabilities",
                values.len(),
                probabilities.len()
            )));
        }
        Self::new(values.iter().copied().zip(probabilities.iter().copied()).collect())
    }

    /// Uniform weights over `values`.
    pub fn equiprobable(values: &[f64]) -> Result<Self> {
        let p = 1.0 / values.len().max(1) as f64;
        Self::new(values.iter().map(|&v| (v, p)).collect())
    }

    pub fn point(value: f64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(z, p)| p * z).sum::<f64>() / self.total_mass()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.atoms
            .iter()
            .map(|&(z, p)| p * (z - mean) * (z - mean))
            .sum::<f64>()
            / self.total_mass()
    }

    pub fn min_value(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min)
    }

    /// Push-forward of the distribution through `f`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.atoms.iter().map(|&(z, p)| (f(z), p)).collect())
    }

    fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}

/// Exponential utility `b + (-2/θ) log E exp((-θ/2)(Z - b))` for `θ < 0`.
///
/// The sum is evaluated with the largest exponent factored out, so the
/// result stays finite for any `θ` as long as the atoms are finite.
pub fn exponential_utility(dist: &FiniteDistribution, theta: f64, lower_bound: f64) -> Result<f64> {
    check_theta(theta)?;
    if let Some(&(z, _)) = dist.atoms().iter().find(|a| a.0 < lower_bound) {
        return Err(Error::Domain(format!(
            "atom {z} lies below the lower bound {lower_bound}"
        )));
    }
    let scale = -theta / 2.0;
    let mut exponents = Vec::with_capacity(dist.atoms().len());
    let mut weights = Vec::with_capacity(dist.atoms().len());
    for &(z, p) in dist.atoms() {
        exponents.push(scale * (z - lower_bound));
        weights.push(p);
    }
    let log_mean = log_mean_exp(&exponents, &weights);
    let value = lower_bound + log_mean / scale;
    if !value.is_finite() {
        return Err(Error::Domain(format!(
            "exponential utility is not finite at theta = {theta}"
        )));
    }
    Ok(value)
}

/// `log(Σ wᵢ exp(eᵢ) / Σ wᵢ)` with the maximum exponent shifted out.
///
/// Uses `expm1`/`ln_1p` so that exponents close to each other (θ near 0)
/// keep full relative precision.
pub(crate) fn log_mean_exp(exponents: &[f64], weights: &[f64]) -> f64 {
    let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let mut mass = 0.0;
    let mut acc = 0.0;
    for (&e, &w) in exponents.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        mass += w;
        acc += w * (e - max).exp_m1();
    }
    max + (acc / mass).ln_1p()
}

/// The mean-variance surrogate `E(Z) - (θ/4) var(Z)` of the exponential utility.
pub fn eu_mean_variance_approximation(dist: &FiniteDistribution, theta: f64) -> f64 {
    dist.mean() - theta / 4.0 * dist.variance()
}

/// Exact CVaR of a finite distribution at level `alpha ∈ (0, 1]`.
///
/// Minimizes `s + E max(Z - s, 0) / α` over the atom values, where the
/// piecewise-linear objective attains its infimum.
pub fn cvar_exact(dist: &FiniteDistribution, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mut atoms = dist.atoms().to_vec();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mass: f64 = atoms.iter().map(|a| a.1).sum();
    let values: Vec<f64> = atoms.iter().map(|a| a.0).collect();
    let weights: Vec<f64> = atoms.iter().map(|a| a.1 / mass).collect();
    Ok(ru_minimize(&values, &weights, alpha).0)
}

/// Minimizes `s + Σ_j w_j max(z_j - s, 0) / α` over `s ∈ {z_j}` for sorted `z`.
///
/// Returns the minimum and the index of the smallest minimizing value.
/// Tail sums are accumulated as non-negative increments, so there is no
/// cancellation between large partial sums.
fn ru_minimize(sorted: &[f64], weights: &[f64], alpha: f64) -> (f64, usize) {
    let n = sorted.len();
    // excess[k] = Σ_{j>k} w_j (z_j - z_k)
    let mut excess = vec![0.0; n];
    let mut tail_weight = 0.0;
    for k in (0..n.saturating_sub(1)).rev() {
        tail_weight += weights[k + 1];
        excess[k] = excess[k + 1] + tail_weight * (sorted[k + 1] - sorted[k]);
    }
    let mut best = (f64::INFINITY, 0);
    for k in 0..n {
        let objective = sorted[k] + excess[k] / alpha;
        if objective < best.0 {
            best = (objective, k);
        }
    }
    best
}

/// Realized costs from a simulation, with the seed that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSampleSet {
    samples: Vec<f64>,
    seed: u64,
}

impl CostSampleSet {
    pub fn new(samples: Vec<f64>, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("cost sample set is empty".into()));
        }
        Ok(Self { samples, seed })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.samples)
    }
}

fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

fn sorted_copy(samples: &[f64]) -> Vec<f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
}

/// Order-statistic index (0-based) of the empirical VaR: `k = max(1, ⌈(1-α)n⌉)`.
fn var_index(n: usize, alpha: f64) -> usize {
    // The small offset keeps e.g. (1 - 0.1) * 10 = 9.000000000000002 at 9.
    let k = ((1.0 - alpha) * n as f64 - 1e-9).ceil().max(1.0) as usize;
    k.min(n) - 1
}

/// Empirical VaR: the left-side `(1-α)`-quantile `inf{z : F̂(z) ≥ 1-α}`.
pub fn var_estimate(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples for VaR".into()));
    }
    check_alpha(alpha)?;
    let sorted = sorted_copy(samples);
    Ok(sorted[var_index(sorted.len(), alpha)])
}

/// Sample CVaR by minimizing the Rockafellar–Uryasev objective over the samples.
pub fn cvar_estimate(samples: &[f64], alpha: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples for CVaR".into()));
    }
    check_alpha(alpha)?;
    let sorted = sorted_copy(samples);
    Ok(sorted_cvar(&sorted, alpha))
}

fn sorted_cvar(sorted: &[f64], alpha: f64) -> f64 {
    let weights = vec![1.0 / sorted.len() as f64; sorted.len()];
    ru_minimize(sorted, &weights, alpha).0
}

/// Plug-in estimate of the exponential utility from samples.
pub fn exponential_utility_estimate(samples: &[f64], theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples for exponential utility".into()));
    }
    let scale = -theta / 2.0;
    let exponents: Vec<f64> = samples.iter().map(|z| scale * z).collect();
    let weights = vec![1.0; samples.len()];
    Ok(log_mean_exp(&exponents, &weights) / scale)
}

/// Tail statistics at one risk level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    pub alpha: f64,
    pub var: f64,
    pub cvar: f64,
    /// `mean(max(z - VaR, 0))`
    pub exceedance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased (divisor `n - 1`).
    pub variance: f64,
    pub tails: Vec<TailStats>,
}

impl EmpiricalStats {
    pub fn at(&self, alpha: f64) -> Option<&TailStats> {
        self.tails.iter().find(|t| t.alpha == alpha)
    }
}

pub fn empirical_stats(samples: &[f64], alphas: &[f64]) -> Result<EmpiricalStats> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::VarianceUnavailable(n));
    }
    let mean = mean(samples);
    let variance = samples.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (n - 1) as f64;
    let sorted = sorted_copy(samples);
    let tails = alphas
        .iter()
        .map(|&alpha| {
            check_alpha(alpha)?;
            let var = sorted[var_index(n, alpha)];
            let exceedance = sorted.iter().map(|z| (z - var).max(0.0)).sum::<f64>() / n as f64;
            Ok(TailStats {
                alpha,
                var,
                cvar: sorted_cvar(&sorted, alpha),
                exceedance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EmpiricalStats {
        n,
        mean,
        variance,
        tails,
    })
}

/// `mean + γ · variance`.
pub fn certainty_equivalent(mean: f64, variance: f64, gamma: f64) -> Result<f64> {
    if variance < 0.0 {
        return Err(Error::Domain(format!("negative variance {variance}")));
    }
    if gamma < 0.0 {
        return Err(Error::InvalidParameter(format!("gamma {gamma} must be >= 0")));
    }
    Ok(mean + gamma * variance)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1]")))
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta < 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("theta {theta} must be negative")))
    }
}

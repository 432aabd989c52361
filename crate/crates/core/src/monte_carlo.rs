//! Closed-loop simulation of tabular policies.
//!
//! Trajectory `i` of a run with seed `s` draws from ChaCha8 seeded with `s`
//! on stream `i`, so results do not depend on how trajectories are scheduled
//! across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::cvar::deploy_from;
use crate::dp::{CvarInnerSolution, EuSolution};
use crate::error::{Error, Result};
use crate::grid::State;
use crate::model::{PolicyTable, SystemModel};
use crate::risk::{empirical_stats, CostSampleSet, TailStats};

/// Random stream for trajectory `index` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `n` independent jobs in parallel and keeps them in index order.
pub fn simulate_with<F>(n: usize, seed: u64, job: F) -> Result<CostSampleSet>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one trajectory".into()));
    }
    let samples: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| job(&mut trajectory_rng(seed, i)))
        .collect();
    CostSampleSet::new(samples, seed)
}

/// Total cost of one run of a Markov policy, looking controls up at the
/// nearest grid node.
pub fn rollout<R: Rng + ?Sized>(model: &SystemModel, policy: &PolicyTable, x0: &State, rng: &mut R) -> f64 {
    let dist = model.disturbance();
    let mut x = model.clamp_state(x0);
    let mut cost = 0.0;
    for t in 0..model.horizon() {
        let u = model.controls()[policy.lookup(t, &x)];
        let w = dist.support()[dist.index_for(rng.random::<f64>())];
        cost += model.stage_cost(&x, u);
        x = model.step(&x, u, w);
    }
    cost + model.terminal_cost(&x)
}

fn check_start(model: &SystemModel, x0: &State) -> Result<()> {
    if !model.grid().contains(x0) {
        return Err(Error::InvalidParameter(format!(
            "initial state {x0:?} lies outside the grid"
        )));
    }
    Ok(())
}

pub fn simulate_policy(model: &SystemModel, policy: &PolicyTable, x0: &State, n: usize, seed: u64) -> Result<CostSampleSet> {
    check_start(model, x0)?;
    simulate_with(n, seed, |rng| rollout(model, policy, x0, rng))
}

pub fn simulate_eu(model: &SystemModel, solution: &EuSolution, x0: &State, n: usize, seed: u64) -> Result<CostSampleSet> {
    simulate_policy(model, &solution.policy, x0, n, seed)
}

pub fn simulate_cvar(
    model: &SystemModel,
    inner: &CvarInnerSolution,
    alpha: f64,
    x0: &State,
    n: usize,
    seed: u64,
) -> Result<CostSampleSet> {
    check_start(model, x0)?;
    let (_, s0) = inner.optimal_at(alpha, x0)?;
    simulate_with(n, seed, |rng| deploy_from(model, inner, x0, s0, rng).cost)
}

/// Summary statistics of one simulated ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub param: f64,
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub tails: Vec<TailStats>,
}

/// One row per parameter value, sorted by parameter.
pub fn tradeoff_table(sets: &[(f64, CostSampleSet)], alphas: &[f64]) -> Result<Vec<TradeoffRow>> {
    if sets.is_empty() {
        return Err(Error::EmptyInput("no sample sets".into()));
    }
    let mut rows = sets
        .iter()
        .map(|(param, set)| {
            let stats = empirical_stats(set.samples(), alphas)?;
            Ok(TradeoffRow {
                param: *param,
                n: stats.n,
                mean: stats.mean,
                variance: stats.variance,
                tails: stats.tails,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.param.total_cmp(&b.param));
    Ok(rows)
}

/// Bootstrap standard errors of several statistics of `samples`.
///
/// Each of the `resamples` replicates draws `n` indices with replacement from
/// its own stream and evaluates every statistic on the same replicate.
pub fn bootstrap_se<F>(samples: &[f64], resamples: usize, seed: u64, stats: F) -> Vec<f64>
where
    F: Fn(&mut [f64]) -> Vec<f64> + Sync,
{
    let n = samples.len();
    let reps: Vec<Vec<f64>> = (0..resamples as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = trajectory_rng(seed, b);
            let mut draw: Vec<f64> = (0..n).map(|_| samples[rng.random_range(0..n)]).collect();
            stats(&mut draw)
        })
        .collect();
    let k = reps.first().map_or(0, Vec::len);
    (0..k)
        .map(|j| {
            let m = reps.iter().map(|r| r[j]).sum::<f64>() / resamples as f64;
            let v = reps.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (resamples as f64 - 1.0);
            v.sqrt()
        })
        .collect()
}

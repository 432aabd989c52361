//! Backward dynamic programming on grids.
//!
//! All solvers share [`Transitions`], which caches for every grid node and
//! control the stage cost and the interpolation stencil of each successor
//! state. A time step is a barrier; the nodes within a step are solved in
//! parallel against the immutable table of the following step.

pub mod cvar;
pub mod eu;
pub mod neutral;

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::Result;
use crate::grid::{Grid, Stencil};
use crate::model::{PolicyTable, SystemModel, ValueTable};

pub use cvar::{
    build_s_grid, cvar_inner_backup, deploy_augmented_policy, outer_minimize, solve_cvar_inner,
    solve_cvar_inner_with_budget, CvarInnerSolution, CvarValue, Trajectory, DEFAULT_MEMORY_BUDGET,
};
pub use eu::{eu_backup, solve_eu, stable_theta_probe, EuSolution, EuVariant, ThetaStatus};
pub use neutral::{cvar_upper_bound, solve_risk_neutral, NeutralSolution};

/// Stage costs and successor stencils for every `(node, control, disturbance)`.
pub(crate) struct Transitions {
    n_controls: usize,
    n_disturbances: usize,
    probabilities: Vec<f64>,
    costs: Vec<f64>,
    stencils: Vec<Stencil>,
}

impl Transitions {
    pub(crate) fn new(model: &SystemModel) -> Self {
        let grid = model.grid();
        let controls = model.controls();
        let dist = model.disturbance();
        let per_node: Vec<(Vec<f64>, Vec<Stencil>)> = (0..grid.len())
            .into_par_iter()
            .map(|node| {
                let x = grid.node(node);
                let mut costs = Vec::with_capacity(controls.len());
                let mut stencils = Vec::with_capacity(controls.len() * dist.len());
                for &u in controls {
                    costs.push(model.stage_cost(&x, u));
                    for &w in dist.support() {
                        stencils.push(grid.stencil(&model.step(&x, u, w)));
                    }
                }
                (costs, stencils)
            })
            .collect();
        let (costs, stencils): (Vec<_>, Vec<_>) = per_node.into_iter().unzip();
        Self {
            n_controls: controls.len(),
            n_disturbances: dist.len(),
            probabilities: dist.probabilities().to_vec(),
            costs: costs.concat(),
            stencils: stencils.concat(),
        }
    }

    pub(crate) fn n_controls(&self) -> usize {
        self.n_controls
    }

    pub(crate) fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub(crate) fn cost(&self, node: usize, u: usize) -> f64 {
        self.costs[node * self.n_controls + u]
    }

    pub(crate) fn successors(&self, node: usize, u: usize) -> &[Stencil] {
        let start = (node * self.n_controls + u) * self.n_disturbances;
        &self.stencils[start..start + self.n_disturbances]
    }
}

/// Runs the backward recursion from `terminal` over `horizon` steps.
///
/// `backup(t, node, u, next)` returns the value of applying control `u` at
/// `node` given the table `next` of step `t + 1`. Ties between controls go to
/// the smallest index. Errors are reported for the first failing node in
/// index order so that the outcome does not depend on scheduling.
pub(crate) fn backward<F>(
    grid: Arc<Grid>,
    horizon: usize,
    n_controls: usize,
    terminal: Vec<f64>,
    backup: F,
) -> Result<(Vec<ValueTable>, PolicyTable)>
where
    F: Fn(usize, usize, usize, &[f64]) -> Result<f64> + Sync,
{
    let n = grid.len();
    let mut values = vec![Vec::new(); horizon + 1];
    let mut policy = vec![Vec::new(); horizon];
    values[horizon] = terminal;
    for t in (0..horizon).rev() {
        let next = &values[t + 1];
        let solved: Vec<Result<(f64, u16)>> = (0..n)
            .into_par_iter()
            .map(|node| {
                let mut best = (f64::INFINITY, 0u16);
                for u in 0..n_controls {
                    let v = backup(t, node, u, next)?;
                    if v < best.0 {
                        best = (v, u as u16);
                    }
                }
                Ok(best)
            })
            .collect();
        let solved = solved.into_iter().collect::<Result<Vec<_>>>()?;
        let (v, p): (Vec<f64>, Vec<u16>) = solved.into_iter().unzip();
        values[t] = v;
        policy[t] = p;
    }
    let tables = values
        .into_iter()
        .enumerate()
        .map(|(t, v)| ValueTable::new(t, Arc::clone(&grid), v))
        .collect::<Result<Vec<_>>>()?;
    Ok((tables, PolicyTable::new(grid, policy)))
}

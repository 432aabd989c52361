//! CVaR optimal control by augmenting the state with a running budget `s`.
//!
//! The inner problem computes `J_t(x, s) = min E max{Z′_t − s, 0}` on the
//! product of the state grid and an `s` axis over `[−ā, ā]`. The optimal CVaR
//! then follows from a scan over `s ∈ [0, ā]`:
//! `J*_α(x) = b̲ + min_s { s + J_0(x, s)/α }`.
//!
//! For `s ≤ 0` the inner value is exactly affine, `J_t(x, s) = J′_t(x) − s`,
//! so budgets that fall below the axis are extrapolated with slope −1 rather
//! than clamped. Budgets above `ā` are clamped, where the value is zero.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use super::{backward, Transitions};
use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::model::{PolicyTable, SystemModel, ValueTable};
use crate::risk::check_alpha;

/// Default refusal threshold for the estimated size of the inner solution.
pub const DEFAULT_MEMORY_BUDGET: u64 = 8 << 30;

const TIE_TOLERANCE: f64 = 1e-12;

/// Budget axis over `[−ā, ā]`.
///
/// `resolution` is the number of cells on `[0, ā]`; the negative half gets
/// half as many. Both `0` and `ā` are exact nodes.
pub fn build_s_grid(model: &SystemModel, resolution: usize) -> Result<Grid> {
    s_axis(model.derived_bounds().1, resolution)
}

pub(crate) fn s_axis(a_bar: f64, resolution: usize) -> Result<Grid> {
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!(
            "s-grid resolution must be at least 2, got {resolution}"
        )));
    }
    if !(a_bar > 0.0) || !a_bar.is_finite() {
        return Err(Error::DegenerateModel(format!(
            "cost range ā = {a_bar} leaves no budget axis"
        )));
    }
    let mut axis = Grid::uniform_axis(-a_bar, 0.0, resolution.div_ceil(2));
    axis.pop();
    axis.extend(Grid::uniform_axis(0.0, a_bar, resolution));
    Grid::new(vec![axis])
}

/// Where a budget falls on the `s` axis: cell, upper weight, and the amount
/// by which it lies below the first node.
#[inline]
fn locate_budget(axis: &[f64], s: f64) -> (usize, f64, f64) {
    let last = axis.len() - 1;
    if s <= axis[0] {
        return (0, 0.0, axis[0] - s);
    }
    if s >= axis[last] {
        return (last - 1, 1.0, 0.0);
    }
    let hi = axis.partition_point(|&v| v <= s).clamp(1, last);
    let lo = hi - 1;
    (lo, (s - axis[lo]) / (axis[hi] - axis[lo]), 0.0)
}

/// Value of an augmented table at `(x, s)` with the extrapolation rule above.
pub(crate) fn interpolate_augmented(state_grid: &Grid, s_axis: &[f64], values: &[f64], x: &State, s: f64) -> f64 {
    let ns = s_axis.len();
    let (lo, t, below) = locate_budget(s_axis, s);
    state_grid
        .stencil(x)
        .iter()
        .map(|(xc, w)| {
            let base = xc * ns + lo;
            w * ((1.0 - t) * values[base] + t * values[base + 1])
        })
        .sum::<f64>()
        + below
}

#[derive(Clone, Debug)]
pub struct CvarInnerSolution {
    pub lower_bound: f64,
    pub a_bar: f64,
    state_grid: Arc<Grid>,
    s_grid: Grid,
    augmented: Arc<Grid>,
    /// `J_t` over the augmented grid, indexed by time; the budget varies fastest.
    pub tables: Vec<ValueTable>,
    pub policy: PolicyTable,
}

impl CvarInnerSolution {
    pub fn state_grid(&self) -> &Grid {
        &self.state_grid
    }

    pub fn s_grid(&self) -> &Grid {
        &self.s_grid
    }

    pub fn s_axis(&self) -> &[f64] {
        self.s_grid.axis(0)
    }

    pub fn augmented_grid(&self) -> &Grid {
        &self.augmented
    }

    /// `J_t(x, s)` at an arbitrary point.
    pub fn inner_value(&self, t: usize, x: &State, s: f64) -> f64 {
        interpolate_augmented(&self.state_grid, self.s_axis(), self.tables[t].values(), x, s)
    }

    fn zero_index(&self) -> usize {
        self.s_axis().partition_point(|&s| s < 0.0)
    }

    /// `(W*, s*)` for one column `J_0(x, ·)` sampled on the `s` axis.
    fn minimize_column(&self, column: impl Fn(usize) -> f64, alpha: f64) -> (f64, f64) {
        let axis = self.s_axis();
        let range = self.zero_index()..axis.len();
        let objective = |j: usize| axis[j] + column(j) / alpha;
        let best = range.clone().map(objective).fold(f64::INFINITY, f64::min);
        let tol = TIE_TOLERANCE * (1.0 + best.abs());
        let j = range
            .clone()
            .find(|&j| objective(j) <= best + tol)
            .expect("non-empty budget range");
        (best, axis[j])
    }

    /// Optimal CVaR of the total cost and its minimizing budget from `x`.
    pub fn optimal_at(&self, alpha: f64, x: &State) -> Result<(f64, f64)> {
        check_alpha(alpha)?;
        let ns = self.s_axis().len();
        let stencil = self.state_grid.stencil(x);
        let j0 = self.tables[0].values();
        let (w, s) = self.minimize_column(
            |j| stencil.iter().map(|(xc, wt)| wt * j0[xc * ns + j]).sum(),
            alpha,
        );
        Ok((self.lower_bound + w, s))
    }
}

/// Optimal CVaR over the state grid for one α.
#[derive(Clone, Debug)]
pub struct CvarValue {
    pub alpha: f64,
    /// `J*_α = b̲ + W*_α` at every state node.
    pub values: ValueTable,
    /// Smallest minimizing budget `s*_{α,x}` at every state node.
    pub budgets: Vec<f64>,
}

/// One step of the inner recursion at an arbitrary point.
pub fn cvar_inner_backup(
    model: &SystemModel,
    s_grid: &Grid,
    next: &ValueTable,
    x: &State,
    s: f64,
    u: f64,
) -> Result<f64> {
    let axis = s_grid.axis(0);
    if next.values().len() != model.grid().len() * axis.len() {
        return Err(Error::GridMismatch(
            "table does not match the augmented grid".into(),
        ));
    }
    let budget = s - model.shifted_stage_cost(x, u);
    Ok(model
        .disturbance()
        .iter()
        .map(|(w, p)| {
            let y = model.step(x, u, w);
            p * interpolate_augmented(model.grid(), axis, next.values(), &y, budget)
        })
        .sum())
}

/// Bytes needed for the inner solution of `model` on an `s` axis of `ns` nodes.
pub fn inner_memory_estimate(model: &SystemModel, ns: usize) -> u64 {
    let nodes = (model.grid().len() * ns) as u64;
    let steps = model.horizon() as u64;
    let tables = (steps + 1) * nodes * 8;
    let policy = steps * nodes * 2;
    let transitions = (model.grid().len() * model.controls().len() * model.disturbance().len()) as u64
        * std::mem::size_of::<crate::grid::Stencil>() as u64;
    tables + policy + transitions
}

pub fn solve_cvar_inner(model: &SystemModel, s_resolution: usize) -> Result<CvarInnerSolution> {
    solve_cvar_inner_with_budget(model, s_resolution, DEFAULT_MEMORY_BUDGET)
}

pub fn solve_cvar_inner_with_budget(
    model: &SystemModel,
    s_resolution: usize,
    memory_budget: u64,
) -> Result<CvarInnerSolution> {
    let s_grid = build_s_grid(model, s_resolution)?;
    let required = inner_memory_estimate(model, s_grid.len());
    if required > memory_budget {
        return Err(Error::MemoryBudget {
            required,
            budget: memory_budget,
        });
    }

    let (lower_bound, a_bar) = model.derived_bounds();
    let state_grid = model.shared_grid();
    let mut axes = state_grid.axes().to_vec();
    axes.push(s_grid.axis(0).to_vec());
    let augmented = Arc::new(Grid::new(axes)?);

    let axis = s_grid.axis(0);
    let ns = axis.len();
    let terminal: Vec<f64> = state_grid
        .nodes()
        .flat_map(|x| {
            let c = model.shifted_terminal_cost(&x);
            axis.iter().map(move |&s| (c - s).max(0.0))
        })
        .collect();

    let trans = Transitions::new(model);
    let probs = trans.probabilities();
    let shift = model.cost_lower();
    let (tables, policy) = backward(
        Arc::clone(&augmented),
        model.horizon(),
        trans.n_controls(),
        terminal,
        |_, node, u, next| {
            let (xn, sj) = (node / ns, node % ns);
            let budget = axis[sj] - (trans.cost(xn, u) - shift);
            let (lo, t, below) = locate_budget(axis, budget);
            let expected: f64 = trans
                .successors(xn, u)
                .iter()
                .zip(probs)
                .map(|(stencil, p)| {
                    p * stencil
                        .iter()
                        .map(|(xc, w)| {
                            let base = xc * ns + lo;
                            w * ((1.0 - t) * next[base] + t * next[base + 1])
                        })
                        .sum::<f64>()
                })
                .sum();
            Ok(expected + below)
        },
    )?;

    Ok(CvarInnerSolution {
        lower_bound,
        a_bar,
        state_grid,
        s_grid,
        augmented,
        tables,
        policy,
    })
}

/// Outer minimization over the budget at every state node.
pub fn outer_minimize(inner: &CvarInnerSolution, alpha: f64) -> Result<CvarValue> {
    check_alpha(alpha)?;
    let ns = inner.s_axis().len();
    let j0 = inner.tables[0].values();
    let (w, budgets): (Vec<f64>, Vec<f64>) = (0..inner.state_grid.len())
        .into_par_iter()
        .map(|xn| inner.minimize_column(|j| j0[xn * ns + j], alpha))
        .unzip();
    let b = inner.lower_bound;
    let values = ValueTable::new(
        0,
        Arc::clone(&inner.state_grid),
        w.into_iter().map(|w| b + w).collect(),
    )?;
    Ok(CvarValue {
        alpha,
        values,
        budgets,
    })
}

/// A realized closed-loop trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub budgets: Vec<f64>,
    pub controls: Vec<f64>,
    /// Total raw cost `Z`.
    pub cost: f64,
}

/// Runs the augmented policy from `x0`, starting from the optimal budget.
///
/// The budget follows `s ← s − c′(x, u)` exactly; the control is read at the
/// augmented node nearest to `(x, s)`.
pub fn deploy_augmented_policy<R: Rng + ?Sized>(
    model: &SystemModel,
    inner: &CvarInnerSolution,
    alpha: f64,
    x0: &State,
    rng: &mut R,
) -> Result<Trajectory> {
    let (_, s0) = inner.optimal_at(alpha, x0)?;
    Ok(deploy_from(model, inner, x0, s0, rng))
}

pub(crate) fn deploy_from<R: Rng + ?Sized>(
    model: &SystemModel,
    inner: &CvarInnerSolution,
    x0: &State,
    s0: f64,
    rng: &mut R,
) -> Trajectory {
    let n = model.horizon();
    let dist = model.disturbance();
    let mut x = model.clamp_state(x0);
    let mut s = s0;
    let mut traj = Trajectory {
        states: Vec::with_capacity(n + 1),
        budgets: Vec::with_capacity(n + 1),
        controls: Vec::with_capacity(n),
        cost: 0.0,
    };
    for t in 0..n {
        let u = model.controls()[inner.policy.lookup(t, &x.with_appended(s))];
        let w = dist.support()[dist.index_for(rng.random::<f64>())];
        traj.states.push(x);
        traj.budgets.push(s);
        traj.controls.push(u);
        traj.cost += model.stage_cost(&x, u);
        s -= model.shifted_stage_cost(&x, u);
        x = model.step(&x, u, w);
    }
    traj.cost += model.terminal_cost(&x);
    traj.states.push(x);
    traj.budgets.push(s);
    traj
}

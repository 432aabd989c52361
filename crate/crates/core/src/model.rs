//! Finite-horizon stochastic control systems on grids.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::risk::{FiniteDistribution, PROBABILITY_TOLERANCE};

pub type Dynamics = Arc<dyn Fn(&State, f64, f64) -> State + Send + Sync>;
pub type StageCost = Arc<dyn Fn(&State, f64) -> f64 + Send + Sync>;
pub type TerminalCost = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// I.i.d. disturbance with finite support, independent of state and control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceTable {
    support: Vec<f64>,
    probabilities: Vec<f64>,
}

impl DisturbanceTable {
    pub fn new(support: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidModel("disturbance table has no atoms".into()));
        }
        if support.len() != probabilities.len() {
            return Err(Error::InvalidModel(format!(
                "disturbance support has {} atoms but {} probabilities",
                support.len(),
                probabilities.len()
            )));
        }
        if support.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidModel("non-finite disturbance atom".into()));
        }
        if probabilities.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidModel("disturbance probability outside [0, 1]".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::InvalidModel(format!(
                "disturbance probabilities sum to {total}"
            )));
        }
        Ok(Self {
            support,
            probabilities,
        })
    }

    pub fn point(w: f64) -> Self {
        Self {
            support: vec![w],
            probabilities: vec![1.0],
        }
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.probabilities.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(w, p)| p * w).sum()
    }

    fn central_moment(&self, k: i32) -> f64 {
        let m = self.mean();
        self.iter().map(|(w, p)| p * (w - m).powi(k)).sum()
    }

    pub fn variance(&self) -> f64 {
        self.central_moment(2)
    }

    pub fn skewness(&self) -> f64 {
        self.central_moment(3) / self.variance().powf(1.5)
    }

    /// Atom index selected by inverse-CDF lookup of a uniform draw `u ∈ [0, 1)`.
    pub fn index_for(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (k, &p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        // Rounding left the cumulative sum just under 1; take the last atom with mass.
        self.probabilities
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.len() - 1)
    }

    pub fn to_distribution(&self) -> Result<FiniteDistribution> {
        FiniteDistribution::from_parts(&self.support, &self.probabilities)
    }
}

/// Lower bound on the total cost and width of its range for a horizon of `horizon` stages.
pub fn derived_bounds(horizon: usize, cost_lower: f64, cost_upper: f64) -> Result<(f64, f64)> {
    if cost_lower > cost_upper {
        return Err(Error::InvalidModel(format!(
            "cost lower bound {cost_lower} exceeds upper bound {cost_upper}"
        )));
    }
    let stages = (horizon + 1) as f64;
    Ok((stages * cost_lower, (cost_upper - cost_lower) * stages))
}

/// Everything needed to build a [`SystemModel`].
pub struct ModelParts {
    pub name: String,
    pub horizon: usize,
    pub grid: Grid,
    pub controls: Vec<f64>,
    pub disturbance: DisturbanceTable,
    pub dynamics: Dynamics,
    pub stage_cost: StageCost,
    pub terminal_cost: TerminalCost,
}

#[derive(Clone)]
pub struct SystemModel {
    name: String,
    horizon: usize,
    grid: Arc<Grid>,
    controls: Vec<f64>,
    disturbance: DisturbanceTable,
    dynamics: Dynamics,
    stage_cost: StageCost,
    terminal_cost: TerminalCost,
    cost_lower: f64,
    cost_upper: f64,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("shape", &self.grid.shape())
            .field("controls", &self.controls)
            .field("disturbance", &self.disturbance)
            .field("cost_lower", &self.cost_lower)
            .field("cost_upper", &self.cost_upper)
            .finish()
    }
}

impl SystemModel {
    /// Validates the parts and sweeps every grid node and control to find the
    /// cost bounds.
    pub fn new(parts: ModelParts) -> Result<Self> {
        let ModelParts {
            name,
            horizon,
            grid,
            controls,
            disturbance,
            dynamics,
            stage_cost,
            terminal_cost,
        } = parts;
        if horizon == 0 {
            return Err(Error::InvalidModel("horizon must be positive".into()));
        }
        if controls.is_empty() {
            return Err(Error::InvalidModel("control set is empty".into()));
        }
        if controls.len() > u16::MAX as usize {
            return Err(Error::InvalidModel("too many controls".into()));
        }
        if controls.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidModel("non-finite control value".into()));
        }

        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in grid.nodes() {
            let terminal = terminal_cost(&x);
            let stage = controls.iter().map(|&u| stage_cost(&x, u));
            for c in std::iter::once(terminal).chain(stage) {
                if !c.is_finite() {
                    return Err(Error::InvalidModel(format!("non-finite cost at {x:?}")));
                }
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }

        Ok(Self {
            name,
            horizon,
            grid: Arc::new(grid),
            controls,
            disturbance,
            dynamics,
            stage_cost,
            terminal_cost,
            cost_lower: lo,
            cost_upper: hi,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<Grid> {
        Arc::clone(&self.grid)
    }

    pub fn controls(&self) -> &[f64] {
        &self.controls
    }

    pub fn disturbance(&self) -> &DisturbanceTable {
        &self.disturbance
    }

    /// The same system with a different disturbance table.
    pub fn with_disturbance(&self, disturbance: DisturbanceTable) -> Self {
        Self {
            disturbance,
            ..self.clone()
        }
    }

    pub fn cost_lower(&self) -> f64 {
        self.cost_lower
    }

    pub fn cost_upper(&self) -> f64 {
        self.cost_upper
    }

    /// `(b̲, ā)`: the lower bound of the total cost and the width of its range.
    pub fn derived_bounds(&self) -> (f64, f64) {
        derived_bounds(self.horizon, self.cost_lower, self.cost_upper)
            .expect("sweep yields ordered bounds")
    }

    pub fn clamp_state(&self, x: &State) -> State {
        self.grid.clamp(x)
    }

    /// Next state, projected onto the grid's bounding box.
    pub fn step(&self, x: &State, u: f64, w: f64) -> State {
        self.grid.clamp(&(self.dynamics)(x, u, w))
    }

    pub fn stage_cost(&self, x: &State, u: f64) -> f64 {
        (self.stage_cost)(x, u)
    }

    pub fn terminal_cost(&self, x: &State) -> f64 {
        (self.terminal_cost)(x)
    }

    /// Stage cost shifted to be non-negative.
    pub fn shifted_stage_cost(&self, x: &State, u: f64) -> f64 {
        self.stage_cost(x, u) - self.cost_lower
    }

    pub fn shifted_terminal_cost(&self, x: &State) -> f64 {
        self.terminal_cost(x) - self.cost_lower
    }
}

/// Values over the nodes of a grid at one time step.
#[derive(Clone, Debug)]
pub struct ValueTable {
    pub t: usize,
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(t: usize, grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { t, grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, node: usize) -> f64 {
        self.values[node]
    }

    /// Multilinear interpolation; points outside the box are clamped first.
    pub fn interpolate(&self, point: &State) -> f64 {
        self.grid.interpolate(&self.values, point)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            t: self.t,
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Control indices per time step over the nodes of a grid.
#[derive(Clone, Debug)]
pub struct PolicyTable {
    grid: Arc<Grid>,
    steps: Vec<Vec<u16>>,
}

impl PolicyTable {
    pub(crate) fn new(grid: Arc<Grid>, steps: Vec<Vec<u16>>) -> Self {
        debug_assert!(steps.iter().all(|s| s.len() == grid.len()));
        Self { grid, steps }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn step(&self, t: usize) -> &[u16] {
        &self.steps[t]
    }

    pub fn control_index(&self, t: usize, node: usize) -> usize {
        self.steps[t][node] as usize
    }

    /// Control index at the node nearest to `point`.
    pub fn lookup(&self, t: usize, point: &State) -> usize {
        self.control_index(t, self.grid.nearest(point))
    }
}

//! Grid-based solvers for finite-horizon risk-averse optimal control.
//!
//! Two risk-averse criteria are supported: the exponential utility of the
//! total cost, solved by a state-space recursion, and its Conditional
//! Value-at-Risk, solved exactly by augmenting the state with a running cost
//! budget. A risk-neutral baseline, Monte Carlo evaluation of the resulting
//! policies, and risk-sensitive safe sets are built on top.

pub mod dp;
pub mod error;
pub mod grid;
pub mod model;
pub mod monte_carlo;
pub mod risk;
pub mod run;
pub mod safe_sets;
pub mod systems;

pub use error::{Error, Result};
pub use grid::{Grid, State};
pub use model::{derived_bounds, DisturbanceTable, ModelParts, PolicyTable, SystemModel, ValueTable};

//! Tiny integer-valued systems small enough for exhaustive enumeration.

use std::sync::Arc;

use crate::grid::{Grid, State};
use crate::model::{DisturbanceTable, ModelParts, SystemModel};

/// Three states, two controls, two disturbances, three steps.
///
/// `x' = clamp(x − u + w, 0, 2)` with `w = 2` w.p. 0.2, stage cost `x + 0.7u`,
/// terminal cost `x`.
pub fn three_state() -> SystemModel {
    SystemModel::new(ModelParts {
        name: "toy3".into(),
        horizon: 3,
        grid: Grid::uniform_1d(0.0, 2.0, 2).expect("valid grid"),
        controls: vec![0.0, 1.0],
        disturbance: DisturbanceTable::new(vec![0.0, 2.0], vec![0.8, 0.2]).expect("valid table"),
        dynamics: Arc::new(|x, u, w| State::scalar(x[0] - u + w)),
        stage_cost: Arc::new(|x, u| x[0] + 0.7 * u),
        terminal_cost: Arc::new(|x| x[0]),
    })
    .expect("valid model")
}

/// Two states, two controls, two disturbances, two steps, integer costs.
///
/// `x' = clamp(x + w − u, 0, 1)` with `w = 1` w.p. 0.4, stage cost `3x + u`,
/// terminal cost `3x`.
pub fn two_state() -> SystemModel {
    SystemModel::new(ModelParts {
        name: "toy2".into(),
        horizon: 2,
        grid: Grid::uniform_1d(0.0, 1.0, 1).expect("valid grid"),
        controls: vec![0.0, 1.0],
        disturbance: DisturbanceTable::new(vec![0.0, 1.0], vec![0.6, 0.4]).expect("valid table"),
        dynamics: Arc::new(|x, u, w| State::scalar(x[0] + w - u)),
        stage_cost: Arc::new(|x, u| 3.0 * x[0] + u),
        terminal_cost: Arc::new(|x| 3.0 * x[0]),
    })
    .expect("valid model")
}

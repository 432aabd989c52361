//! Two stormwater tanks joined by a reversible pump.
//!
//! Runoff enters both tanks. Tank 2 drains to the storm sewer above its sump,
//! and both tanks spill to the combined sewer above their outlet elevations.
//! The cost is the volume spilled to the combined sewer, in hundreds of ft³.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::moment_matched;
use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::model::{DisturbanceTable, ModelParts, SystemModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StormwaterParams {
    /// Surface areas (ft²).
    pub area: [f64; 2],
    pub discharge_coeff: f64,
    /// Step length (s).
    pub dt: f64,
    /// Half-width of the pump start-up ramp (ft).
    pub eps: f64,
    pub gravity: f64,
    /// Maximum water levels (ft).
    pub k_max: [f64; 2],
    pub cs_outlets: [f64; 2],
    pub pump_max: f64,
    /// Combined sewer outlet radii (ft).
    pub r_cs: [f64; 2],
    pub r_storm: f64,
    pub z_pump: f64,
    pub z_cs: [f64; 2],
    pub z_storm: f64,
}

impl Default for StormwaterParams {
    fn default() -> Self {
        Self {
            area: [30000.0, 10000.0],
            discharge_coeff: 0.61,
            dt: 300.0,
            eps: 1.0 / 12.0,
            gravity: 32.2,
            k_max: [5.5, 7.0],
            cs_outlets: [3.0, 1.0],
            pump_max: 10.0,
            r_cs: [0.25, 0.375],
            r_storm: 1.0 / 3.0,
            z_pump: 1.0,
            z_cs: [3.0, 4.0],
            z_storm: 1.0,
        }
    }
}

impl StormwaterParams {
    fn orifice(&self, radius: f64, head: f64) -> f64 {
        self.discharge_coeff * PI * radius * radius * (2.0 * self.gravity * head).sqrt()
    }

    /// Outflow through a regulator that opens linearly from `z` to `k`.
    fn regulated(q_max: f64, k: f64, z: f64, x: f64) -> f64 {
        q_max - q_max / (k - z) * (k - x.min(k)).min(k - z)
    }

    /// Maximum flow through one combined sewer outlet of tank `i`.
    pub fn q_cs_max(&self, i: usize) -> f64 {
        self.orifice(self.r_cs[i], self.k_max[i] - self.z_cs[i])
    }

    pub fn q_storm_max(&self) -> f64 {
        self.orifice(self.r_storm, self.k_max[1] - self.z_storm)
    }
}

/// Flow from tank `i` (0 or 1) to the combined sewer at level `x` (cfs).
pub fn q_cso(p: &StormwaterParams, i: usize, x: f64) -> f64 {
    StormwaterParams::regulated(p.q_cs_max(i), p.k_max[i], p.z_cs[i], x) * p.cs_outlets[i]
}

/// Flow from tank 2 to the storm sewer (cfs).
pub fn q_storm(p: &StormwaterParams, x2: f64) -> f64 {
    StormwaterParams::regulated(p.q_storm_max(), p.k_max[1], p.z_storm, x2)
}

/// Pump flow from tank 2 into tank 1 (cfs); negative `u` pumps the other way.
///
/// The pump is off when the source tank is below its sump and ramps up
/// linearly within `eps` of the sump.
pub fn pump_rate(p: &StormwaterParams, x: [f64; 2], u: f64) -> f64 {
    let lo = p.z_pump - p.eps;
    let hi = p.z_pump + p.eps;
    let ramp = |level: f64| u * p.pump_max / (2.0 * p.eps) * (level + p.eps - p.z_pump);
    let source = if u < 0.0 { x[0] } else { x[1] };
    if source < lo {
        0.0
    } else if source <= hi {
        ramp(source)
    } else {
        u * p.pump_max
    }
}

/// Total combined sewer volume over one step, in hundreds of ft³.
fn spill_cost(p: &StormwaterParams, x: &State) -> f64 {
    (q_cso(p, 0, x[0]) + q_cso(p, 1, x[1])) * p.dt * 0.01
}

fn next_state(p: &StormwaterParams, x: &State, u: f64, w: f64) -> State {
    let q = pump_rate(p, [x[0], x[1]], u);
    let f1 = (w - q_cso(p, 0, x[0]) + q) / p.area[0];
    let f2 = (w - q_cso(p, 1, x[1]) - q - q_storm(p, x[1])) / p.area[1];
    State::new(&[x[0] + f1 * p.dt, x[1] + f2 * p.dt])
}

/// Runoff (cfs) on `{2.0, 2.5, …, 6.5}` with mean 4.0, variance 1.2 and
/// skewness 0.72.
pub fn stormwater_disturbance() -> DisturbanceTable {
    let support: Vec<f64> = (0..10).map(|k| 2.0 + 0.5 * k as f64).collect();
    moment_matched(&support, 4.0, 1.2, 0.72).expect("attainable moments")
}

/// Resolution knobs; the defaults give the full-size problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StormwaterConfig {
    /// Spacing of the state grid on both axes (ft).
    pub grid_step: f64,
    pub horizon: usize,
}

impl Default for StormwaterConfig {
    fn default() -> Self {
        Self {
            grid_step: 0.1,
            horizon: 48,
        }
    }
}

pub fn make_stormwater() -> Result<SystemModel> {
    make_stormwater_with(&StormwaterConfig::default(), StormwaterParams::default(), stormwater_disturbance())
}

pub fn make_stormwater_with(
    config: &StormwaterConfig,
    params: StormwaterParams,
    disturbance: DisturbanceTable,
) -> Result<SystemModel> {
    let intervals = |k: f64| {
        let n = (k / config.grid_step).round();
        if n < 1.0 || ((n * config.grid_step) - k).abs() > 1e-9 * k {
            Err(Error::InvalidModel(format!(
                "grid step {} does not divide {k}",
                config.grid_step
            )))
        } else {
            Ok(n as usize)
        }
    };
    let grid = Grid::new(vec![
        Grid::uniform_axis(0.0, params.k_max[0], intervals(params.k_max[0])?),
        Grid::uniform_axis(0.0, params.k_max[1], intervals(params.k_max[1])?),
    ])?;
    let p = Arc::new(params);
    let (pd, pc, pt) = (Arc::clone(&p), Arc::clone(&p), Arc::clone(&p));
    SystemModel::new(ModelParts {
        name: "stormwater".into(),
        horizon: config.horizon,
        grid,
        controls: vec![-1.0, 0.0, 1.0],
        disturbance,
        dynamics: Arc::new(move |x, u, w| next_state(&pd, x, u, w)),
        stage_cost: Arc::new(move |x, _| spill_cost(&pc, x)),
        terminal_cost: Arc::new(move |x| spill_cost(&pt, x)),
    })
}

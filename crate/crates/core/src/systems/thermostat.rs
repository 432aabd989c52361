//! Room temperature under a cooling unit with bounded power.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::moment_matched;
use crate::error::Result;
use crate::grid::{Grid, State};
use crate::model::{DisturbanceTable, ModelParts, SystemModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermostatParams {
    /// Ambient temperature the room relaxes to (°C).
    pub b: f64,
    /// Thermal capacitance (kWh/°C).
    pub capacitance: f64,
    pub efficiency: f64,
    /// Power (kW).
    pub power: f64,
    /// Thermal resistance (°C/kW).
    pub resistance: f64,
    /// Step length (h).
    pub dt: f64,
    pub horizon: usize,
    /// Comfort band; cost is the distance outside it.
    pub band: (f64, f64),
    pub state_range: (f64, f64),
    pub state_intervals: usize,
    pub control_intervals: usize,
}

impl Default for ThermostatParams {
    fn default() -> Self {
        Self {
            b: 32.0,
            capacitance: 2.0,
            efficiency: 0.7,
            power: 14.0,
            resistance: 2.0,
            dt: 5.0 / 60.0,
            horizon: 12,
            band: (20.0, 21.0),
            state_range: (18.0, 23.0),
            state_intervals: 50,
            control_intervals: 10,
        }
    }
}

impl ThermostatParams {
    pub fn decay(&self) -> f64 {
        (-self.dt / (self.capacitance * self.resistance)).exp()
    }

    pub fn next(&self, x: f64, u: f64, w: f64) -> f64 {
        let a = self.decay();
        let drive = self.b - self.efficiency * self.resistance * self.power * u;
        a * x + (1.0 - a) * drive + w
    }

    pub fn cost(&self, x: f64) -> f64 {
        (x - self.band.1).max(self.band.0 - x)
    }
}

/// Right-skewed zero-mean noise on `{−0.3, −0.2, …, 0.6}` with standard
/// deviation 0.2 and skewness 1.
pub fn thermostat_disturbance() -> DisturbanceTable {
    let support: Vec<f64> = (0..10).map(|k| (k as f64 - 3.0) / 10.0).collect();
    moment_matched(&support, 0.0, 0.04, 1.0).expect("attainable moments")
}

pub fn make_thermostat() -> Result<SystemModel> {
    make_thermostat_with(ThermostatParams::default(), thermostat_disturbance())
}

pub fn make_thermostat_with(params: ThermostatParams, disturbance: DisturbanceTable) -> Result<SystemModel> {
    let grid = Grid::uniform_1d(params.state_range.0, params.state_range.1, params.state_intervals)?;
    let controls = Grid::uniform_axis(0.0, 1.0, params.control_intervals);
    let p = Arc::new(params);
    let (pd, pc, pt) = (Arc::clone(&p), Arc::clone(&p), Arc::clone(&p));
    SystemModel::new(ModelParts {
        name: "thermostat".into(),
        horizon: p.horizon,
        grid,
        controls,
        disturbance,
        dynamics: Arc::new(move |x, u, w| State::scalar(pd.next(x[0], u, w))),
        stage_cost: Arc::new(move |x, _| pc.cost(x[0])),
        terminal_cost: Arc::new(move |x| pt.cost(x[0])),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dynamics_match_hand_values() {
        let p = ThermostatParams::default();
        assert!((p.decay() - (-1.0f64 / 48.0).exp()).abs() < 1e-15);
        assert!((p.next(20.0, 0.0, 0.0) - 20.2474).abs() < 1e-4);
        assert!((p.next(20.0, 1.0, 0.0) - 19.8433).abs() < 1e-4);
    }

    #[test]
    fn cost_and_bounds() {
        let m = make_thermostat().unwrap();
        let x = |v| State::scalar(v);
        assert_eq!(m.stage_cost(&x(20.5), 0.3), -0.5);
        assert_eq!(m.stage_cost(&x(22.0), 0.0), 1.0);
        assert_eq!(m.cost_lower(), -0.5);
        assert_eq!(m.cost_upper(), 2.0);
        assert_eq!(m.derived_bounds(), (-6.5, 32.5));
        assert_eq!(m.grid().len(), 51);
        assert_eq!(m.controls().len(), 11);
        assert_eq!(m.controls()[3], 0.3);
    }

    #[test]
    fn disturbance_is_right_skewed() {
        let d = thermostat_disturbance();
        assert!(d.mean().abs() < 1e-12);
        assert!((d.variance() - 0.04).abs() < 1e-12);
        assert!((d.skewness() - 1.0).abs() < 1e-9);
    }
}

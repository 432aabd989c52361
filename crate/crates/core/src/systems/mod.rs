//! Benchmark systems.

mod pedagogical;
mod stormwater;
mod thermostat;
pub mod toy;

use nalgebra::{DMatrix, DVector};

pub use pedagogical::{pedagogical_curves, skewed_unit_disturbance, PedagogicalRow, Pedagogical};
pub use stormwater::{
    make_stormwater, make_stormwater_with, pump_rate, q_cso, q_storm, stormwater_disturbance,
    StormwaterConfig, StormwaterParams,
};
pub use thermostat::{make_thermostat, make_thermostat_with, thermostat_disturbance, ThermostatParams};

use crate::error::{Error, Result};
use crate::model::{DisturbanceTable, SystemModel};

/// Names accepted by [`by_name`].
pub const SYSTEMS: [&str; 2] = ["thermostat", "stormwater"];

pub fn by_name(name: &str) -> Result<SystemModel> {
    match name {
        "thermostat" => make_thermostat(),
        "stormwater" => make_stormwater(),
        other => Err(Error::InvalidParameter(format!(
            "unknown system {other:?}; expected one of {SYSTEMS:?}"
        ))),
    }
}

/// Probabilities on a fixed support matching mean, variance and skewness.
///
/// Among all non-negative weight vectors with the requested moments this picks
/// the one of smallest Euclidean norm, found by an active-set iteration that
/// pins offending weights to zero and re-solves the equality-constrained
/// least-norm problem on the rest.
pub fn moment_matched(support: &[f64], mean: f64, variance: f64, skewness: f64) -> Result<DisturbanceTable> {
    let n = support.len();
    let target = DVector::from_vec(vec![1.0, 0.0, variance, skewness * variance.powf(1.5)]);
    let mut free: Vec<bool> = vec![true; n];
    loop {
        let cols: Vec<usize> = (0..n).filter(|&k| free[k]).collect();
        if cols.len() < 4 {
            return Err(Error::InvalidModel("moments not attainable on this support".into()));
        }
        let a = DMatrix::from_fn(4, cols.len(), |i, j| (support[cols[j]] - mean).powi(i as i32));
        let gram = &a * a.transpose();
        let y = gram
            .lu()
            .solve(&target)
            .ok_or_else(|| Error::InvalidModel("singular moment system".into()))?;
        let p = a.transpose() * y;
        let (worst, &low) = p
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        if low >= 0.0 {
            let mut probs = vec![0.0; n];
            for (j, &k) in cols.iter().enumerate() {
                probs[k] = p[j];
            }
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|q| *q /= total);
            return DisturbanceTable::new(support.to_vec(), probs);
        }
        free[cols[worst]] = false;
    }
}

//! Exponential-utility optimal control.

use serde::{Deserialize, Serialize};

use super::{backward, Transitions};
use crate::error::{Error, Result};
use crate::grid::State;
use crate::model::{PolicyTable, SystemModel, ValueTable};
use crate::risk::check_theta;

/// Which cost the recursion is written in.
///
/// `Raw` works with the original costs and evaluates every expectation of
/// exponentials with the largest exponent factored out. `Nonnegative` works
/// with costs shifted by the lower bound and evaluates the expectation as is,
/// which overflows once `(−θ/2)·V′` leaves the floating-point range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EuVariant {
    Raw,
    Nonnegative,
}

impl EuVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            EuVariant::Raw => "raw",
            EuVariant::Nonnegative => "nonnegative",
        }
    }
}

impl std::str::FromStr for EuVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(EuVariant::Raw),
            "nonnegative" | "non-negative" => Ok(EuVariant::Nonnegative),
            other => Err(Error::InvalidParameter(format!("unknown EU variant {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EuSolution {
    pub theta: f64,
    pub variant: EuVariant,
    /// Cost offset added to the tables to recover raw values (`b̲` or 0).
    pub offset: f64,
    /// Value tables indexed by time, `tables[N]` being the terminal cost.
    pub tables: Vec<ValueTable>,
    pub policy: PolicyTable,
}

impl EuSolution {
    /// Optimal exponential utility of the total raw cost at every node.
    pub fn optimal_values(&self) -> ValueTable {
        let offset = self.offset;
        self.tables[0].map(|v| v + offset)
    }

    pub fn value_at(&self, x: &State) -> f64 {
        self.offset + self.tables[0].interpolate(x)
    }
}

/// `(−2/θ)·log Σ p_k exp((−θ/2)·v_k)`, or `None` if the result is not finite.
fn log_expectation(theta: f64, values: impl Iterator<Item = f64> + Clone, probs: &[f64], variant: EuVariant) -> Option<f64> {
    let scale = -theta / 2.0;
    let r = match variant {
        EuVariant::Raw => {
            let top = values.clone().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = values
                .zip(probs)
                .map(|(v, p)| p * (scale * (v - top)).exp_m1())
                .sum();
            top + sum.ln_1p() / scale
        }
        EuVariant::Nonnegative => {
            let sum: f64 = values.zip(probs).map(|(v, p)| p * (scale * v).exp_m1()).sum();
            sum.ln_1p() / scale
        }
    };
    r.is_finite().then_some(r)
}

/// One Bellman backup: cost of `u` at `x` plus the utility of the next value.
///
/// `next` holds raw values for [`EuVariant::Raw`] and shifted values for
/// [`EuVariant::Nonnegative`]; the stage cost is shifted accordingly.
pub fn eu_backup(
    model: &SystemModel,
    next: &ValueTable,
    theta: f64,
    x: &State,
    u: f64,
    variant: EuVariant,
) -> Result<f64> {
    check_theta(theta)?;
    let dist = model.disturbance();
    let values = dist.support().iter().map(|&w| next.interpolate(&model.step(x, u, w)));
    let cost = match variant {
        EuVariant::Raw => model.stage_cost(x, u),
        EuVariant::Nonnegative => model.shifted_stage_cost(x, u),
    };
    let node = model.grid().nearest(x);
    let control = model.controls().iter().position(|&c| c == u).unwrap_or(0);
    log_expectation(theta, values, dist.probabilities(), variant)
        .map(|v| cost + v)
        .filter(|v| v.is_finite())
        .ok_or(Error::NumericalInstability {
            theta,
            t: next.t.saturating_sub(1),
            node,
            control,
        })
}

pub fn solve_eu(model: &SystemModel, theta: f64, variant: EuVariant) -> Result<EuSolution> {
    check_theta(theta)?;
    let trans = Transitions::new(model);
    solve_with(model, &trans, theta, variant)
}

fn solve_with(model: &SystemModel, trans: &Transitions, theta: f64, variant: EuVariant) -> Result<EuSolution> {
    let grid = model.shared_grid();
    let shift = match variant {
        EuVariant::Raw => 0.0,
        EuVariant::Nonnegative => model.cost_lower(),
    };
    let terminal: Vec<f64> = grid.nodes().map(|x| model.terminal_cost(&x) - shift).collect();
    let probs = trans.probabilities();
    let (tables, policy) = backward(
        model.shared_grid(),
        model.horizon(),
        trans.n_controls(),
        terminal,
        |t, node, u, next| {
            let values = trans.successors(node, u).iter().map(|s| s.apply(next));
            log_expectation(theta, values, probs, variant)
                .map(|v| trans.cost(node, u) - shift + v)
                .filter(|v| v.is_finite())
                .ok_or(Error::NumericalInstability {
                    theta,
                    t,
                    node,
                    control: u,
                })
        },
    )?;
    let offset = match variant {
        EuVariant::Raw => 0.0,
        EuVariant::Nonnegative => model.derived_bounds().0,
    };
    Ok(EuSolution {
        theta,
        variant,
        offset,
        tables,
        policy,
    })
}

/// Outcome of trying to solve at one θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ThetaStatus {
    Stable,
    Unstable { t: usize, node: usize, control: usize },
}

impl ThetaStatus {
    pub fn is_stable(&self) -> bool {
        matches!(self, ThetaStatus::Stable)
    }
}

/// Attempts both variants at every θ and records which ones stay finite.
pub fn stable_theta_probe(model: &SystemModel, thetas: &[f64]) -> Result<Vec<(f64, ThetaStatus, ThetaStatus)>> {
    let trans = Transitions::new(model);
    let status = |theta, variant| match solve_with(model, &trans, theta, variant) {
        Ok(_) => Ok(ThetaStatus::Stable),
        Err(Error::NumericalInstability { t, node, control, .. }) => {
            Ok(ThetaStatus::Unstable { t, node, control })
        }
        Err(e) => Err(e),
    };
    thetas
        .iter()
        .map(|&theta| {
            check_theta(theta)?;
            Ok((theta, status(theta, EuVariant::Raw)?, status(theta, EuVariant::Nonnegative)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::{DisturbanceTable, ModelParts};
    use std::sync::Arc;

    fn walk(dist: DisturbanceTable, cost: f64) -> SystemModel {
        SystemModel::new(ModelParts {
            name: "walk".into(),
            horizon: 3,
            grid: Grid::uniform_1d(0.0, 4.0, 4).unwrap(),
            controls: vec![-1.0, 0.0, 1.0],
            disturbance: dist,
            dynamics: Arc::new(|x, u, w| State::scalar(x[0] + u + w)),
            stage_cost: Arc::new(move |x, u| cost * ((x[0] - 2.0).abs() + 0.1 * u.abs())),
            terminal_cost: Arc::new(move |x| cost * (x[0] - 2.0).abs()),
        })
        .unwrap()
    }

    #[test]
    fn backup_with_single_atom_is_deterministic() {
        let m = walk(DisturbanceTable::point(1.0), 1.0);
        let next = ValueTable::new(3, m.shared_grid(), vec![5.0, 1.0, 2.0, 7.0, 3.0]).unwrap();
        let v = eu_backup(&m, &next, -3.0, &State::scalar(1.0), 1.0, EuVariant::Raw).unwrap();
        assert!((v - (1.0 + 0.1 + 7.0)).abs() < 1e-12);
    }

    #[test]
    fn backup_with_constant_next_table() {
        let m = walk(DisturbanceTable::new(vec![-1.0, 1.0], vec![0.3, 0.7]).unwrap(), 1.0);
        let next = ValueTable::new(3, m.shared_grid(), vec![4.0; 5]).unwrap();
        let v = eu_backup(&m, &next, -0.7, &State::scalar(3.0), 0.0, EuVariant::Raw).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn backup_two_point_closed_form() {
        let m = walk(DisturbanceTable::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap(), 0.0);
        let next = ValueTable::new(3, m.shared_grid(), vec![0.0, 0.0, 9.0, 2.0, 0.0]).unwrap();
        let v = eu_backup(&m, &next, -2.0, &State::scalar(2.0), 0.0, EuVariant::Raw).unwrap();
        let expect = ((1.0 + 2f64.exp()) / 2.0).ln();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 1.433781).abs() < 1e-6);
    }

    #[test]
    fn zero_cost_model_has_zero_value() {
        let m = walk(DisturbanceTable::new(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap(), 0.0);
        for variant in [EuVariant::Raw, EuVariant::Nonnegative] {
            let sol = solve_eu(&m, -4.0, variant).unwrap();
            assert!(sol.optimal_values().values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn variants_agree_when_stable() {
        let m = walk(DisturbanceTable::new(vec![-1.0, 0.0, 1.0], vec![0.2, 0.5, 0.3]).unwrap(), 1.0);
        for theta in [-0.01, -1.0, -6.0] {
            let raw = solve_eu(&m, theta, EuVariant::Raw).unwrap().optimal_values();
            let nn = solve_eu(&m, theta, EuVariant::Nonnegative).unwrap().optimal_values();
            for (a, b) in raw.values().iter().zip(nn.values()) {
                assert!((a - b).abs() < 1e-9, "{theta}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn nonnegative_variant_overflows_first() {
        let m = walk(DisturbanceTable::new(vec![-1.0, 0.0, 1.0], vec![0.2, 0.5, 0.3]).unwrap(), 40.0);
        let probe = stable_theta_probe(&m, &[-1.0, -20.0]).unwrap();
        assert!(probe[0].1.is_stable() && probe[0].2.is_stable());
        assert!(probe[1].1.is_stable());
        assert!(!probe[1].2.is_stable());
        assert!(matches!(
            solve_eu(&m, -20.0, EuVariant::Nonnegative),
            Err(Error::NumericalInstability { .. })
        ));
    }

    #[test]
    fn rejects_nonnegative_theta() {
        let m = walk(DisturbanceTable::point(0.0), 1.0);
        assert!(matches!(solve_eu(&m, 0.0, EuVariant::Raw), Err(Error::InvalidParameter(_))));
    }
}

//! Risk-neutral baseline on shifted costs.

use super::{backward, Transitions};
use crate::error::Result;
use crate::model::{PolicyTable, SystemModel, ValueTable};
use crate::risk::check_alpha;

#[derive(Clone, Debug)]
pub struct NeutralSolution {
    /// `J′_t` for t = 0..=N, in shifted (non-negative) cost.
    pub tables: Vec<ValueTable>,
    pub policy: PolicyTable,
    pub lower_bound: f64,
}

impl NeutralSolution {
    /// `J′ = inf E(Z′)` at every node.
    pub fn jprime(&self) -> &ValueTable {
        &self.tables[0]
    }

    /// Optimal expected raw cost `b̲ + J′`.
    pub fn optimal_values(&self) -> ValueTable {
        let b = self.lower_bound;
        self.tables[0].map(|v| b + v)
    }
}

pub fn solve_risk_neutral(model: &SystemModel) -> Result<NeutralSolution> {
    let trans = Transitions::new(model);
    let shift = model.cost_lower();
    let terminal: Vec<f64> = model
        .grid()
        .nodes()
        .map(|x| model.shifted_terminal_cost(&x))
        .collect();
    let probs = trans.probabilities();
    let (tables, policy) = backward(
        model.shared_grid(),
        model.horizon(),
        trans.n_controls(),
        terminal,
        |_, node, u, next| {
            let expected: f64 = trans
                .successors(node, u)
                .iter()
                .zip(probs)
                .map(|(s, p)| p * s.apply(next))
                .sum();
            Ok(trans.cost(node, u) - shift + expected)
        },
    )?;
    Ok(NeutralSolution {
        tables,
        policy,
        lower_bound: model.derived_bounds().0,
    })
}

/// `b̲ + J′/α`, an upper bound on the optimal CVaR at level α.
pub fn cvar_upper_bound(jprime: &ValueTable, alpha: f64, lower_bound: f64) -> Result<ValueTable> {
    check_alpha(alpha)?;
    Ok(jprime.map(|v| lower_bound + v / alpha))
}

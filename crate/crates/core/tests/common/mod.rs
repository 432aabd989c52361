//! Brute-force references for small models whose transitions land on grid nodes.
//!
//! Everything here enumerates policies and disturbance sequences directly and
//! never calls the solvers or risk functions of the library.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use riskctl::grid::{Grid, State};
use riskctl::model::{DisturbanceTable, ModelParts, SystemModel};

/// One terminal leaf of the scenario tree.
#[derive(Clone, Copy, Debug)]
pub struct Leaf {
    pub cost: f64,
    pub prob: f64,
}

fn successor(model: &SystemModel, node: usize, u: usize, w: usize) -> usize {
    let grid = model.grid();
    let x = grid.node(node);
    let next = model.step(&x, model.controls()[u], model.disturbance().support()[w]);
    let j = grid.nearest(&next);
    assert!(
        (grid.node(j)[0] - next[0]).abs() < 1e-12,
        "oracle models must transition onto grid nodes"
    );
    j
}

/// Leaves of the scenario tree from `x0` when the control at step `t` is
/// `choose(t, node, history)`, `history` being the disturbance indices so far.
pub fn leaves(model: &SystemModel, x0: usize, choose: &dyn Fn(usize, usize, &[usize]) -> usize) -> Vec<Leaf> {
    fn walk(
        model: &SystemModel,
        t: usize,
        node: usize,
        history: &mut Vec<usize>,
        cost: f64,
        prob: f64,
        choose: &dyn Fn(usize, usize, &[usize]) -> usize,
        out: &mut Vec<Leaf>,
    ) {
        let x = model.grid().node(node);
        if t == model.horizon() {
            out.push(Leaf {
                cost: cost + model.terminal_cost(&x),
                prob,
            });
            return;
        }
        let u = choose(t, node, history);
        let c = model.stage_cost(&x, model.controls()[u]);
        for (w, &p) in model.disturbance().probabilities().iter().enumerate() {
            history.push(w);
            let next = successor(model, node, u, w);
            walk(model, t + 1, next, history, cost + c, prob * p, choose, out);
            history.pop();
        }
    }
    let mut out = Vec::new();
    walk(model, 0, x0, &mut Vec::new(), 0.0, 1.0, choose, &mut out);
    out
}

/// Digits of `index` in base `base`, least significant first.
fn digits(mut index: usize, base: usize, len: usize) -> Vec<usize> {
    (0..len)
        .map(|_| {
            let d = index % base;
            index /= base;
            d
        })
        .collect()
}

/// Every deterministic Markov policy, as a table indexed by `t * nodes + node`.
pub fn markov_policies(model: &SystemModel) -> Vec<Vec<usize>> {
    let len = model.horizon() * model.grid().len();
    let count = model.controls().len().pow(len as u32);
    (0..count).map(|i| digits(i, model.controls().len(), len)).collect()
}

pub fn markov_leaves(model: &SystemModel, policy: &[usize], x0: usize) -> Vec<Leaf> {
    let nodes = model.grid().len();
    leaves(model, x0, &|t, node, _| policy[t * nodes + node])
}

pub fn expectation(leaves: &[Leaf], f: impl Fn(f64) -> f64) -> f64 {
    leaves.iter().map(|l| l.prob * f(l.cost)).sum()
}

/// `(−2/θ) log E exp(−θZ/2)` evaluated without any shift.
pub fn eu_direct(leaves: &[Leaf], theta: f64) -> f64 {
    -2.0 / theta * expectation(leaves, |z| (-theta * z / 2.0).exp()).ln()
}

/// Mean of the worst α-fraction of outcomes, splitting the boundary atom.
pub fn tail_cvar(leaves: &[Leaf], alpha: f64) -> f64 {
    let mut sorted = leaves.to_vec();
    sorted.sort_by(|a, b| b.cost.total_cmp(&a.cost));
    let mut left = alpha;
    let mut acc = 0.0;
    for l in sorted {
        let take = l.prob.min(left);
        acc += take * l.cost;
        left -= take;
        if left <= 1e-15 {
            break;
        }
    }
    acc / alpha
}

fn min_over<T>(items: impl Iterator<Item = T>, f: impl Fn(&T) -> f64) -> f64 {
    items.map(|p| f(&p)).fold(f64::INFINITY, f64::min)
}

/// Optimal exponential utility from every node over all Markov policies.
pub fn eu_oracle(model: &SystemModel, theta: f64) -> Vec<f64> {
    let policies = markov_policies(model);
    (0..model.grid().len())
        .map(|x0| min_over(policies.iter(), |p| eu_direct(&markov_leaves(model, p, x0), theta)))
        .collect()
}

/// Optimal expected total cost from every node over all Markov policies.
pub fn neutral_oracle(model: &SystemModel) -> Vec<f64> {
    let policies = markov_policies(model);
    (0..model.grid().len())
        .map(|x0| min_over(policies.iter(), |p| expectation(&markov_leaves(model, p, x0), |z| z)))
        .collect()
}

/// Number of decision points of a history-dependent policy.
fn decision_points(model: &SystemModel) -> usize {
    let m = model.disturbance().len();
    (0..model.horizon()).map(|t| m.pow(t as u32)).sum()
}

fn history_slot(model: &SystemModel, history: &[usize]) -> usize {
    let m = model.disturbance().len();
    let offset: usize = (0..history.len()).map(|t| m.pow(t as u32)).sum();
    offset + history.iter().fold(0, |acc, &w| acc * m + w)
}

/// Cost distributions of every deterministic history-dependent policy from `x0`.
pub fn history_policy_leaves(model: &SystemModel, x0: usize) -> Vec<Vec<Leaf>> {
    let d = decision_points(model);
    let k = model.controls().len();
    (0..k.pow(d as u32))
        .map(|i| {
            let policy = digits(i, k, d);
            leaves(model, x0, &|_, _, h| policy[history_slot(model, h)])
        })
        .collect()
}

/// Optimal CVaR from `x0` over all history-dependent policies, with the
/// distribution attaining it.
pub fn cvar_oracle(model: &SystemModel, x0: usize, alpha: f64) -> (f64, Vec<Leaf>) {
    history_policy_leaves(model, x0)
        .into_iter()
        .map(|l| (tail_cvar(&l, alpha), l))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one policy")
}

/// `min E max(Z′ − s0, 0)` over policies that depend on `(t, x, s)` only,
/// where `s` starts at `s0` and decreases by the shifted stage cost.
pub fn augmented_oracle(model: &SystemModel, x0: usize, s0: f64) -> f64 {
    let shift = model.cost_lower();
    let b = model.derived_bounds().0;
    // Collect reachable augmented states under any control.
    let mut keys: BTreeSet<(usize, usize, u64)> = BTreeSet::new();
    let mut frontier = vec![(x0, s0)];
    for t in 0..model.horizon() {
        let mut next = Vec::new();
        for &(node, s) in &frontier {
            if !keys.insert((t, node, s.to_bits())) {
                continue;
            }
            let x = model.grid().node(node);
            for u in 0..model.controls().len() {
                let s2 = s - (model.stage_cost(&x, model.controls()[u]) - shift);
                for w in 0..model.disturbance().len() {
                    next.push((successor(model, node, u, w), s2));
                }
            }
        }
        frontier = next;
    }
    let ids: BTreeMap<(usize, usize, u64), usize> = keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
    let k = model.controls().len();
    (0..k.pow(ids.len() as u32))
        .map(|i| {
            let policy = digits(i, k, ids.len());
            let l = leaves(model, x0, &|t, node, h| {
                // Rebuild s along the history to find the augmented state.
                let mut s = s0;
                let mut n = x0;
                for (tt, &w) in h.iter().enumerate() {
                    let u = policy[ids[&(tt, n, s.to_bits())]];
                    s -= model.stage_cost(&model.grid().node(n), model.controls()[u]) - shift;
                    n = successor(model, n, u, w);
                }
                debug_assert_eq!(n, node);
                policy[ids[&(t, node, s.to_bits())]]
            });
            expectation(&l, |z| (z - b - s0).max(0.0))
        })
        .fold(f64::INFINITY, f64::min)
}

/// A random model on `{0, …, k}` with tabulated transitions and costs.
#[derive(Clone, Debug)]
pub struct TableModel {
    pub nodes: usize,
    pub controls: usize,
    pub probs: Vec<f64>,
    /// `next[(x * controls + u) * |W| + w]`
    pub next: Vec<usize>,
    /// `cost[x * controls + u]`
    pub cost: Vec<f64>,
    pub terminal: Vec<f64>,
    pub horizon: usize,
}

impl TableModel {
    pub fn build(&self) -> SystemModel {
        let m = self.probs.len();
        let nc = self.controls;
        let next = Arc::new(self.next.clone());
        let cost = Arc::new(self.cost.clone());
        let terminal = Arc::new(self.terminal.clone());
        SystemModel::new(ModelParts {
            name: "table".into(),
            horizon: self.horizon,
            grid: Grid::uniform_1d(0.0, (self.nodes - 1) as f64, self.nodes - 1).unwrap(),
            controls: (0..nc).map(|u| u as f64).collect(),
            disturbance: DisturbanceTable::new((0..m).map(|w| w as f64).collect(), self.probs.clone()).unwrap(),
            dynamics: Arc::new(move |x, u, w| {
                State::scalar(next[(x[0] as usize * nc + u as usize) * m + w as usize] as f64)
            }),
            stage_cost: {
                let cost = Arc::clone(&cost);
                Arc::new(move |x, u| cost[x[0] as usize * nc + u as usize])
            },
            terminal_cost: Arc::new(move |x| terminal[x[0] as usize]),
        })
        .unwrap()
    }
}

pub mod strategies {
    use super::TableModel;
    use proptest::prelude::*;

    /// Small random models; `integer` keeps every cost integral.
    pub fn table_model(integer: bool) -> impl Strategy<Value = TableModel> {
        (2usize..=4, 2usize..=3, 2usize..=3, 1usize..=3).prop_flat_map(move |(nodes, controls, m, horizon)| {
            let pairs = nodes * controls;
            let cost = if integer {
                prop::collection::vec((0i32..5).prop_map(f64::from), pairs).boxed()
            } else {
                prop::collection::vec(-3.0f64..3.0, pairs).boxed()
            };
            let terminal = if integer {
                prop::collection::vec((0i32..5).prop_map(f64::from), nodes).boxed()
            } else {
                prop::collection::vec(-3.0f64..3.0, nodes).boxed()
            };
            (
                prop::collection::vec(1u32..10, m),
                prop::collection::vec(0..nodes, pairs * m),
                cost,
                terminal,
            )
                .prop_map(move |(weights, next, cost, terminal)| {
                    let total: u32 = weights.iter().sum();
                    TableModel {
                        nodes,
                        controls,
                        probs: weights.iter().map(|&w| f64::from(w) / f64::from(total)).collect(),
                        next,
                        cost,
                        terminal,
                        horizon,
                    }
                })
        })
    }
}

mod common;

use std::sync::Arc;

use common::strategies::table_model;
use common::*;
use proptest::prelude::*;
use riskctl::dp::{
    build_s_grid, cvar_inner_backup, cvar_upper_bound, eu_backup, outer_minimize, solve_cvar_inner, solve_eu,
    solve_risk_neutral, EuVariant,
};
use riskctl::grid::Grid;
use riskctl::model::ValueTable;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eu_is_monotone_in_theta_and_dominates_expectation(
        tm in table_model(false),
        a in -4.0f64..-1e-3,
        b in -4.0f64..-1e-3,
    ) {
        let model = tm.build();
        let (t1, t2) = if a <= b { (a, b) } else { (b, a) };
        let v1 = solve_eu(&model, t1, EuVariant::Raw).unwrap().optimal_values();
        let v2 = solve_eu(&model, t2, EuVariant::Raw).unwrap().optimal_values();
        let neutral = solve_risk_neutral(&model).unwrap().optimal_values();
        for x in 0..tm.nodes {
            prop_assert!(v1.at(x) >= v2.at(x) - 1e-9, "x={x}: {} < {}", v1.at(x), v2.at(x));
            prop_assert!(v2.at(x) >= neutral.at(x) - 1e-9);
        }
    }

    #[test]
    fn eu_variants_agree(tm in table_model(false), theta in -4.0f64..-1e-3) {
        let model = tm.build();
        let raw = solve_eu(&model, theta, EuVariant::Raw).unwrap().optimal_values();
        let shifted = solve_eu(&model, theta, EuVariant::Nonnegative).unwrap().optimal_values();
        for x in 0..tm.nodes {
            prop_assert!(close(raw.at(x), shifted.at(x), 1e-9));
        }
    }

    #[test]
    fn eu_approaches_neutral_as_theta_vanishes(tm in table_model(false)) {
        let model = tm.build();
        let v = solve_eu(&model, -1e-8, EuVariant::Raw).unwrap().optimal_values();
        let neutral = solve_risk_neutral(&model).unwrap().optimal_values();
        for x in 0..tm.nodes {
            prop_assert!((v.at(x) - neutral.at(x)).abs() < 1e-4);
        }
    }

    #[test]
    fn eu_backup_is_monotone(tm in table_model(false), theta in -4.0f64..-1e-3, bumps in prop::collection::vec(0.0f64..2.0, 4)) {
        let model = tm.build();
        let grid = model.shared_grid();
        let low: Vec<f64> = (0..tm.nodes).map(|x| tm.terminal[x]).collect();
        let high: Vec<f64> = low.iter().zip(&bumps).map(|(v, d)| v + d).collect();
        let low = ValueTable::new(1, Arc::clone(&grid), low).unwrap();
        let high = ValueTable::new(1, grid, high).unwrap();
        for x in model.grid().nodes() {
            for &u in model.controls() {
                let a = eu_backup(&model, &low, theta, &x, u, EuVariant::Raw).unwrap();
                let b = eu_backup(&model, &high, theta, &x, u, EuVariant::Raw).unwrap();
                prop_assert!(a <= b + 1e-12);
            }
        }
    }

    #[test]
    fn cvar_value_properties(tm in table_model(false), res in 4usize..24) {
        let model = tm.build();
        let (lo, hi) = model.derived_bounds();
        prop_assume!(hi > 1e-9);
        let inner = solve_cvar_inner(&model, res).unwrap();
        let neutral = solve_risk_neutral(&model).unwrap();
        let mut previous: Option<Vec<f64>> = None;
        for alpha in [0.005, 0.05, 0.5, 0.999, 1.0] {
            let j = outer_minimize(&inner, alpha).unwrap();
            let bound = cvar_upper_bound(neutral.jprime(), alpha, lo).unwrap();
            let expected = neutral.optimal_values();
            for x in 0..tm.nodes {
                prop_assert!(j.values.at(x) <= bound.at(x) + 1e-9);
                prop_assert!(j.values.at(x) >= expected.at(x) - 1e-9);
                if let Some(p) = &previous {
                    prop_assert!(j.values.at(x) <= p[x], "not non-increasing in α");
                }
            }
            previous = Some(j.values.values().to_vec());
        }
    }

    #[test]
    fn cvar_inner_is_nonincreasing_and_lipschitz_in_budget(tm in table_model(false), res in 4usize..24) {
        let model = tm.build();
        prop_assume!(model.derived_bounds().1 > 1e-9);
        let inner = solve_cvar_inner(&model, res).unwrap();
        let axis = inner.s_axis();
        let ns = axis.len();
        for table in &inner.tables {
            for x in 0..tm.nodes {
                for j in 1..ns {
                    let (a, b) = (table.at(x * ns + j - 1), table.at(x * ns + j));
                    prop_assert!(b <= a + 1e-12);
                    prop_assert!(a - b <= (axis[j] - axis[j - 1]) * (1.0 + 1e-9) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn cvar_backup_is_monotone(tm in table_model(false), res in 4usize..12, seed in any::<u64>()) {
        let model = tm.build();
        prop_assume!(model.derived_bounds().1 > 1e-9);
        let s_grid = build_s_grid(&model, res).unwrap();
        let aug = Arc::new(Grid::new(vec![model.grid().axis(0).to_vec(), s_grid.axis(0).to_vec()]).unwrap());
        let n = aug.len();
        let low: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 97) as f64 / 10.0).collect();
        let high: Vec<f64> = low.iter().enumerate().map(|(i, v)| v + (i % 3) as f64).collect();
        let low = ValueTable::new(1, Arc::clone(&aug), low).unwrap();
        let high = ValueTable::new(1, aug, high).unwrap();
        for x in model.grid().nodes() {
            for &s in s_grid.axis(0) {
                for &u in model.controls() {
                    let a = cvar_inner_backup(&model, &s_grid, &low, &x, s, u).unwrap();
                    let b = cvar_inner_backup(&model, &s_grid, &high, &x, s, u).unwrap();
                    prop_assert!(a <= b + 1e-12);
                }
            }
        }
    }
}

/// Cap on the number of enumerated policies per case.
const MAX_POLICIES: usize = 4096;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eu_matches_enumeration_on_random_models(tm in table_model(false), theta in -3.0f64..-0.05) {
        let count = tm.controls.pow((tm.nodes * tm.horizon) as u32);
        prop_assume!(count <= MAX_POLICIES);
        let model = tm.build();
        let oracle = eu_oracle(&model, theta);
        let v = solve_eu(&model, theta, EuVariant::Raw).unwrap().optimal_values();
        for x in 0..tm.nodes {
            prop_assert!(close(v.at(x), oracle[x], 1e-9), "x={x}: {} vs {}", v.at(x), oracle[x]);
        }
    }

    #[test]
    fn cvar_matches_enumeration_on_random_integer_models(tm in table_model(true), alpha in prop::sample::select(vec![0.1, 0.25, 0.5, 0.8, 1.0])) {
        let m = tm.probs.len();
        let points: usize = (0..tm.horizon).map(|t| m.pow(t as u32)).sum();
        prop_assume!(tm.controls.pow(points as u32) <= MAX_POLICIES);
        let model = tm.build();
        let a_bar = model.derived_bounds().1;
        prop_assume!(a_bar >= 2.0);
        // One budget cell per unit of cost keeps every reachable budget on a node.
        let inner = solve_cvar_inner(&model, a_bar as usize).unwrap();
        let j = outer_minimize(&inner, alpha).unwrap();
        for x in 0..tm.nodes {
            let (want, _) = cvar_oracle(&model, x, alpha);
            prop_assert!(close(j.values.at(x), want, 1e-9), "x={x}: {} vs {want}", j.values.at(x));
        }
    }
}

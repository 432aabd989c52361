mod common;

use common::*;
use riskctl::dp::{outer_minimize, solve_cvar_inner, solve_eu, solve_risk_neutral, EuVariant};
use riskctl::grid::State;
use riskctl::systems::toy;

#[test]
fn eu_matches_markov_enumeration_on_three_state_toy() {
    let model = toy::three_state();
    assert_eq!(markov_policies(&model).len(), 512);
    for theta in [-0.1, -1.0, -5.0] {
        let oracle = eu_oracle(&model, theta);
        for variant in [EuVariant::Raw, EuVariant::Nonnegative] {
            let values = solve_eu(&model, theta, variant).unwrap().optimal_values();
            for (x, want) in oracle.iter().enumerate() {
                let got = values.at(x);
                assert!((got - want).abs() < 1e-9, "θ={theta} {variant:?} x={x}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn neutral_matches_markov_enumeration() {
    for model in [toy::three_state(), toy::two_state()] {
        let oracle = neutral_oracle(&model);
        let values = solve_risk_neutral(&model).unwrap().optimal_values();
        for (x, want) in oracle.iter().enumerate() {
            assert!((values.at(x) - want).abs() < 1e-9);
        }
    }
}

#[test]
fn cvar_inner_matches_augmented_enumeration() {
    let model = toy::two_state();
    let (lo, hi) = model.derived_bounds();
    assert_eq!((lo, hi), (0.0, 12.0));
    let inner = solve_cvar_inner(&model, 12).unwrap();
    let axis = inner.s_axis().to_vec();
    assert!(axis.iter().all(|s| s.fract() == 0.0), "integer budget axis {axis:?}");
    let ns = axis.len();
    for x in 0..2 {
        for (j, &s) in axis.iter().enumerate() {
            let got = inner.tables[0].at(x * ns + j);
            let want = augmented_oracle(&model, x, s);
            assert!((got - want).abs() < 1e-9, "x={x} s={s}: {got} vs {want}");
        }
    }
}

#[test]
fn cvar_outer_matches_history_enumeration() {
    let model = toy::two_state();
    let inner = solve_cvar_inner(&model, 12).unwrap();
    for alpha in [0.25, 0.5, 1.0] {
        let outer = outer_minimize(&inner, alpha).unwrap();
        for x in 0..2 {
            let (want, dist) = cvar_oracle(&model, x, alpha);
            let got = outer.values.at(x);
            assert!((got - want).abs() < 1e-9, "α={alpha} x={x}: {got} vs {want}");
            assert!((tail_cvar(&dist, alpha) - got).abs() < 1e-9);
            let (at, _) = inner.optimal_at(alpha, &State::scalar(x as f64)).unwrap();
            assert!((at - got).abs() < 1e-12);
        }
    }
}

#[test]
fn cvar_at_level_one_is_the_expectation() {
    let model = toy::two_state();
    let inner = solve_cvar_inner(&model, 12).unwrap();
    let outer = outer_minimize(&inner, 1.0).unwrap();
    let neutral = neutral_oracle(&model);
    for x in 0..2 {
        assert!((outer.values.at(x) - neutral[x]).abs() < 1e-9);
    }
}

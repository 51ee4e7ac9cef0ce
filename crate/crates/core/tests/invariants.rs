//! Property-based invariants of the model layer: centered positions,
//! allocation weights, and the waiting/action classifier.

use proptest::prelude::*;

use fuelgame_core::{
    allocation_weights, classify_region, relative_positions, total_accessible, BoundarySolution,
    CostFunction, GameSpec, JointState, RegionLabel,
};

fn positions_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
}

fn resources_strategy(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..3.0, m)
}

proptest! {
    #[test]
    fn centered_positions_sum_to_zero(x in positions_strategy(4)) {
        let xt = relative_positions(&x).unwrap();
        let total: f64 = xt.iter().sum();
        prop_assert!(total.abs() < 1e-9, "sum {total}");
    }

    #[test]
    fn centered_positions_translation_invariant(x in positions_strategy(3), c in -10.0f64..10.0) {
        let base = relative_positions(&x).unwrap();
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let moved = relative_positions(&shifted).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn centered_positions_scale_by_player_count(x in positions_strategy(3)) {
        // x~^i = (N x^i - sum)/(N - 1).
        let xt = relative_positions(&x).unwrap();
        let sum: f64 = x.iter().sum();
        for (i, &v) in xt.iter().enumerate() {
            let direct = (3.0 * x[i] - sum) / 2.0;
            prop_assert!((v - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn allocation_weights_are_a_distribution(y in resources_strategy(3), player in 0usize..3) {
        let spec = GameSpec::sharing(
            vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]],
            1.0,
            CostFunction::quadratic(),
        )
        .unwrap();
        let w = allocation_weights(&spec, &y, player);
        let acc = total_accessible(&spec, &y, player);
        let total: f64 = w.iter().sum();
        if acc > 0.0 {
            prop_assert!((total - 1.0).abs() < 1e-12, "weights sum to {total}");
            for (j, &wj) in w.iter().enumerate() {
                // Only accessible pools get weight, proportional to level.
                let expected = f64::from(spec.adjacency()[player][j]) * y[j] / acc;
                prop_assert!((wj - expected).abs() < 1e-12);
            }
        } else {
            prop_assert!(w.iter().all(|&wj| wj == 0.0), "exhausted player still weighted");
        }
    }

    #[test]
    fn classifier_is_deterministic_and_consistent(
        x in positions_strategy(3),
        y in resources_strategy(1),
    ) {
        static SETUP: std::sync::OnceLock<(GameSpec, BoundarySolution)> = std::sync::OnceLock::new();
        let (spec, b) = SETUP.get_or_init(|| {
            let cost = CostFunction::quadratic();
            (
                GameSpec::pooling(3, 1.0, cost.clone()).unwrap(),
                BoundarySolution::solve(&cost, 3, 1.0, 4.0).unwrap(),
            )
        });
        let state = JointState::new(x.clone(), y.clone());
        let first = classify_region(spec, b, &state).unwrap();
        let second = classify_region(spec, b, &state).unwrap();
        prop_assert_eq!(&first, &second);
        // The labelled actor, if any, must actually sit at or beyond the
        // common pooling threshold.
        if let RegionLabel::Action { player, .. } = first {
            let xt = relative_positions(&x).unwrap();
            let thr = b.f_inverse(y[0]).unwrap();
            prop_assert!(xt[player].abs() >= thr - 1e-9);
        }
    }
}

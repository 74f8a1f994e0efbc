//! Property-based invariants of the steady-state solvers over random
//! stable parameter draws.

use proptest::prelude::*;

use dmpa::model::SystemParams;
use dmpa::steadystate::principal_variances;
use dmpa::{bae_variance, conditional_steady_state, unconditional_steady_state, v0};

fn stable_params() -> impl Strategy<Value = SystemParams> {
    (
        0.0f64..5.0,   // delta
        0.0f64..0.95,  // chi as a fraction of the threshold
        0.0f64..3.0,   // mu
        0.01f64..1.0,  // eta
        0.0f64..50.0,  // n
    )
        .prop_map(|(delta, frac, mu, eta, n)| SystemParams {
            chi: frac * (delta * delta + 1.0).sqrt(),
            delta,
            mu,
            eta,
            n_thermal: n,
            ..Default::default()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heisenberg_bound_and_positivity(p in stable_params()) {
        let vp = p.validate().unwrap();
        let cond = conditional_steady_state(&vp).unwrap().cov;
        prop_assert!(cond.is_positive_definite());
        prop_assert!(cond.det() >= 0.25 - 1e-9);
        let (v_min, v_max, _) = principal_variances(&cond);
        prop_assert!(v_min > 0.0 && v_min <= v_max);
    }

    #[test]
    fn conditioning_never_hurts(p in stable_params()) {
        let vp = p.validate().unwrap();
        let cond = conditional_steady_state(&vp).unwrap().cov;
        let uncond = unconditional_steady_state(&vp, 0.0).unwrap().cov;
        // conditioning on the record can only shrink the uncertainty volume
        prop_assert!(uncond.det() >= cond.det() - 1e-9 * uncond.det().abs());
        prop_assert!(uncond.v_x >= cond.v_x - 1e-9 * uncond.v_x.abs());
    }

    #[test]
    fn measurement_strength_monotonicity_pump_off(
        mu in 0.01f64..10.0,
        n in 0.0f64..100.0,
        eta in 0.05f64..1.0,
    ) {
        let at = |mu: f64| {
            SystemParams { mu, eta, n_thermal: n, ..Default::default() }
                .validate()
                .unwrap()
        };
        // stronger measurement means better conditioning despite back-action
        prop_assert!(v0(&at(2.0 * mu)) < v0(&at(mu)));
        prop_assert!(bae_variance(&at(2.0 * mu)) < bae_variance(&at(mu)));
        // evading back-action can only help
        prop_assert!(bae_variance(&at(mu)) <= v0(&at(mu)));
    }

    #[test]
    fn frame_rotation_preserves_spectrum(p in stable_params(), phi in 0.0f64..std::f64::consts::PI) {
        let vp = p.validate().unwrap();
        let base = conditional_steady_state(&vp).unwrap().cov;
        let mut rotated_params = p;
        rotated_params.theta = p.theta + phi;
        let rotated = conditional_steady_state(&rotated_params.validate().unwrap()).unwrap().cov;
        let (a_min, a_max, _) = principal_variances(&base);
        let (b_min, b_max, _) = principal_variances(&rotated);
        prop_assert!((a_min - b_min).abs() < 1e-9 * a_min.max(1.0));
        prop_assert!((a_max - b_max).abs() < 1e-9 * a_max.max(1.0));
    }
}

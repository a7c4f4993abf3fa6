//! Property tests spanning modules: generated networks keep their structural
//! identities, the specialized right-hand sides agree with the general one,
//! and the conservation law survives arbitrary valid inputs.

use metapop::dynamics::{
    aggregate, rhs_general, rhs_uncorrelated_freq, rhs_uncorrelated_mass, IncidenceKind,
    MetapopState, Params,
};
use metapop::linalg::dense_eigenvalues;
use metapop::network::{
    balanced_random_kernel, build_truncated_power_law, validate_consistency, MixingKernel,
};
use nalgebra::DVector;
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = Params> {
    (
        0.01f64..0.1,     // mu
        0.0f64..0.4,      // q
        0.001f64..1.5,    // alpha
        0.0f64..0.9,      // theta
        0.05f64..2.0,     // delta
        0.0f64..0.8,      // eta
        0.01f64..1.0,     // gamma
        0.0f64..0.3,      // d
        0.0f64..0.9,      // xi
        0.0f64..0.2,      // beta
        (0.2f64..3.0, 0.2f64..3.0, 0.2f64..3.0, 0.2f64..3.0),
    )
        .prop_map(
            |(mu, q, alpha, theta, delta, eta, gamma, d, xi, beta, (ds, de, di, dr))| Params {
                lambda: 150.0,
                beta,
                mu,
                q,
                alpha,
                theta,
                delta,
                eta,
                gamma,
                d,
                xi,
                d_s: ds,
                d_e: de,
                d_i: di,
                d_r: dr,
            },
        )
}

fn network_strategy() -> impl Strategy<Value = metapop::DegreeDistribution> {
    (1.2f64..4.0, 1u32..4, 4u32..20).prop_map(|(exponent, k_min, span)| {
        build_truncated_power_law(exponent, k_min, k_min + span).expect("valid power law")
    })
}

fn state_strategy(n: usize) -> impl Strategy<Value = MetapopState> {
    proptest::collection::vec(0.0f64..400.0, 4 * n)
        .prop_map(move |flat| MetapopState::from_flat(&flat).expect("flat layout"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_networks_keep_their_identities(dist in network_strategy(), seed in 0u64..1000) {
        // normalization
        let total: f64 = dist.probs().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);

        // uncorrelated closure passes consistency and has the projector C
        let kernel = MixingKernel::uncorrelated(&dist);
        prop_assert!(validate_consistency(&dist, kernel.rows()).is_empty());
        let c = kernel.connectivity();
        let v = DVector::from_iterator(dist.len(), dist.degrees().iter().map(|&k| k as f64));
        prop_assert!(((c * &v) - &v).amax() < 1e-12 * v.amax());
        prop_assert!(((c * c) - c).amax() < 1e-12);

        // correlated kernels from the balanced generator also satisfy balance
        let corr = balanced_random_kernel(&dist, seed);
        prop_assert!(validate_consistency(&dist, corr.rows()).is_empty());
    }

    #[test]
    fn uncorrelated_spectrum_is_one_plus_zeros(dist in network_strategy()) {
        let kernel = MixingKernel::uncorrelated(&dist);
        let eig = dense_eigenvalues(kernel.connectivity()).unwrap();
        let mut mags: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert!((mags[0] - 1.0).abs() < 1e-10);
        for m in &mags[1..] {
            prop_assert!(*m < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn general_rhs_specializes_and_conserves(
        p in params_strategy(),
        dist in network_strategy(),
        flat in proptest::collection::vec(0.0f64..400.0, 4 * 24),
    ) {
        let n = dist.len();
        let state = MetapopState::from_flat(&flat[0..4 * n]).unwrap();
        let kernel = MixingKernel::uncorrelated(&dist);

        let scale = state.max_abs().max(1.0);
        let a = rhs_general(&state, &p, &dist, &kernel, IncidenceKind::StandardIncidence).unwrap();
        let b = rhs_uncorrelated_freq(&state, &p, &dist).unwrap();
        for k in 0..n {
            prop_assert!((a.s[k] - b.s[k]).abs() <= 1e-12 * scale);
            prop_assert!((a.e[k] - b.e[k]).abs() <= 1e-12 * scale);
            prop_assert!((a.i[k] - b.i[k]).abs() <= 1e-12 * scale);
            prop_assert!((a.r[k] - b.r[k]).abs() <= 1e-12 * scale);
        }

        // conservation: p(k)-weighted derivative total
        let agg = aggregate(&state, &dist);
        let expect = p.lambda - p.mu * agg.rho - p.d * agg.rho_i;
        for out in [
            b,
            rhs_uncorrelated_mass(&state, &p, &dist).unwrap(),
        ] {
            let got = aggregate(&out, &dist);
            prop_assert!((got.rho - expect).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn boundary_flow_points_inward(
        p in params_strategy(),
        dist in network_strategy(),
        flat in proptest::collection::vec(0.0f64..200.0, 4 * 24),
        zero_mask in proptest::collection::vec(0usize..4, 24),
    ) {
        let n = dist.len();
        let mut state = MetapopState::from_flat(&flat[0..4 * n]).unwrap();
        for k in 0..n {
            match zero_mask[k] {
                0 => state.s[k] = 0.0,
                1 => state.e[k] = 0.0,
                2 => state.i[k] = 0.0,
                _ => state.r[k] = 0.0,
            }
        }
        for out in [
            rhs_uncorrelated_freq(&state, &p, &dist).unwrap(),
            rhs_uncorrelated_mass(&state, &p, &dist).unwrap(),
        ] {
            for k in 0..n {
                if state.s[k] == 0.0 { prop_assert!(out.s[k] >= 0.0); }
                if state.e[k] == 0.0 { prop_assert!(out.e[k] >= 0.0); }
                if state.i[k] == 0.0 { prop_assert!(out.i[k] >= 0.0); }
                if state.r[k] == 0.0 { prop_assert!(out.r[k] >= 0.0); }
            }
        }
    }
}

use std::sync::OnceLock;

use proptest::prelude::*;

use ioncav::model::{
    build_emission_model, BranchingParams, CavityQEDParams, LevelScheme, LindbladModel, MicromotionParams,
    TransitionTable,
};
use ioncav::hilbert::{Level, Mj};
use ioncav::observables::{absorb_per_photon, accidental_coincidences, cavity_emission_fraction, fit_saturation, AbsorptionSetup};
use ioncav::solver::{run_trajectories, SolverOptions};

fn emission() -> &'static LindbladModel {
    static MODEL: OnceLock<LindbladModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        build_emission_model(
            &CavityQEDParams::default(),
            &BranchingParams::default(),
            &LevelScheme::default(),
            &TransitionTable::default(),
            &MicromotionParams::default(),
            1,
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trajectories_replay_from_seed(seed in any::<u64>()) {
        let m = emission();
        let psi = m.space().basis_state(Level::E(Mj::M1_2), 0, 0).unwrap();
        let opts = SolverOptions { n_trajectories: 40, base_seed: seed, ..Default::default() };
        let a = run_trajectories(m, &psi, 200e-9, &opts).unwrap();
        let b = run_trajectories(m, &psi, 200e-9, &opts).unwrap();
        prop_assert_eq!(&a, &b);
        for r in &a {
            prop_assert!(r.jumps.windows(2).all(|w| w[0].0 <= w[1].0));
            prop_assert!(r.jumps.iter().all(|j| j.0 >= 0.0 && j.0 <= 200e-9));
        }
        let f = cavity_emission_fraction(&a);
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn saturation_fit_inverts_exact_curve(n0 in 10.0f64..500.0, n_lo in 5.0f64..50.0) {
        let pts: Vec<(f64, f64)> = (0..6)
            .map(|i| {
                let n = n_lo * (1.0 + i as f64 * 0.4);
                (n, 1.0 - (-n / n0).exp())
            })
            .collect();
        let fit = fit_saturation(&pts).unwrap();
        prop_assert!((fit.n0 / n0 - 1.0).abs() < 1e-4, "n0 {} vs {}", fit.n0, n0);
        prop_assert!(fit.warnings.is_empty());
    }

    #[test]
    fn accidentals_scale_with_cycles(p in 0.0f64..0.01, b in 0.0f64..0.01, n in 1u64..10_000_000) {
        let (mean, sigma) = accidental_coincidences(p, b, n);
        let (mean2, _) = accidental_coincidences(p, b, 2 * n);
        prop_assert!(mean >= 0.0 && sigma >= 0.0);
        prop_assert!((mean2 - 2.0 * mean).abs() <= 1e-9 * mean2.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn absorption_is_quarter_turn_periodic(theta in 0.0f64..90.0) {
        let setup = AbsorptionSetup { n_max: 1, ..AbsorptionSetup::default() };
        let p = absorb_per_photon(&setup, &[theta, theta + 90.0], &SolverOptions::default()).unwrap();
        prop_assert!((p[0].p_abs - p[1].p_abs).abs() <= 1e-9 * p[0].p_abs.max(1e-12));
        prop_assert!(p[0].p_abs > 0.0 && p[0].p_abs < 1.0);
    }
}

mod common;

use common::{brute_force_isotonic, brute_force_npmle, grid_of, loglik, pooled_means, sim};
use pct_core::estimators::{lemma1_residual, log_likelihood, stationarity};
use pct_core::simulation::{generate_dataset, run_power_study, Case, NuMode, SimConfig, Statistic};
use pct_core::{npmle, npmple, restrict_to_group, validate_dataset, IcmConfig, ObservationPath, PanelDataset};
use proptest::prelude::*;

fn tiny_dataset() -> impl Strategy<Value = PanelDataset> {
    let subject = (1usize..=3).prop_flat_map(|k| {
        (
            prop::sample::subsequence(vec![1.0, 2.0, 3.0], k),
            prop::collection::vec(0u64..4, k),
        )
    });
    prop::collection::vec(subject, 1..=3).prop_map(|subjects| {
        let paths = subjects
            .into_iter()
            .enumerate()
            .map(|(i, (times, incs))| {
                let counts = incs
                    .iter()
                    .scan(0, |acc, x| {
                        *acc += x;
                        Some(*acc)
                    })
                    .collect();
                ObservationPath::new(format!("s{i}"), 1, times, counts)
            })
            .collect();
        PanelDataset::new(paths, 1)
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn npmle_matches_exhaustive_search(d in tiny_dataset()) {
        let (e, diag) = npmle(&d, &IcmConfig::default()).unwrap();
        prop_assert!(diag.converged);
        let (_, best) = brute_force_npmle(&d);
        let ours = loglik(&d, &grid_of(&d), e.values());
        prop_assert!(ours >= best - 1e-9, "{} < {}", ours, best);
        prop_assert!((ours - best).abs() <= 1e-6, "{} vs {}", ours, best);
    }

    #[test]
    fn npmple_matches_block_enumeration(d in tiny_dataset()) {
        let (_, means, weights) = pooled_means(&d);
        let want = brute_force_isotonic(&means, &weights);
        let got = npmple(&d).unwrap();
        for (a, b) in got.values().iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12, "{:?} vs {:?}", got.values(), want);
        }
    }

    #[test]
    fn simulated_fits_pass_certificates(seed in 0u64..10_000, gamma in any::<bool>()) {
        let nu = if gamma { NuMode::Gamma2Half } else { NuMode::FixedOne };
        let d = sim(Case::One, 0.0, &[40], nu, seed, 0);
        let (e, diag) = npmle(&d, &IcmConfig::default()).unwrap();
        prop_assert!(diag.converged);
        prop_assert!(diag.trace.windows(2).all(|w| w[1] >= w[0]));
        let n = d.n() as f64;
        let cert = stationarity(&d, &e).unwrap();
        prop_assert!(cert.max_violation <= 1e-6 * n);
        for phi in [|x: f64| x, |x: f64| x * x, |x: f64| x.sqrt()] {
            prop_assert!(lemma1_residual(&d, &e, phi).unwrap().abs() <= 1e-6 * n);
        }
        if e.values()[0] > 0.0 {
            prop_assert!(lemma1_residual(&d, &e, |_| 1.0).unwrap().abs() <= 1e-6 * n);
        }
        prop_assert!(log_likelihood(&d, &e) >= log_likelihood(&d, &npmple(&d).unwrap()));
    }
}

#[test]
fn zero_first_value_only_satisfies_the_inequality() {
    // No events before t = 2: the constraint u_1 >= 0 is active.
    let d = PanelDataset::new(
        vec![
            ObservationPath::new("a", 1, vec![1.0, 2.0], vec![0, 3]),
            ObservationPath::new("b", 1, vec![1.0], vec![0]),
        ],
        1,
    );
    let (e, diag) = npmle(&d, &IcmConfig::default()).unwrap();
    assert!(diag.converged);
    assert_eq!(e.values()[0], 0.0);
    let cert = stationarity(&d, &e).unwrap();
    assert!(cert.cumulative_gradient[0] < -1.0);
    assert!(cert.max_violation <= 1e-9);
    assert!(lemma1_residual(&d, &e, |x| x).unwrap().abs() <= 1e-9);
}

#[test]
fn group_restriction_matches_a_standalone_fit() {
    let d = sim(Case::Two, 5.0, &[20, 30], NuMode::FixedOne, 8, 1);
    let g2 = restrict_to_group(&d, 2).unwrap();
    assert_eq!(g2.n(), 30);
    let standalone = PanelDataset::new(
        d.paths().iter().filter(|p| p.group() == 2).map(|p| p.with_group(1)).collect(),
        1,
    );
    let (a, _) = npmle(&g2, &IcmConfig::default()).unwrap();
    let (b, _) = npmle(&standalone, &IcmConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn generated_datasets_are_valid_and_reproducible() {
    for (case, beta, nu) in [(Case::One, 0.3, NuMode::Gamma2Half), (Case::Two, 5.0, NuMode::FixedOne)] {
        let mut cfg = SimConfig::two_sample(case, beta, 30, 40, nu);
        cfg.seed = 99;
        for rep in 0..20 {
            let d = generate_dataset(&cfg, rep);
            assert!(validate_dataset(&d).errors.is_empty());
            assert_eq!(d.group_sizes(), vec![30, 40]);
        }
    }

    let mut cfg = SimConfig::two_sample(Case::One, 0.1, 25, 25, NuMode::FixedOne);
    cfg.replications = 40;
    cfg.weights = ["w1", "w2", "w3", "w4"].iter().map(|w| w.parse().unwrap()).collect();
    cfg.statistics = vec![Statistic::T1, Statistic::T2];
    let a = run_power_study(std::slice::from_ref(&cfg)).unwrap();
    let b = run_power_study(&[cfg]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 8);
    assert!(a.iter().all(|r| (0.0..=1.0).contains(&r.rejection_rate)));
}

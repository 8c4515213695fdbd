//! ITLinQ scheduling and the full-reuse reference.

use nalgebra::DMatrix;
use proptest::prelude::*;
use sarrm::baselines::{itlinq_compatible, itlinq_schedule, ItlinqConfig, ItlinqOrdering};
use sarrm::channel::NetworkState;
use sarrm::rrm::RrmProblemConfig;

/// Power gains whose SNRs span roughly -10 dB to 60 dB.
fn gains_strategy(m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    let cfg = RrmProblemConfig::default();
    let unit = cfg.noise() / cfg.p_max();
    prop::collection::vec(-1.0f64..6.0, m * m)
        .prop_map(move |exps| DMatrix::from_fn(m, m, |i, j| unit * 10f64.powf(exps[i * m + j])))
}

proptest! {
    #[test]
    fn schedule_is_pairwise_valid_and_maximal(g in gains_strategy(4)) {
        let problem = RrmProblemConfig::default();
        let cfg = ItlinqConfig::default();
        let p = itlinq_schedule(&NetworkState::from_power_gains(&g), &problem, &cfg);
        let on: Vec<usize> = (0..4).filter(|&i| p[i] > 0.0).collect();
        prop_assert!(p.iter().all(|&x| x == 0.0 || x == problem.p_max()));
        prop_assert!(!on.is_empty());
        for &i in &on {
            for &j in &on {
                prop_assert!(i == j || itlinq_compatible(&g, i, j, &problem, &cfg));
            }
        }
        for k in (0..4).filter(|k| !on.contains(k)) {
            prop_assert!(on.iter().any(|&i| !itlinq_compatible(&g, i, k, &problem, &cfg)));
        }
    }

    #[test]
    fn strongest_link_always_transmits(g in gains_strategy(4)) {
        let problem = RrmProblemConfig::default();
        let p = itlinq_schedule(&NetworkState::from_power_gains(&g), &problem, &ItlinqConfig::default());
        let best = (0..4).max_by(|&a, &b| g[(a, a)].total_cmp(&g[(b, b)]).then(b.cmp(&a))).unwrap();
        prop_assert_eq!(p[best], problem.p_max());
    }

    #[test]
    fn schedule_follows_relabeling(g in gains_strategy(5), perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
        let problem = RrmProblemConfig::default();
        let cfg = ItlinqConfig::default();
        let h = NetworkState::from_power_gains(&g);
        let p = itlinq_schedule(&h, &problem, &cfg);
        let q = itlinq_schedule(&h.permuted(&perm), &problem, &cfg);
        for a in 0..5 {
            prop_assert_eq!(q[a], p[perm[a]]);
        }
    }

    #[test]
    fn huge_margin_is_full_reuse(g in gains_strategy(6)) {
        let problem = RrmProblemConfig::default();
        for ordering in [ItlinqOrdering::BySnrDesc, ItlinqOrdering::ByIndex] {
            let cfg = ItlinqConfig { m_margin_db: 300.0, ordering, ..ItlinqConfig::default() };
            let p = itlinq_schedule(&NetworkState::from_power_gains(&g), &problem, &cfg);
            prop_assert!(p.iter().all(|&x| x == problem.p_max()));
        }
    }
}

#[test]
fn isolated_links_all_transmit() {
    let problem = RrmProblemConfig::default();
    let unit = problem.noise() / problem.p_max();
    let g = DMatrix::from_fn(4, 4, |i, j| if i == j { unit * (10.0 + i as f64) } else { 0.0 });
    let p = itlinq_schedule(&NetworkState::from_power_gains(&g), &problem, &ItlinqConfig::default());
    assert_eq!(p, vec![problem.p_max(); 4]);
    let single = DMatrix::from_element(1, 1, unit * 1e-3);
    let p = itlinq_schedule(&NetworkState::from_power_gains(&single), &problem, &ItlinqConfig::default());
    assert_eq!(p, vec![problem.p_max()]);
}

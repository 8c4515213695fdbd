//! Online execution: dual dynamics, ablations and suite evaluation.

use nalgebra::DMatrix;
use sarrm::baselines::FullReuse;
use sarrm::channel::{DensityMode, NetworkState, Realization, TopologyConfig, DEFAULT_RHO};
use sarrm::diagnostics::random_params;
use sarrm::execution::{evaluate_suite, execute, EpisodeTrace, ExecConfig, GnnPolicy, Policy};
use sarrm::gnn::GnnDims;
use sarrm::rrm::{rates_from_gains, DualVector, RrmProblem, RrmProblemConfig};
use sarrm::Result;

fn problem() -> RrmProblem {
    RrmProblem::power_control(RrmProblemConfig::default())
}

fn realizations(m: usize, n: u64, seed: u64) -> Vec<Realization> {
    let topo = TopologyConfig::with_m(m, DensityMode::Fixed);
    (0..n)
        .map(|i| Realization::generate(&topo, DEFAULT_RHO, sarrm::rng::derive_seed("tests/exec", seed, i)).unwrap())
        .collect()
}

fn gnn(seed: u64) -> GnnPolicy {
    GnnPolicy {
        params: random_params(GnnDims::hidden(16), seed).unwrap(),
    }
}

fn window_means(trace: &EpisodeTrace, k: usize) -> Vec<f64> {
    let rows = &trace.rates[k * trace.t0..(k + 1) * trace.t0];
    (0..trace.m())
        .map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / trace.t0 as f64)
        .collect()
}

#[test]
fn recorded_duals_replay_exactly() {
    let p = problem();
    let cfg = ExecConfig {
        horizon: 103,
        ..ExecConfig::default()
    };
    for (k, r) in realizations(5, 4, 1).iter().enumerate() {
        let trace = execute(&gnn(k as u64), &r.episode(cfg.horizon), &cfg, &p).unwrap();
        assert_eq!(trace.duals.len(), 103 / 5 + 1);
        assert_eq!(trace.replay_duals(&cfg, &p).unwrap(), trace.duals);
    }
}

#[test]
fn unprojected_duals_telescope() {
    // Starting far from the boundary, the projection never fires and the
    // final multiplier is the start minus eta times the summed slacks.
    let p = problem();
    let cfg = ExecConfig {
        horizon: 60,
        mu_init: Some(vec![1e4; 4]),
        ..ExecConfig::default()
    };
    let r = &realizations(4, 1, 2)[0];
    let trace = execute(&gnn(2), &r.episode(cfg.horizon), &cfg, &p).unwrap();
    let f_min = p.cfg.f_min_bps_hz;
    for i in 0..4 {
        let slack: f64 = (0..cfg.horizon / cfg.t0).map(|k| window_means(&trace, k)[i] - f_min).sum();
        let expected = 1e4 - cfg.eta_mu * slack;
        let got = trace.duals.last().unwrap().as_slice()[i];
        assert!((got - expected).abs() <= 1e-9 * 1e4, "user {i}: {got} vs {expected}");
    }
}

#[test]
fn dual_steps_are_bounded_by_the_slack() {
    let p = problem();
    let cfg = ExecConfig::default();
    let r = &realizations(6, 1, 3)[0];
    let trace = execute(&gnn(3), &r.episode(cfg.horizon), &cfg, &p).unwrap();
    let m = trace.m();
    let f_min = p.cfg.f_min_bps_hz;
    let g_max = (0..cfg.horizon / cfg.t0)
        .flat_map(|k| window_means(&trace, k))
        .map(|f| (f - f_min).abs())
        .fold(0.0, f64::max);
    for w in trace.duals.windows(2) {
        let step = w[0]
            .as_slice()
            .iter()
            .zip(w[1].as_slice())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(step <= cfg.eta_mu * (m as f64).sqrt() * g_max * (1.0 + 1e-12));
    }
}

/// Transmits at full power once the user's multiplier reaches one.
struct Threshold;

impl Policy for Threshold {
    fn name(&self) -> String {
        "threshold".into()
    }

    fn decide(&self, _h: &NetworkState, mu: &DualVector, problem: &RrmProblem) -> Result<Vec<f64>> {
        Ok(mu
            .as_slice()
            .iter()
            .map(|&v| if v >= 1.0 { problem.cfg.p_max() } else { 0.0 })
            .collect())
    }
}

#[test]
fn duals_stay_bounded_when_full_power_is_feasible() {
    // No cross talk and direct links strong enough that full power clears
    // f_min. A multiplier below one can grow by at most eta * f_min in one
    // window; at or above one it only shrinks.
    let p = problem();
    let cfg = ExecConfig {
        horizon: 2000,
        ..ExecConfig::default()
    };
    let snr_gain = |t: usize| (1.0 + (t % 7) as f64) * p.cfg.noise() / p.cfg.p_max();
    let states: Vec<NetworkState> = (0..cfg.horizon)
        .map(|t| NetworkState::from_power_gains(&DMatrix::from_fn(3, 3, |i, j| if i == j { snr_gain(t + i) } else { 0.0 })))
        .collect();
    let trace = execute(&Threshold, &states, &cfg, &p).unwrap();
    let cap = 1.0 + cfg.eta_mu * p.cfg.f_min_bps_hz;
    let peak = trace.duals.iter().flat_map(|d| d.as_slice().iter().copied()).fold(0.0, f64::max);
    assert!(peak <= cap, "{peak} > {cap}");
    assert!(trace.final_ergodic_rates().iter().all(|&f| f >= p.cfg.f_min_bps_hz - 0.05));
}

#[test]
fn stopping_at_the_horizon_changes_nothing() {
    let p = problem();
    let data = realizations(4, 3, 4);
    let base = ExecConfig {
        horizon: 50,
        ..ExecConfig::default()
    };
    let stopped = ExecConfig {
        t_stop: Some(50),
        ..base.clone()
    };
    let frozen = ExecConfig {
        t_stop: Some(0),
        ..base.clone()
    };
    let a = evaluate_suite(&gnn(4), &data, &base, &p).unwrap();
    let b = evaluate_suite(&gnn(4), &data, &stopped, &p).unwrap();
    assert_eq!(a.traces, b.traces);
    let c = evaluate_suite(&gnn(4), &data, &frozen, &p).unwrap();
    for t in &c.traces {
        assert!(t.duals.iter().all(|d| d.as_slice().iter().all(|&v| v == 0.0)));
    }
}

#[test]
fn full_reuse_suite_matches_direct_averaging() {
    let p = problem();
    let cfg = ExecConfig {
        horizon: 40,
        feasibility_tolerance: 0.05,
        ..ExecConfig::default()
    };
    let data = realizations(5, 3, 5);
    let suite = evaluate_suite(&FullReuse, &data, &cfg, &p).unwrap();
    let mut pooled = Vec::new();
    for r in &data {
        let mut sum = vec![0.0; r.m];
        for h in r.episode(cfg.horizon) {
            let f = rates_from_gains(&h.power_gains(), &vec![p.cfg.p_max(); r.m], p.cfg.noise());
            sum.iter_mut().zip(&f).for_each(|(s, v)| *s += v);
        }
        pooled.extend(sum.iter().map(|s| s / cfg.horizon as f64));
    }
    assert_eq!(suite.pooled_rates(), pooled);
    let feasible = pooled.iter().filter(|&&f| f >= p.cfg.f_min_bps_hz - 0.05).count();
    assert_eq!(suite.summary.feasibility_fraction, feasible as f64 / pooled.len() as f64);
    assert_eq!(suite.summary.n_users, 15);
}

#[test]
fn duplicating_the_test_set_keeps_pooled_metrics() {
    let p = problem();
    let cfg = ExecConfig {
        horizon: 30,
        ..ExecConfig::default()
    };
    let data = realizations(4, 3, 6);
    let doubled: Vec<Realization> = data.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
    let a = evaluate_suite(&gnn(6), &data, &cfg, &p).unwrap().summary;
    let b = evaluate_suite(&gnn(6), &doubled, &cfg, &p).unwrap().summary;
    assert!((a.mean_rate - b.mean_rate).abs() <= 1e-12 * a.mean_rate.abs().max(1.0));
    assert_eq!(a.feasibility_fraction, b.feasibility_fraction);
    assert_eq!(b.n_users, 2 * a.n_users);
}

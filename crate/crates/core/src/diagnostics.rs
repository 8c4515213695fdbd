//! Finite-difference gradient checks and cheap property batteries, shared by
//! the `gradcheck` / `theorem-suite` subcommands and the test suites.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::channel::{DensityMode, Realization, TopologyConfig, DEFAULT_RHO};
use crate::execution::{dual_update, execute, ExecConfig, GnnPolicy};
use crate::gnn::{
    episode_lagrangian, episode_lagrangian_and_grad, forward, init_params, Conditioning, GnnDims,
    GnnParams, TENSOR_NAMES,
};
use crate::graph::build_graph;
use crate::rng;
use crate::rrm::{rates, DualVector, RrmProblem, RrmProblemConfig};
use crate::Result;

/// Relative error floor: differences below this are treated as absolute.
pub const REL_ERR_FLOOR: f64 = 1e-8;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

#[derive(Clone, Debug, Serialize)]
pub struct CoordinateCheck {
    pub index: usize,
    pub tensor: &'static str,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub checks: Vec<CoordinateCheck>,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct GradcheckSetup {
    pub m: usize,
    pub horizon: usize,
    pub hidden: usize,
    pub coordinates: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradcheckSetup {
    fn default() -> Self {
        Self {
            m: 6,
            horizon: 10,
            hidden: 16,
            coordinates: 50,
            step: 1e-6,
            seed: 0,
        }
    }
}

/// Random parameters with nonzero biases, so every tensor carries gradient.
pub fn random_params(dims: GnnDims, seed: u64) -> Result<GnnParams> {
    let mut p = init_params(dims, seed)?;
    let mut r = rng::stream("diagnostics/bias", seed, 0);
    for layer in &mut p.layers {
        layer.bias = layer.bias.map(|_| r.random_range(-0.3..0.3));
    }
    p.readout_bias[(0, 0)] = r.random_range(-0.3..0.3);
    Ok(p)
}

/// Compare the analytic episode-Lagrangian gradient with central differences
/// on coordinates spread evenly over all weight tensors.
pub fn gradcheck(setup: &GradcheckSetup) -> Result<GradcheckReport> {
    let problem = RrmProblem::power_control(RrmProblemConfig::default());
    let topo = TopologyConfig {
        area_side_m: Some(500.0),
        ..TopologyConfig::with_m(setup.m, DensityMode::Variable)
    };
    let episode = Realization::generate(&topo, DEFAULT_RHO, setup.seed)?.episode(setup.horizon);
    let mut r = rng::stream("diagnostics/gradcheck", setup.seed, 0);
    let mu = DualVector::project((0..setup.m).map(|_| r.random_range(0.0..2.0)).collect());
    let params = random_params(GnnDims::hidden(setup.hidden), setup.seed)?;
    let analytic =
        episode_lagrangian_and_grad(&episode, &mu, &params, &problem, Conditioning::Duals)?.grad;

    // Pick coordinates tensor by tensor, round-robin.
    let mut per_tensor: Vec<Vec<usize>> = Vec::new();
    let mut offset = 0;
    for t in params.tensors() {
        let mut idx: Vec<usize> = (offset..offset + t.len()).collect();
        idx.shuffle(&mut r);
        per_tensor.push(idx);
        offset += t.len();
    }
    let mut chosen = Vec::with_capacity(setup.coordinates);
    let mut round = 0;
    while chosen.len() < setup.coordinates && round < offset {
        for idx in &per_tensor {
            if let Some(&k) = idx.get(round) {
                if chosen.len() < setup.coordinates {
                    chosen.push(k);
                }
            }
        }
        round += 1;
    }

    let value = |p: &GnnParams| -> Result<f64> {
        Ok(episode_lagrangian(&episode, &mu, p, &problem, Conditioning::Duals)?.0)
    };
    let mut checks = Vec::with_capacity(chosen.len());
    for k in chosen {
        let mut plus = params.clone();
        plus.set(k, params.get(k) + setup.step);
        let mut minus = params.clone();
        minus.set(k, params.get(k) - setup.step);
        let numeric = (value(&plus)? - value(&minus)?) / (2.0 * setup.step);
        let a = analytic.get(k);
        checks.push(CoordinateCheck {
            index: k,
            tensor: TENSOR_NAMES[params.locate(k).expect("in range").0],
            analytic: a,
            numeric,
            rel_err: relative_error(a, numeric),
        });
    }
    let max_rel_err = checks.iter().map(|c| c.rel_err).fold(0.0, f64::max);
    Ok(GradcheckReport { checks, max_rel_err })
}

/// Random permutation of `0..m`.
pub fn random_permutation(m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..m).collect();
    p.shuffle(rng);
    p
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> PropertyResult {
    PropertyResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Max deviation `|forward(relabel(g)) - relabel(forward(g))|` over random
/// permutations and network sizes.
pub fn permutation_deviation(trials: usize, seed: u64) -> Result<(f64, bool)> {
    let problem = RrmProblem::power_control(RrmProblemConfig::default());
    let params = random_params(GnnDims::hidden(16), seed)?;
    let mut r = rng::stream("diagnostics/perm", seed, 0);
    let mut worst: f64 = 0.0;
    let mut rates_exact = true;
    for trial in 0..trials {
        let m = 3 + trial % 6;
        let topo = TopologyConfig {
            area_side_m: Some(600.0),
            ..TopologyConfig::with_m(m, DensityMode::Variable)
        };
        let h = &Realization::generate(&topo, DEFAULT_RHO, seed + trial as u64)?.episode(1)[0];
        let mu = DualVector::project((0..m).map(|_| r.random_range(0.0..3.0)).collect());
        let perm = random_permutation(m, &mut r);
        let out = forward(&build_graph(h, &mu, &problem.cfg)?, &params, problem.cfg.p_max())?;
        let hp = h.permuted(&perm);
        let out_p = forward(&build_graph(&hp, &mu.permuted(&perm), &problem.cfg)?, &params, problem.cfg.p_max())?;
        for (a, &k) in perm.iter().enumerate() {
            worst = worst.max((out_p.powers[a] - out.powers[k]).abs());
        }
        let p: Vec<f64> = (0..m).map(|_| r.random_range(0.0..problem.cfg.p_max())).collect();
        let f = rates(h, &p, &problem.cfg)?;
        let pp: Vec<f64> = perm.iter().map(|&k| p[k]).collect();
        let fp = rates(&hp, &pp, &problem.cfg)?;
        rates_exact &= perm.iter().enumerate().all(|(a, &k)| fp[a] == f[k]);
        let g = problem.constraints.value(&f);
        let gp = problem.constraints.value(&fp);
        rates_exact &= perm.iter().enumerate().all(|(a, &k)| gp[a] == g[k]);
    }
    Ok((worst, rates_exact))
}

/// Dual-dynamics arithmetic, permutation equivariance and trace replay on
/// an untrained policy. Fast; meant as a smoke battery.
pub fn theorem_suite(seed: u64) -> Result<Vec<PropertyResult>> {
    let mut out = Vec::new();
    let problem = RrmProblem::power_control(RrmProblemConfig::default());
    let cfg = ExecConfig::default();

    let f_min = problem.cfg.f_min_bps_hz;
    let w = |r: f64| vec![vec![r]; cfg.t0];
    let one = |v: f64| DualVector::new(vec![v]).expect("nonnegative");
    let a = dual_update(&one(0.5), &w(f_min), &cfg, &problem)?;
    let b = dual_update(&one(0.5), &w(f_min + 0.01), &cfg, &problem)?;
    let c = dual_update(&one(0.1), &w(f_min + 0.01), &cfg, &problem)?;
    let ok = a.as_slice()[0] == 0.5
        && (b.as_slice()[0] - 0.3).abs() < 1e-12
        && c.as_slice()[0] == 0.0;
    out.push(check(
        "dual_update_arithmetic",
        ok,
        format!("{:?} {:?} {:?}", a.as_slice(), b.as_slice(), c.as_slice()),
    ));

    let (dev, exact) = permutation_deviation(20, seed)?;
    out.push(check("gnn_permutation_equivariance", dev < 1e-9, format!("max deviation {dev:e}")));
    out.push(check("rates_permutation_exact", exact, String::new()));

    let params = random_params(GnnDims::hidden(16), seed)?;
    let topo = TopologyConfig {
        area_side_m: Some(500.0),
        ..TopologyConfig::with_m(6, DensityMode::Variable)
    };
    let r = Realization::generate(&topo, DEFAULT_RHO, seed)?;
    let exec = ExecConfig {
        horizon: 200,
        ..ExecConfig::default()
    };
    let trace = execute(&GnnPolicy { params }, &r.episode(exec.horizon), &exec, &problem)?;
    let replay = trace.replay_duals(&exec, &problem)?;
    out.push(check("dual_replay_bit_exact", replay == trace.duals, String::new()));
    let violations = violation_response_failures(&trace.rates, &trace.duals, exec.t0, f_min);
    out.push(check(
        "violation_raises_dual",
        violations == 0,
        format!("{violations} exceptions"),
    ));
    out.push(check(
        "duals_nonnegative",
        trace.duals.iter().all(|d| d.as_slice().iter().all(|&v| v >= 0.0)),
        String::new(),
    ));
    Ok(out)
}

/// Count `(user, window)` pairs where the window-mean rate is below `f_min`
/// but the dual did not strictly increase.
pub fn violation_response_failures(
    rates: &[Vec<f64>],
    duals: &[DualVector],
    t0: usize,
    f_min: f64,
) -> usize {
    let m = rates.first().map_or(0, Vec::len);
    let mut failures = 0;
    for k in 0..rates.len() / t0 {
        let window = &rates[k * t0..(k + 1) * t0];
        for i in 0..m {
            let mean = window.iter().map(|r| r[i]).sum::<f64>() / t0 as f64;
            if mean < f_min && duals[k + 1].as_slice()[i] <= duals[k].as_slice()[i] {
                failures += 1;
            }
        }
    }
    failures
}

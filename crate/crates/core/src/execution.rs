//! Online execution: a frozen policy driven by projected dual descent.
//!
//! At step `t` the policy sees `(H_t, mu_k)` with `k = floor(t / T0)`. After
//! the last step of each window, `mu_{k+1} = [mu_k - eta_mu g(window mean)]_+`
//! and the new multiplier first applies at step `(k + 1) T0`. A trailing
//! partial window never triggers an update.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{NetworkState, Realization};
use crate::gnn::{forward, GnnParams};
use crate::graph::build_graph;
use crate::rrm::{metrics, rates_from_gains, DualVector, MetricsSummary, RrmProblem};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecConfig {
    pub horizon: usize,
    pub t0: usize,
    pub eta_mu: f64,
    /// Starting multipliers; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_init: Option<Vec<f64>>,
    /// Duals are frozen from this step on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_stop: Option<usize>,
    /// Users with ergodic rate >= f_min - tolerance count as feasible.
    #[serde(default)]
    pub feasibility_tolerance: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        Self {
            horizon: 100,
            t0: 5,
            eta_mu: 20.0,
            mu_init: None,
            t_stop: None,
            feasibility_tolerance: 0.0,
        }
    }
}

impl ExecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t0 == 0 || self.horizon < self.t0 || !(self.eta_mu > 0.0) {
            return Err(Error::InvalidConfig(
                "execution needs T0 >= 1, T >= T0 and eta_mu > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn initial_duals(&self, m: usize) -> Result<DualVector> {
        match &self.mu_init {
            Some(v) if v.len() == m => DualVector::new(v.clone()),
            Some(v) => Err(Error::DimensionMismatch(format!(
                "mu_init has {} entries for {m} users",
                v.len()
            ))),
            None => Ok(DualVector::zeros(m)),
        }
    }

    /// Whether the update closing at step `t` is applied.
    pub fn updates_at(&self, t: usize) -> bool {
        self.t_stop.is_none_or(|stop| t < stop)
    }
}

/// A power-control decision rule.
pub trait Policy: Send + Sync {
    fn name(&self) -> String;
    fn decide(&self, h: &NetworkState, mu: &DualVector, problem: &RrmProblem) -> Result<Vec<f64>>;
}

/// The trained state-augmented GNN.
#[derive(Clone, Debug)]
pub struct GnnPolicy {
    pub params: GnnParams,
}

impl Policy for GnnPolicy {
    fn name(&self) -> String {
        "state_augmented".into()
    }

    fn decide(&self, h: &NetworkState, mu: &DualVector, problem: &RrmProblem) -> Result<Vec<f64>> {
        let graph = build_graph(h, mu, &problem.cfg)?;
        Ok(forward(&graph, &self.params, problem.cfg.p_max())?.powers)
    }
}

/// Projected dual descent on the window-mean constraint slack.
pub fn dual_update(
    mu: &DualVector,
    window_rates: &[Vec<f64>],
    cfg: &ExecConfig,
    problem: &RrmProblem,
) -> Result<DualVector> {
    if window_rates.len() != cfg.t0 {
        return Err(Error::WindowLengthMismatch {
            got: window_rates.len(),
            expected: cfg.t0,
        });
    }
    let m = mu.len();
    let mut mean = vec![0.0; m];
    for row in window_rates {
        if row.len() != m {
            return Err(Error::DimensionMismatch("window row length".into()));
        }
        for (a, f) in mean.iter_mut().zip(row) {
            *a += f;
        }
    }
    mean.iter_mut().for_each(|a| *a /= cfg.t0 as f64);
    let g = problem.constraints.value(&mean);
    Ok(DualVector::project(
        mu.as_slice()
            .iter()
            .zip(&g)
            .map(|(u, g)| u - cfg.eta_mu * g)
            .collect(),
    ))
}

/// Per-step record of one execution run. Rows are time steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub powers: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
    /// `duals[k]` is in force for steps `k T0 .. (k + 1) T0`; there are
    /// `floor(T / T0) + 1` rows, the last being the iterate after the final update.
    pub duals: Vec<DualVector>,
    /// Running time-average of the rates up to and including each step.
    pub ergodic_rates: Vec<Vec<f64>>,
    pub t0: usize,
}

impl EpisodeTrace {
    pub fn m(&self) -> usize {
        self.rates.first().map_or(0, Vec::len)
    }

    pub fn horizon(&self) -> usize {
        self.rates.len()
    }

    pub fn final_ergodic_rates(&self) -> &[f64] {
        self.ergodic_rates.last().map_or(&[], Vec::as_slice)
    }

    pub fn dual_at(&self, t: usize) -> &DualVector {
        &self.duals[t / self.t0]
    }

    /// Recompute the dual sequence from the recorded rates.
    pub fn replay_duals(&self, cfg: &ExecConfig, problem: &RrmProblem) -> Result<Vec<DualVector>> {
        let mut mu = self.duals[0].clone();
        let mut out = vec![mu.clone()];
        for k in 0..self.horizon() / cfg.t0 {
            let end = (k + 1) * cfg.t0;
            if cfg.updates_at(end - 1) {
                mu = dual_update(&mu, &self.rates[end - cfg.t0..end], cfg, problem)?;
            }
            out.push(mu.clone());
        }
        Ok(out)
    }
}

/// Run `policy` over the first `cfg.horizon` states.
pub fn execute(
    policy: &dyn Policy,
    states: &[NetworkState],
    cfg: &ExecConfig,
    problem: &RrmProblem,
) -> Result<EpisodeTrace> {
    cfg.validate()?;
    if states.len() < cfg.horizon {
        return Err(Error::DimensionMismatch(format!(
            "{} network states for a horizon of {}",
            states.len(),
            cfg.horizon
        )));
    }
    let m = states[0].m();
    let noise = problem.cfg.noise();
    let p_max = problem.cfg.p_max();
    let mut mu = cfg.initial_duals(m)?;
    let mut trace = EpisodeTrace {
        powers: Vec::with_capacity(cfg.horizon),
        rates: Vec::with_capacity(cfg.horizon),
        duals: vec![mu.clone()],
        ergodic_rates: Vec::with_capacity(cfg.horizon),
        t0: cfg.t0,
    };
    let mut cumulative = vec![0.0; m];
    for (t, h) in states[..cfg.horizon].iter().enumerate() {
        if h.m() != m {
            return Err(Error::DimensionMismatch("network size changed mid-episode".into()));
        }
        let p = policy.decide(h, &mu, problem)?;
        if p.len() != m || p.iter().any(|&x| !(0.0..=p_max).contains(&x)) {
            return Err(Error::DimensionMismatch(format!(
                "policy {} returned an invalid power vector",
                policy.name()
            )));
        }
        let f = rates_from_gains(&h.power_gains(), &p, noise);
        for (c, r) in cumulative.iter_mut().zip(&f) {
            *c += r;
        }
        trace
            .ergodic_rates
            .push(cumulative.iter().map(|c| c / (t + 1) as f64).collect());
        trace.powers.push(p);
        trace.rates.push(f);
        if (t + 1) % cfg.t0 == 0 {
            if cfg.updates_at(t) {
                mu = dual_update(&mu, &trace.rates[t + 1 - cfg.t0..=t], cfg, problem)?;
            }
            trace.duals.push(mu.clone());
        }
    }
    Ok(trace)
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub summary: MetricsSummary,
    pub per_realization: Vec<MetricsSummary>,
    pub traces: Vec<EpisodeTrace>,
}

impl SuiteResult {
    /// Final ergodic rates of every user in every realization, in dataset order.
    pub fn pooled_rates(&self) -> Vec<f64> {
        self.traces
            .iter()
            .flat_map(|t| t.final_ergodic_rates().iter().copied())
            .collect()
    }
}

/// Execute `policy` on every realization and pool the users' ergodic rates.
pub fn evaluate_suite(
    policy: &dyn Policy,
    dataset: &[Realization],
    cfg: &ExecConfig,
    problem: &RrmProblem,
) -> Result<SuiteResult> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("test dataset"));
    }
    let traces: Vec<EpisodeTrace> = dataset
        .par_iter()
        .map(|r| execute(policy, &r.episode(cfg.horizon), cfg, problem))
        .collect::<Result<_>>()?;
    let f_min = problem.cfg.f_min_bps_hz;
    let tol = cfg.feasibility_tolerance;
    let per_realization = traces
        .iter()
        .map(|t| metrics(t.final_ergodic_rates(), f_min, tol))
        .collect::<Result<_>>()?;
    let pooled: Vec<f64> = traces
        .iter()
        .flat_map(|t| t.final_ergodic_rates().iter().copied())
        .collect();
    Ok(SuiteResult {
        summary: metrics(&pooled, f_min, tol)?,
        per_realization,
        traces,
    })
}

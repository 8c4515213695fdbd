//! Comparison policies: full reuse, ITLinQ scheduling and early-stopped duals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{NetworkState, Realization};
use crate::execution::{evaluate_suite, ExecConfig, GnnPolicy, Policy, SuiteResult};
use crate::gnn::GnnParams;
use crate::rrm::{DualVector, RrmProblem, RrmProblemConfig};
use crate::{Error, Result};

pub fn full_reuse(h: &NetworkState, cfg: &RrmProblemConfig) -> Vec<f64> {
    vec![cfg.p_max(); h.m()]
}

/// Every transmitter at `P_max`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FullReuse;

impl Policy for FullReuse {
    fn name(&self) -> String {
        PolicyId::FullReuse.to_string()
    }

    fn decide(&self, h: &NetworkState, _mu: &DualVector, problem: &RrmProblem) -> Result<Vec<f64>> {
        Ok(full_reuse(h, &problem.cfg))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItlinqOrdering {
    /// Descending SNR, ties broken by lower user index.
    #[default]
    BySnrDesc,
    ByIndex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItlinqConfig {
    pub eta_exponent: f64,
    pub m_margin_db: f64,
    #[serde(default)]
    pub ordering: ItlinqOrdering,
}

impl Default for ItlinqConfig {
    fn default() -> Self {
        Self {
            eta_exponent: 0.7,
            m_margin_db: 25.0,
            ordering: ItlinqOrdering::BySnrDesc,
        }
    }
}

impl ItlinqConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta_exponent > 0.0 && self.eta_exponent <= 1.0 && self.m_margin_db.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad ITLinQ config {self:?}")))
        }
    }
}

/// Order in which ITLinQ visits links.
pub fn itlinq_order(h: &NetworkState, cfg: &ItlinqConfig) -> Vec<usize> {
    let g = h.power_gains();
    let mut order: Vec<usize> = (0..h.m()).collect();
    if cfg.ordering == ItlinqOrdering::BySnrDesc {
        order.sort_by(|&a, &b| g[(b, b)].total_cmp(&g[(a, a)]).then(a.cmp(&b)));
    }
    order
}

/// Whether links `i` and `j` may both transmit.
pub fn itlinq_compatible(
    gains: &nalgebra::DMatrix<f64>,
    i: usize,
    j: usize,
    problem: &RrmProblemConfig,
    cfg: &ItlinqConfig,
) -> bool {
    let scale = problem.p_max() / problem.noise();
    let margin = 10f64.powf(cfg.m_margin_db / 10.0);
    let snr = |k: usize| scale * gains[(k, k)];
    let inr = |a: usize, b: usize| scale * gains[(a, b)];
    inr(i, j) <= margin * snr(i).powf(cfg.eta_exponent)
        && inr(j, i) <= margin * snr(j).powf(cfg.eta_exponent)
}

/// Greedy ITLinQ pass; scheduled links get `P_max`, the rest 0.
pub fn itlinq_schedule(h: &NetworkState, problem: &RrmProblemConfig, cfg: &ItlinqConfig) -> Vec<f64> {
    let gains = h.power_gains();
    let mut scheduled: Vec<usize> = Vec::new();
    for j in itlinq_order(h, cfg) {
        if scheduled
            .iter()
            .all(|&i| itlinq_compatible(&gains, i, j, problem, cfg))
        {
            scheduled.push(j);
        }
    }
    let mut p = vec![0.0; h.m()];
    for i in scheduled {
        p[i] = problem.p_max();
    }
    p
}

#[derive(Clone, Debug, Default)]
pub struct Itlinq(pub ItlinqConfig);

impl Policy for Itlinq {
    fn name(&self) -> String {
        PolicyId::Itlinq.to_string()
    }

    fn decide(&self, h: &NetworkState, _mu: &DualVector, problem: &RrmProblem) -> Result<Vec<f64>> {
        Ok(itlinq_schedule(h, &problem.cfg, &self.0))
    }
}

/// State-augmented execution with duals frozen from `t_stop` on.
pub fn early_stopped_baseline(
    params: &GnnParams,
    dataset: &[Realization],
    exec: &ExecConfig,
    t_stop: usize,
    problem: &RrmProblem,
) -> Result<SuiteResult> {
    let cfg = ExecConfig {
        t_stop: Some(t_stop),
        ..exec.clone()
    };
    evaluate_suite(&GnnPolicy { params: params.clone() }, dataset, &cfg, problem)
}

/// Policy labels used in every CSV `policy` column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyId {
    StateAugmented,
    FullReuse,
    Itlinq,
    EarlyStop(usize),
}

impl PolicyId {
    pub fn needs_checkpoint(self) -> bool {
        matches!(self, PolicyId::StateAugmented | PolicyId::EarlyStop(_))
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyId::StateAugmented => f.write_str("state_augmented"),
            PolicyId::FullReuse => f.write_str("full_reuse"),
            PolicyId::Itlinq => f.write_str("itlinq"),
            PolicyId::EarlyStop(t) => write!(f, "early_stop_{t}"),
        }
    }
}

impl FromStr for PolicyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "state_augmented" => Ok(PolicyId::StateAugmented),
            "full_reuse" => Ok(PolicyId::FullReuse),
            "itlinq" => Ok(PolicyId::Itlinq),
            _ => s
                .strip_prefix("early_stop_")
                .and_then(|t| t.parse().ok())
                .map(PolicyId::EarlyStop)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown policy {s:?}"))),
        }
    }
}

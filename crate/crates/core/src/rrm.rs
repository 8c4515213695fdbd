//! Rates, utility, constraints, Lagrangians and evaluation metrics.
//!
//! Everything here works in linear power units (mW) and bps/Hz. Decibel
//! values only appear in [`RrmProblemConfig`].

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::NetworkState;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RrmProblemConfig {
    pub p_max_dbm: f64,
    pub noise_dbm: f64,
    pub f_min_bps_hz: f64,
}

impl Default for RrmProblemConfig {
    fn default() -> Self {
        Self {
            p_max_dbm: 10.0,
            noise_dbm: -104.0,
            f_min_bps_hz: 0.6,
        }
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

impl RrmProblemConfig {
    /// Maximum transmit power in mW.
    pub fn p_max(&self) -> f64 {
        dbm_to_mw(self.p_max_dbm)
    }

    /// Noise variance in mW.
    pub fn noise(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_max() > 0.0
            && self.p_max().is_finite()
            && self.noise() > 0.0
            && self.f_min_bps_hz >= 0.0
        {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad problem config {self:?}")))
        }
    }
}

/// Nonnegative per-user multipliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DualVector(Vec<f64>);

impl DualVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0))
        {
            return Err(Error::NegativeDual { index, value });
        }
        Ok(Self(values))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn filled(m: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self(perm.iter().map(|&k| self.0[k]).collect())
    }

    /// `[v]_+`, the projection onto the nonnegative orthant.
    pub fn project(values: Vec<f64>) -> Self {
        Self(values.into_iter().map(|v| v.max(0.0)).collect())
    }
}

impl TryFrom<Vec<f64>> for DualVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DualVector> for Vec<f64> {
    fn from(d: DualVector) -> Self {
        d.0
    }
}

fn check_len(what: &str, got: usize, m: usize) -> Result<()> {
    if got == m {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!("{what} has length {got}, expected {m}")))
    }
}

/// Per-receiver rates with interference treated as noise.
///
/// `gains[(j, i)]` is `|h_ji|^2`, the power gain from Tx j to Rx i.
/// Interference terms are summed in ascending order, so relabeling the
/// users permutes the result bit-exactly.
pub fn rates_from_gains(gains: &DMatrix<f64>, p: &[f64], noise: f64) -> Vec<f64> {
    let m = p.len();
    let mut terms = Vec::with_capacity(m);
    (0..m)
        .map(|i| {
            terms.clear();
            terms.extend((0..m).filter(|&j| j != i).map(|j| p[j] * gains[(j, i)]));
            terms.sort_unstable_by(f64::total_cmp);
            let interference: f64 = terms.iter().sum();
            (p[i] * gains[(i, i)] / (noise + interference)).ln_1p() / std::f64::consts::LN_2
        })
        .collect()
}

pub fn rates(h: &NetworkState, p: &[f64], cfg: &RrmProblemConfig) -> Result<Vec<f64>> {
    check_len("power vector", p.len(), h.m())?;
    Ok(rates_from_gains(&h.power_gains(), p, cfg.noise()))
}

/// Vector-Jacobian product `(df/dp)^T w` for [`rates_from_gains`].
///
/// With `D_i = N + sum_j p_j g_ji` and `E_i = D_i - p_i g_ii`,
/// `df_i/dp_k = (g_ki / D_i - [k != i] g_ki / E_i) / ln 2`.
pub fn rates_vjp(gains: &DMatrix<f64>, p: &[f64], noise: f64, w: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut out = vec![0.0; m];
    for i in 0..m {
        if w[i] == 0.0 {
            continue;
        }
        let total: f64 = noise + (0..m).map(|j| p[j] * gains[(j, i)]).sum::<f64>();
        let without_signal = total - p[i] * gains[(i, i)];
        let a = w[i] / std::f64::consts::LN_2;
        for (k, o) in out.iter_mut().enumerate() {
            let mut d = gains[(k, i)] / total;
            if k != i {
                d -= gains[(k, i)] / without_signal;
            }
            *o += a * d;
        }
    }
    out
}

/// Network utility of an ergodic rate vector.
pub trait Utility: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// Ergodic constraints `g(x) >= 0`.
pub trait Constraints: Send + Sync {
    fn value(&self, x: &[f64]) -> Vec<f64>;
    /// `J_g(x)^T w`.
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SumRate;

impl Utility for SumRate {
    fn value(&self, x: &[f64]) -> f64 {
        utility_sum(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        vec![1.0; x.len()]
    }
}

/// `g_i(x) = x_i - f_min`.
#[derive(Clone, Copy, Debug)]
pub struct MinRate {
    pub f_min: f64,
}

impl Constraints for MinRate {
    fn value(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v - self.f_min).collect()
    }

    fn vjp(&self, _x: &[f64], w: &[f64]) -> Vec<f64> {
        w.to_vec()
    }
}

/// Sum rate, correctly rounded: independent of the order of the users.
pub fn utility_sum(avg_f: &[f64]) -> f64 {
    exact_sum(avg_f)
}

/// Correctly rounded sum of finite values (Shewchuk's partials).
fn exact_sum(values: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for &v in values {
        let mut x = v;
        let mut kept = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // Round the nonoverlapping partials to nearest, as in Python's fsum.
    let mut hi = 0.0;
    if let Some(mut n) = partials.len().checked_sub(1) {
        hi = partials[n];
        let mut lo = 0.0;
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = partials[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

pub fn constraints_g(avg_f: &[f64], cfg: &RrmProblemConfig) -> Vec<f64> {
    MinRate {
        f_min: cfg.f_min_bps_hz,
    }
    .value(avg_f)
}

/// Sum-rate/min-rate Lagrangian in closed form:
/// `sum_i (1 + mu_i) x_i - f_min sum_i mu_i`.
pub fn lagrangian(avg_f: &[f64], mu: &DualVector, cfg: &RrmProblemConfig) -> Result<f64> {
    check_len("dual vector", mu.len(), avg_f.len())?;
    let mu = mu.as_slice();
    let weighted: Vec<f64> = avg_f.iter().zip(mu).map(|(x, u)| (1.0 + u) * x).collect();
    Ok(exact_sum(&weighted) - cfg.f_min_bps_hz * exact_sum(mu))
}

/// A utility/constraint pair over an instance configuration.
#[derive(Clone)]
pub struct RrmProblem {
    pub cfg: RrmProblemConfig,
    pub utility: Arc<dyn Utility>,
    pub constraints: Arc<dyn Constraints>,
}

impl fmt::Debug for RrmProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RrmProblem").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl RrmProblem {
    /// Sum-rate utility with per-user minimum-rate constraints.
    pub fn power_control(cfg: RrmProblemConfig) -> Self {
        let f_min = cfg.f_min_bps_hz;
        Self {
            cfg,
            utility: Arc::new(SumRate),
            constraints: Arc::new(MinRate { f_min }),
        }
    }

    /// `U(x) + mu^T g(x)`.
    pub fn lagrangian(&self, avg_f: &[f64], mu: &DualVector) -> Result<f64> {
        let g = self.constraints.value(avg_f);
        check_len("dual vector", mu.len(), g.len())?;
        let penalty: f64 = g.iter().zip(mu.as_slice()).map(|(g, u)| g * u).sum();
        Ok(self.utility.value(avg_f) + penalty)
    }

    /// Gradient of the Lagrangian with respect to the ergodic rates.
    pub fn lagrangian_grad(&self, avg_f: &[f64], mu: &DualVector) -> Vec<f64> {
        let mut grad = self.utility.gradient(avg_f);
        for (g, c) in grad.iter_mut().zip(self.constraints.vjp(avg_f, mu.as_slice())) {
            *g += c;
        }
        grad
    }
}

/// Summary statistics over pooled per-user ergodic rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mean_rate: f64,
    pub min_rate_trimmed: f64,
    pub p5_rate: f64,
    pub feasibility_fraction: f64,
    pub n_users: usize,
}

/// Linear-interpolation quantile of sorted data (position `q (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Pooled metrics. Users count as feasible when their rate is at least
/// `f_min - tolerance`. The trimmed minimum drops the lowest `ceil(n / 100)`
/// rates (always keeping at least one).
pub fn metrics(rates: &[f64], f_min: f64, tolerance: f64) -> Result<MetricsSummary> {
    if rates.is_empty() {
        return Err(Error::EmptyInput("rate collection"));
    }
    let n = rates.len();
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let trim = (n as f64 * 0.01).ceil() as usize;
    let trim = trim.min(n - 1);
    let feasible = rates.iter().filter(|&&r| r >= f_min - tolerance).count();
    Ok(MetricsSummary {
        mean_rate: rates.iter().sum::<f64>() / n as f64,
        min_rate_trimmed: sorted[trim],
        p5_rate: quantile_sorted(&sorted, 0.05),
        feasibility_fraction: feasible as f64 / n as f64,
        n_users: n,
    })
}

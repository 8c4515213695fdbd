//! Offline training of the state-augmented policy.
//!
//! Each iteration draws `B` dual vectors from the sampling distribution and
//! `B` cached channel realizations, rolls every episode with its dual vector
//! held fixed, and takes one ascent step along the batch-mean gradient of the
//! episode Lagrangians. Nothing in this module touches the dual update: the
//! multipliers seen in training are samples, not iterates.
//!
//! All randomness is keyed by iteration index (see [`crate::rng`]), so a run
//! resumed from a checkpoint at iteration `n` continues exactly as the
//! uninterrupted run would have.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Realization;
use crate::gnn::{
    apply_update, episode_lagrangian_and_grad, init_params, AdamState, Conditioning, GnnDims,
    GnnParams,
};
use crate::rng::{self, purpose};
use crate::rrm::{DualVector, RrmProblem};
use crate::{Error, Result};

/// The non-augmented oracle is only trained on toy networks.
pub const ORACLE_MAX_USERS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuDistribution {
    Uniform { low: f64, high: f64 },
}

impl Default for MuDistribution {
    fn default() -> Self {
        MuDistribution::Uniform {
            low: 0.0,
            high: 1.0,
        }
    }
}

impl MuDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MuDistribution::Uniform { low, high } if low >= 0.0 && low < high && high.is_finite() => Ok(()),
            ref other => Err(Error::UnsupportedDistribution(format!("{other:?}"))),
        }
    }
}

/// `batch` i.i.d. dual vectors of length `m`.
pub fn sample_duals(m: usize, batch: usize, dist: &MuDistribution, seed: u64) -> Result<Vec<DualVector>> {
    dist.validate()?;
    let MuDistribution::Uniform { low, high } = *dist;
    let mut rng = rng::stream(purpose::MU, seed, 0);
    Ok((0..batch)
        .map(|_| DualVector::project((0..m).map(|_| rng.random_range(low..high)).collect()))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Plain stochastic gradient ascent.
    #[default]
    Sga,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrDecay {
    pub factor: f64,
    pub every_epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Total iterations; `None` means `epochs * ceil(dataset / batch_size)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_iters: Option<usize>,
    pub batch_size: usize,
    pub episode_len: usize,
    /// Primal step size; `None` means `0.1 / m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_phi: Option<f64>,
    pub mu_distribution: MuDistribution,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_decay: Option<LrDecay>,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    /// Write a checkpoint every this many iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    /// Fill the `wall_ms` log column (makes logs run-dependent).
    #[serde(default)]
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_iters: None,
            batch_size: 128,
            episode_len: 100,
            eta_phi: None,
            mu_distribution: MuDistribution::default(),
            epochs: 100,
            lr_decay: None,
            optimizer: OptimizerKind::Sga,
            checkpoint_every: None,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.mu_distribution.validate()?;
        if self.batch_size == 0 || self.episode_len == 0 {
            return Err(Error::InvalidConfig("batch_size and episode_len must be >= 1".into()));
        }
        if let Some(eta) = self.eta_phi {
            if !(eta > 0.0) {
                return Err(Error::InvalidConfig("eta_phi must be positive".into()));
            }
        }
        if let Some(d) = self.lr_decay {
            if !(d.factor > 0.0) || d.every_epochs == 0 {
                return Err(Error::InvalidConfig("bad learning-rate decay".into()));
            }
        }
        Ok(())
    }

    pub fn eta_for(&self, m: usize) -> f64 {
        self.eta_phi.unwrap_or(0.1 / m as f64)
    }

    pub fn iters_per_epoch(&self, dataset_len: usize) -> usize {
        dataset_len.div_ceil(self.batch_size).max(1)
    }

    pub fn total_iters(&self, dataset_len: usize) -> usize {
        self.n_iters
            .unwrap_or(self.epochs * self.iters_per_epoch(dataset_len))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iteration: usize,
    pub mean_lagrangian: f64,
    pub mean_sum_rate: f64,
    pub mean_constraint_slack: f64,
    pub wall_ms: u64,
}

pub type TrainingLog = Vec<LogRow>;

/// Everything needed to continue training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: GnnParams,
    pub adam: Option<AdamState>,
    pub iterations_done: usize,
}

impl TrainState {
    pub fn fresh(dims: GnnDims, seed: u64, optimizer: OptimizerKind) -> Result<Self> {
        Ok(Self {
            params: init_params(dims, rng::derive_seed(purpose::INIT, seed, 0))?,
            adam: (optimizer == OptimizerKind::Adam).then(|| AdamState::new(dims)),
            iterations_done: 0,
        })
    }
}

/// Where the per-sample dual vectors come from.
#[derive(Clone, Debug)]
pub enum MuSource {
    Sample(MuDistribution),
    Fixed(DualVector),
}

/// Batch-mean statistics and gradient for one parameter point.
#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub mean_lagrangian: f64,
    pub mean_sum_rate: f64,
    pub mean_constraint_slack: f64,
    pub grad: GnnParams,
}

/// The training loop over a fixed dataset.
pub struct Trainer<'a> {
    pub cfg: &'a TrainConfig,
    pub problem: &'a RrmProblem,
    pub dataset: &'a [Realization],
    pub seed: u64,
    pub mu_source: MuSource,
    pub conditioning: Conditioning,
    m: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        cfg: &'a TrainConfig,
        problem: &'a RrmProblem,
        dataset: &'a [Realization],
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let first = dataset.first().ok_or(Error::EmptyInput("training dataset"))?;
        let m = first.m;
        if dataset.iter().any(|r| r.m != m) {
            return Err(Error::DimensionMismatch("training realizations differ in m".into()));
        }
        Ok(Self {
            cfg,
            problem,
            dataset,
            seed,
            mu_source: MuSource::Sample(cfg.mu_distribution.clone()),
            conditioning: Conditioning::Duals,
            m,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Dataset index of the `k`-th sample drawn overall (per-epoch shuffles).
    pub fn sample_index(&self, k: usize) -> usize {
        let n = self.dataset.len();
        let epoch = k / n;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(purpose::SHUFFLE, self.seed, epoch as u64));
        order[k % n]
    }

    /// Realization indices and dual vectors for iteration `n`.
    pub fn batch(&self, n: usize) -> Result<Vec<(usize, DualVector)>> {
        let b = self.cfg.batch_size;
        let mus = match &self.mu_source {
            MuSource::Sample(dist) => {
                sample_duals(self.m, b, dist, rng::derive_seed(purpose::MU, self.seed, n as u64))?
            }
            MuSource::Fixed(mu) => vec![mu.clone(); b],
        };
        Ok(mus
            .into_iter()
            .enumerate()
            .map(|(i, mu)| (self.sample_index(n * b + i), mu))
            .collect())
    }

    /// Evaluate every batch element (in parallel) and reduce in index order.
    pub fn evaluate_batch(&self, params: &GnnParams, items: &[(usize, DualVector)]) -> Result<BatchOutcome> {
        let t = self.cfg.episode_len;
        let outcomes: Vec<_> = items
            .par_iter()
            .map(|(idx, mu)| {
                let episode = self.dataset[*idx].episode(t);
                episode_lagrangian_and_grad(&episode, mu, params, self.problem, self.conditioning)
            })
            .collect::<Result<_>>()?;
        let b = items.len() as f64;
        let mut grad = params.zeros_like();
        let (mut lag, mut sum_rate, mut slack) = (0.0, 0.0, 0.0);
        for o in &outcomes {
            grad.add_scaled(&o.grad, 1.0);
            lag += o.lagrangian;
            sum_rate += self.problem.utility.value(&o.avg_rates);
            let g = self.problem.constraints.value(&o.avg_rates);
            slack += g.iter().sum::<f64>() / g.len() as f64;
        }
        grad.scale(1.0 / b);
        Ok(BatchOutcome {
            mean_lagrangian: lag / b,
            mean_sum_rate: sum_rate / b,
            mean_constraint_slack: slack / b,
            grad,
        })
    }

    fn step_size(&self, n: usize) -> f64 {
        let eta = self.cfg.eta_for(self.m);
        match self.cfg.lr_decay {
            Some(d) => {
                let epoch = n / self.cfg.iters_per_epoch(self.dataset.len());
                eta * d.factor.powi((epoch / d.every_epochs) as i32)
            }
            None => eta,
        }
    }

    /// Run iterations `state.iterations_done .. total`, calling `on_iter`
    /// after each update.
    pub fn run(
        &self,
        mut state: TrainState,
        total: usize,
        mut on_iter: impl FnMut(&TrainState, &LogRow) -> Result<()>,
    ) -> Result<(TrainState, TrainingLog)> {
        let mut log = Vec::new();
        for n in state.iterations_done..total {
            let started = Instant::now();
            let items = self.batch(n)?;
            let out = self.evaluate_batch(&state.params, &items).map_err(|e| match e {
                Error::NonFiniteActivation { .. } => Error::NonFiniteLoss { iteration: n },
                other => other,
            })?;
            if !out.mean_lagrangian.is_finite() || !out.grad.is_finite() {
                return Err(Error::NonFiniteLoss { iteration: n });
            }
            let eta = self.step_size(n);
            state.params = match state.adam.as_mut() {
                Some(adam) => adam.step(&state.params, &out.grad, eta),
                None => apply_update(&state.params, &out.grad, eta),
            };
            state.iterations_done = n + 1;
            let row = LogRow {
                iteration: n,
                mean_lagrangian: out.mean_lagrangian,
                mean_sum_rate: out.mean_sum_rate,
                mean_constraint_slack: out.mean_constraint_slack,
                wall_ms: if self.cfg.record_wall_time {
                    started.elapsed().as_millis() as u64
                } else {
                    0
                },
            };
            on_iter(&state, &row)?;
            log.push(row);
        }
        Ok((state, log))
    }
}

/// Train from `state` to the configured iteration count.
pub fn train(
    cfg: &TrainConfig,
    problem: &RrmProblem,
    dataset: &[Realization],
    seed: u64,
    state: TrainState,
) -> Result<(TrainState, TrainingLog)> {
    let trainer = Trainer::new(cfg, problem, dataset, seed)?;
    trainer.run(state, cfg.total_iters(dataset.len()), |_, _| Ok(()))
}

/// Train a non-augmented policy (constant node features) that maximizes
/// `L_mu` for one fixed `mu`. Used to measure how close the state-augmented
/// policy comes to per-multiplier optima on toy networks.
pub fn train_per_mu_oracle(
    mu: &DualVector,
    cfg: &TrainConfig,
    problem: &RrmProblem,
    dataset: &[Realization],
    dims: GnnDims,
    seed: u64,
) -> Result<GnnParams> {
    let mut trainer = Trainer::new(cfg, problem, dataset, seed)?;
    if trainer.m() > ORACLE_MAX_USERS {
        return Err(Error::SizeLimitExceeded {
            m: trainer.m(),
            limit: ORACLE_MAX_USERS,
        });
    }
    if mu.len() != trainer.m() {
        return Err(Error::DimensionMismatch("oracle dual vector length".into()));
    }
    trainer.mu_source = MuSource::Fixed(mu.clone());
    trainer.conditioning = Conditioning::Constant(1.0);
    let state = TrainState::fresh(dims, seed, cfg.optimizer)?;
    let (state, _) = trainer.run(state, cfg.total_iters(dataset.len()), |_, _| Ok(()))?;
    Ok(state.params)
}

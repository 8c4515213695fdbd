//! Experiment harness behind the command-line tool: configuration, cached
//! datasets, training/evaluation drivers and CSV output.
//!
//! Every emitted CSV starts with one comment line
//! `# sarrm <version> config_hash=<sha256> seed=<master seed>`, followed by a
//! header row. Column orders are fixed:
//!
//! | file | columns |
//! |------|---------|
//! | `training_log.csv` | iteration, mean_lagrangian, mean_sum_rate, mean_constraint_slack, wall_ms |
//! | `metrics.csv` | policy, realization, m, mean_rate, min_rate_trimmed, p5_rate, feasibility_fraction, n_users |
//! | `trace.csv` | policy, t, user, power_norm, rate, ergodic_rate, mu_current |
//! | `cdf.csv` | policy, rate, cumulative_fraction |
//! | `timing.csv` | policy, m, steps, mean_inference_ms |
//! | `metrics_vs_m.csv` | policy, m, mean_rate, min_rate_trimmed, p5_rate, feasibility_fraction, n_users |
//!
//! The `realization` column of `metrics.csv` holds the dataset index, or
//! `pooled` for the summary row over all users of all realizations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{FullReuse, Itlinq, ItlinqConfig, PolicyId};
use crate::channel::{Realization, TopologyConfig, DEFAULT_RHO};
use crate::checkpoint::Checkpoint;
use crate::execution::{evaluate_suite, ExecConfig, GnnPolicy, Policy, SuiteResult};
use crate::gnn::{GnnDims, GnnParams};
use crate::rng;
use crate::rrm::{MetricsSummary, RrmProblem, RrmProblemConfig};
use crate::training::{LogRow, TrainConfig, TrainState, Trainer, TrainingLog};
use crate::{Error, Result, VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub train_samples: usize,
    pub test_samples: usize,
    /// AR(1) coefficient of the small-scale fading.
    pub rho: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            train_samples: 256,
            test_samples: 128,
            rho: DEFAULT_RHO,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselinesConfig {
    pub itlinq: ItlinqConfig,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Emit `timing.csv` from `eval`. Timings differ between runs.
    #[serde(default)]
    pub record_timing: bool,
}

/// Complete, seedable description of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub topology: TopologyConfig,
    pub problem: RrmProblemConfig,
    pub gnn: GnnDims,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub exec: ExecConfig,
    #[serde(default)]
    pub baselines: BaselinesConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("runs/default"),
            topology: TopologyConfig::default(),
            problem: RrmProblemConfig::default(),
            gnn: GnnDims::default(),
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            exec: ExecConfig::default(),
            baselines: BaselinesConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidConfig(format!("unknown split {s:?}"))),
        }
    }
}

impl ExperimentConfig {
    /// Scaled-down experiment that runs in well under a minute per seed:
    /// 6 users in a 500 m square, 300 training iterations of 16 episodes of
    /// 50 steps, 400-step execution on 32 test networks, feasibility judged
    /// with a 0.05 bps/Hz tolerance.
    pub fn desk() -> Self {
        let base = Self::default();
        Self {
            output_dir: PathBuf::from("runs/desk"),
            topology: TopologyConfig {
                area_side_m: Some(500.0),
                ..TopologyConfig::with_m(6, base.topology.density_mode)
            },
            dataset: DatasetConfig {
                test_samples: 32,
                ..base.dataset
            },
            train: TrainConfig {
                n_iters: Some(300),
                batch_size: 16,
                episode_len: 50,
                ..base.train
            },
            exec: ExecConfig {
                horizon: 400,
                feasibility_tolerance: 0.05,
                ..base.exec
            },
            ..base
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.problem.validate()?;
        self.gnn.validate()?;
        self.train.validate()?;
        self.exec.validate()?;
        self.baselines.itlinq.validate()?;
        if !(0.0..=1.0).contains(&self.dataset.rho) {
            return Err(Error::InvalidConfig("rho must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// The config with `output_dir` cleared: where results are written is
    /// not part of what they depend on.
    fn identity(&self) -> Self {
        Self {
            output_dir: PathBuf::new(),
            ..self.clone()
        }
    }

    /// Compact JSON in declaration order, without `output_dir`; the hashing preimage.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.identity()).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Config embedded in checkpoints (without `output_dir`).
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self.identity()).expect("config serializes")
    }

    /// Apply command-line overrides. Changing `m` re-derives the area from
    /// the density mode unless an explicit side length is configured.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>, m: Option<usize>) -> Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(o) = out {
            self.output_dir = o;
        }
        if let Some(m) = m {
            self.topology.m = m;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn problem_instance(&self) -> RrmProblem {
        RrmProblem::power_control(self.problem.clone())
    }

    pub fn dataset_dir(&self, split: Split) -> PathBuf {
        self.output_dir
            .join("data")
            .join(format!("{}_m{}", split.as_str(), self.topology.m))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output_dir.join("checkpoint.json")
    }

    fn csv_banner(&self) -> String {
        format!("# sarrm {VERSION} config_hash={} seed={}\n", self.hash(), self.seed)
    }
}

/// Seed of realization `index` in `split`, derived from the master seed.
pub fn realization_seed(master: u64, split: Split, index: usize) -> u64 {
    rng::derive_seed(&format!("{}/{}", rng::purpose::SPLIT, split.as_str()), master, index as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationFile {
    pub format: String,
    pub tool_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub index: usize,
    pub realization: Realization,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub tool_version: String,
    pub split: String,
    pub count: usize,
    pub m: usize,
    pub master_seed: u64,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of the manifest file contents.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn generate_realizations(cfg: &ExperimentConfig, split: Split) -> Result<Vec<Realization>> {
    let count = match split {
        Split::Train => cfg.dataset.train_samples,
        Split::Test => cfg.dataset.test_samples,
    };
    (0..count)
        .map(|i| Realization::generate(&cfg.topology, cfg.dataset.rho, realization_seed(cfg.seed, split, i)))
        .collect()
}

/// Write `count` realization files and a manifest under [`ExperimentConfig::dataset_dir`].
pub fn cmd_generate(cfg: &ExperimentConfig, split: Split) -> Result<Manifest> {
    let dir = cfg.dataset_dir(split);
    let hash = cfg.hash();
    let realizations = generate_realizations(cfg, split)?;
    let mut files = Vec::with_capacity(realizations.len());
    for (index, r) in realizations.iter().enumerate() {
        let name = format!("realization_{index:04}.json");
        let rec = RealizationFile {
            format: "sarrm-realization".into(),
            tool_version: VERSION.into(),
            config_hash: hash.clone(),
            master_seed: cfg.seed,
            index,
            realization: r.clone(),
        };
        let mut text = serde_json::to_string_pretty(&rec).expect("realization serializes");
        text.push('\n');
        write_file(&dir.join(&name), &text)?;
        files.push(name);
    }
    let manifest = Manifest {
        format: "sarrm-manifest".into(),
        tool_version: VERSION.into(),
        split: split.as_str().into(),
        count: realizations.len(),
        m: cfg.topology.m,
        master_seed: cfg.seed,
        config_hash: hash,
        seeds: realizations.iter().map(|r| r.seed).collect(),
        files,
    };
    write_file(&dir.join("manifest.json"), &manifest.to_json())?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<Vec<Realization>> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e))?;
    manifest
        .files
        .iter()
        .map(|name| {
            let p = dir.join(name);
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            let rec: RealizationFile = serde_json::from_str(&text).map_err(|e| Error::format(&p, e))?;
            Ok(rec.realization)
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e)
}

/// CSV writer that prefixes the provenance banner.
struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<Vec<u8>>,
    banner: String,
}

impl CsvOut {
    fn new(path: PathBuf, cfg: &ExperimentConfig, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(|e| csv_error(&path, e))?;
        Ok(Self {
            path,
            writer,
            banner: cfg.csv_banner(),
        })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields).map_err(|e| csv_error(&self.path, e))
    }

    fn finish(self) -> Result<PathBuf> {
        let body = self
            .writer
            .into_inner()
            .map_err(|e| Error::format(&self.path, e.to_string()))?;
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut f = fs::File::create(&self.path).map_err(|e| Error::io(&self.path, e))?;
        f.write_all(self.banner.as_bytes())
            .and_then(|_| f.write_all(&body))
            .map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

pub const TRAINING_LOG_COLUMNS: [&str; 5] = [
    "iteration",
    "mean_lagrangian",
    "mean_sum_rate",
    "mean_constraint_slack",
    "wall_ms",
];

pub const METRICS_COLUMNS: [&str; 8] = [
    "policy",
    "realization",
    "m",
    "mean_rate",
    "min_rate_trimmed",
    "p5_rate",
    "feasibility_fraction",
    "n_users",
];

pub const TRACE_COLUMNS: [&str; 7] = ["policy", "t", "user", "power_norm", "rate", "ergodic_rate", "mu_current"];
pub const CDF_COLUMNS: [&str; 3] = ["policy", "rate", "cumulative_fraction"];
pub const TIMING_COLUMNS: [&str; 4] = ["policy", "m", "steps", "mean_inference_ms"];

pub fn write_training_log(path: &Path, cfg: &ExperimentConfig, log: &[LogRow]) -> Result<PathBuf> {
    let mut out = CsvOut::new(path.to_path_buf(), cfg, &TRAINING_LOG_COLUMNS)?;
    for r in log {
        out.row(&[
            r.iteration.to_string(),
            r.mean_lagrangian.to_string(),
            r.mean_sum_rate.to_string(),
            r.mean_constraint_slack.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    out.finish()
}

pub fn read_training_log(path: &Path) -> Result<TrainingLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    rdr.deserialize().map(|r| r.map_err(|e| csv_error(path, e))).collect()
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    pub log: TrainingLog,
    pub checkpoint: PathBuf,
    pub log_path: PathBuf,
}

/// Train on the cached train split, optionally resuming from a checkpoint.
pub fn cmd_train(cfg: &ExperimentConfig, resume: Option<&Path>) -> Result<TrainOutcome> {
    let dataset = load_dataset(&cfg.dataset_dir(Split::Train))?;
    let problem = cfg.problem_instance();
    let hash = cfg.hash();
    let echo = cfg.echo();
    let log_path = cfg.output_dir.join("training_log.csv");

    let (state, mut log) = match resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if ck.dims != cfg.gnn {
                return Err(Error::CheckpointDimMismatch {
                    expected: format!("{:?}", cfg.gnn),
                    found: format!("{:?}", ck.dims),
                });
            }
            let state = ck.to_state(path)?;
            let done = state.iterations_done;
            let previous = if log_path.exists() {
                read_training_log(&log_path)?
                    .into_iter()
                    .filter(|r| r.iteration < done)
                    .collect()
            } else {
                Vec::new()
            };
            (state, previous)
        }
        None => (TrainState::fresh(cfg.gnn, cfg.seed, cfg.train.optimizer)?, Vec::new()),
    };

    let trainer = Trainer::new(&cfg.train, &problem, &dataset, cfg.seed)?;
    let total = cfg.train.total_iters(dataset.len());
    let every = cfg.train.checkpoint_every;
    let (state, new_rows) = trainer.run(state, total, |st, _| {
        if let Some(k) = every {
            if k > 0 && st.iterations_done % k == 0 {
                let path = cfg
                    .output_dir
                    .join("checkpoints")
                    .join(format!("checkpoint_{:06}.json", st.iterations_done));
                Checkpoint::from_state(st, cfg.seed, &hash, echo.clone()).save(&path)?;
            }
        }
        Ok(())
    })?;
    log.extend(new_rows);
    let checkpoint = cfg.checkpoint_path();
    Checkpoint::from_state(&state, cfg.seed, &hash, echo).save(&checkpoint)?;
    write_training_log(&log_path, cfg, &log)?;
    Ok(TrainOutcome {
        state,
        log,
        checkpoint,
        log_path,
    })
}

/// Load GNN parameters, rejecting checkpoints whose dims differ from the config.
pub fn load_params(cfg: &ExperimentConfig, path: &Path) -> Result<GnnParams> {
    let ck = Checkpoint::load(path)?;
    if ck.dims != cfg.gnn {
        return Err(Error::CheckpointDimMismatch {
            expected: format!("{:?}", cfg.gnn),
            found: format!("{:?}", ck.dims),
        });
    }
    ck.to_state(path).map(|s| s.params)
}

fn policy_for(
    id: PolicyId,
    cfg: &ExperimentConfig,
    params: Option<&GnnParams>,
) -> Result<(Box<dyn Policy>, ExecConfig)> {
    let mut exec = cfg.exec.clone();
    let policy: Box<dyn Policy> = match id {
        PolicyId::FullReuse => Box::new(FullReuse),
        PolicyId::Itlinq => Box::new(Itlinq(cfg.baselines.itlinq.clone())),
        PolicyId::StateAugmented | PolicyId::EarlyStop(_) => {
            let params = params.ok_or_else(|| {
                Error::InvalidConfig(format!("policy {id} needs a checkpoint"))
            })?;
            if let PolicyId::EarlyStop(t) = id {
                exec.t_stop = Some(t);
            }
            Box::new(GnnPolicy {
                params: params.clone(),
            })
        }
    };
    Ok((policy, exec))
}

fn metrics_fields(policy: &str, realization: &str, m: usize, s: &MetricsSummary) -> Vec<String> {
    vec![
        policy.to_string(),
        realization.to_string(),
        m.to_string(),
        s.mean_rate.to_string(),
        s.min_rate_trimmed.to_string(),
        s.p5_rate.to_string(),
        s.feasibility_fraction.to_string(),
        s.n_users.to_string(),
    ]
}

/// Sorted pooled rates with their empirical CDF values `k / n`.
pub fn cdf_points(rates: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(k, r)| (r, (k + 1) as f64 / n))
        .collect()
}

#[derive(Clone, Debug)]
pub struct PolicyRun {
    pub policy: PolicyId,
    pub suite: SuiteResult,
}

#[derive(Clone, Debug, Default)]
pub struct EvalOutputs {
    pub runs: Vec<PolicyRun>,
    pub files: Vec<PathBuf>,
}

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    pub trace: bool,
    pub cdf: bool,
}

fn run_policies(
    cfg: &ExperimentConfig,
    ids: &[PolicyId],
    params: Option<&GnnParams>,
    dir: &Path,
    opts: &EvalOptions,
) -> Result<EvalOutputs> {
    let dataset = load_dataset(&cfg.dataset_dir(Split::Test))?;
    let problem = cfg.problem_instance();
    let p_max = problem.cfg.p_max();
    let m = cfg.topology.m;
    let mut metrics = CsvOut::new(dir.join("metrics.csv"), cfg, &METRICS_COLUMNS)?;
    let mut cdf = CsvOut::new(dir.join("cdf.csv"), cfg, &CDF_COLUMNS)?;
    let mut trace = CsvOut::new(dir.join("trace.csv"), cfg, &TRACE_COLUMNS)?;
    let mut timing = CsvOut::new(dir.join("timing.csv"), cfg, &TIMING_COLUMNS)?;
    let mut out = EvalOutputs::default();

    for &id in ids {
        let (policy, exec) = policy_for(id, cfg, params)?;
        let suite = evaluate_suite(policy.as_ref(), &dataset, &exec, &problem)?;
        let label = id.to_string();
        for (k, s) in suite.per_realization.iter().enumerate() {
            metrics.row(&metrics_fields(&label, &k.to_string(), dataset[k].m, s))?;
        }
        metrics.row(&metrics_fields(&label, "pooled", m, &suite.summary))?;
        if opts.cdf {
            for (r, c) in cdf_points(&suite.pooled_rates()) {
                cdf.row(&[label.clone(), r.to_string(), c.to_string()])?;
            }
        }
        if opts.trace {
            let tr = &suite.traces[0];
            for t in 0..tr.horizon() {
                for u in 0..tr.m() {
                    trace.row(&[
                        label.clone(),
                        t.to_string(),
                        u.to_string(),
                        (tr.powers[t][u] / p_max).to_string(),
                        tr.rates[t][u].to_string(),
                        tr.ergodic_rates[t][u].to_string(),
                        tr.dual_at(t).as_slice()[u].to_string(),
                    ])?;
                }
            }
        }
        if cfg.output.record_timing {
            let states = dataset[0].episode(exec.horizon);
            let mu = exec.initial_duals(states[0].m())?;
            let started = Instant::now();
            for h in &states {
                policy.decide(h, &mu, &problem)?;
            }
            let ms = started.elapsed().as_secs_f64() * 1e3 / states.len() as f64;
            timing.row(&[label.clone(), m.to_string(), states.len().to_string(), ms.to_string()])?;
        }
        out.runs.push(PolicyRun { policy: id, suite });
    }
    out.files.push(metrics.finish()?);
    if opts.cdf {
        out.files.push(cdf.finish()?);
    }
    if opts.trace {
        out.files.push(trace.finish()?);
    }
    if cfg.output.record_timing {
        out.files.push(timing.finish()?);
    }
    Ok(out)
}

/// Evaluate one policy on the cached test split.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    policy: PolicyId,
    opts: &EvalOptions,
) -> Result<EvalOutputs> {
    let params = match (policy.needs_checkpoint(), checkpoint) {
        (true, Some(p)) => Some(load_params(cfg, p)?),
        (true, None) => Some(load_params(cfg, &cfg.checkpoint_path())?),
        (false, _) => None,
    };
    let dir = cfg
        .output_dir
        .join("eval")
        .join(format!("{policy}_m{}", cfg.topology.m));
    run_policies(cfg, &[policy], params.as_ref(), &dir, opts)
}

/// Full reuse and ITLinQ, plus the state-augmented policy and its
/// early-stopped variants (`t_stop` in `{0, T/5, T}`) when a checkpoint is given.
pub fn cmd_baselines(cfg: &ExperimentConfig, checkpoint: Option<&Path>, opts: &EvalOptions) -> Result<EvalOutputs> {
    let params = checkpoint.map(|p| load_params(cfg, p)).transpose()?;
    let mut ids = vec![PolicyId::FullReuse, PolicyId::Itlinq];
    if params.is_some() {
        let t = cfg.exec.horizon;
        ids.extend([
            PolicyId::StateAugmented,
            PolicyId::EarlyStop(0),
            PolicyId::EarlyStop(t / 5),
            PolicyId::EarlyStop(t),
        ]);
    }
    let dir = cfg
        .output_dir
        .join("baselines")
        .join(format!("m{}", cfg.topology.m));
    run_policies(cfg, &ids, params.as_ref(), &dir, opts)
}

pub const METRICS_VS_M_COLUMNS: [&str; 7] = [
    "policy",
    "m",
    "mean_rate",
    "min_rate_trimmed",
    "p5_rate",
    "feasibility_fraction",
    "n_users",
];

/// Pooled metrics of one policy on test splits of several sizes. Missing
/// test splits are generated first. The checkpoint, if needed, is shared
/// across sizes.
pub fn cmd_metrics_vs_m(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    policy: PolicyId,
    sizes: &[usize],
) -> Result<PathBuf> {
    if sizes.is_empty() {
        return Err(Error::EmptyInput("network sizes"));
    }
    let params = match (policy.needs_checkpoint(), checkpoint) {
        (true, Some(p)) => Some(load_params(cfg, p)?),
        (true, None) => Some(load_params(cfg, &cfg.checkpoint_path())?),
        (false, _) => None,
    };
    let mut out = CsvOut::new(
        cfg.output_dir.join(format!("metrics_vs_m_{policy}.csv")),
        cfg,
        &METRICS_VS_M_COLUMNS,
    )?;
    for &m in sizes {
        let sized = cfg.clone().with_overrides(None, None, Some(m))?;
        if !sized.dataset_dir(Split::Test).join("manifest.json").exists() {
            cmd_generate(&sized, Split::Test)?;
        }
        let dataset = load_dataset(&sized.dataset_dir(Split::Test))?;
        let problem = sized.problem_instance();
        let (pol, exec) = policy_for(policy, &sized, params.as_ref())?;
        let s = evaluate_suite(pol.as_ref(), &dataset, &exec, &problem)?.summary;
        out.row(&[
            policy.to_string(),
            m.to_string(),
            s.mean_rate.to_string(),
            s.min_rate_trimmed.to_string(),
            s.p5_rate.to_string(),
            s.feasibility_fraction.to_string(),
            s.n_users.to_string(),
        ])?;
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn shipped_configs_match_presets() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        assert_eq!(ExperimentConfig::load(&dir.join("default.toml")).unwrap(), ExperimentConfig::default());
        assert_eq!(ExperimentConfig::load(&dir.join("desk.toml")).unwrap(), ExperimentConfig::desk());
    }

    #[test]
    fn hash_tracks_every_field() {
        let base = ExperimentConfig::default();
        let h = base.hash();
        let mut a = base.clone();
        a.exec.eta_mu = 19.0;
        let mut b = base.clone();
        b.topology.pathloss.exponent_far = 3.5;
        let mut c = base.clone();
        c.seed = 1;
        let mut d = base.clone();
        d.train.eta_phi = Some(0.01);
        for other in [a, b, c, d] {
            assert_ne!(other.hash(), h);
        }
        assert_eq!(base.clone().hash(), h);
        let moved = ExperimentConfig {
            output_dir: PathBuf::from("elsewhere"),
            ..base
        };
        assert_eq!(moved.hash(), h);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let mut text = ExperimentConfig::default().to_toml_string();
        text.push_str("\n[bogus]\nx = 1\n");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn cdf_ends_at_one() {
        let pts = cdf_points(&[0.3, 0.1, 0.2, 0.4]);
        assert_eq!(pts.first().unwrap(), &(0.1, 0.25));
        assert_eq!(pts.last().unwrap(), &(0.4, 1.0));
    }
}

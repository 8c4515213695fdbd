//! The state-augmented policy `p(H, mu; phi)`.
//!
//! Two local-extremum message-passing layers followed by a node-wise linear
//! readout and a sigmoid power head. For node `v` a hidden layer computes
//!
//! ```text
//! y'_v = relu( y_v W_root + sum_u w(u, v) (y_v W_center - y_u W_neighbor) + b )
//! ```
//!
//! where the sum runs over every node including `v` itself. In matrix form,
//! with `s = colsum(W)` and `A = W^T Y`, the pre-activation is
//! `Y W_root + diag(s) Y W_center - A W_neighbor + 1 b`.
//!
//! Gradients are hand-derived per layer and checked against central
//! differences in the test suite.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::NetworkState;
use crate::graph::{build_graph, build_graph_with_features, RrmGraph};
use crate::rng::{self, purpose};
use crate::rrm::{rates_from_gains, rates_vjp, DualVector, RrmProblem};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnnDims {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    /// When false, biases stay at zero and receive no updates.
    pub bias: bool,
}

impl Default for GnnDims {
    fn default() -> Self {
        Self {
            input: 1,
            hidden1: 64,
            hidden2: 64,
            bias: true,
        }
    }
}

impl GnnDims {
    pub fn hidden(h: usize) -> Self {
        Self {
            hidden1: h,
            hidden2: h,
            ..Self::default()
        }
    }

    /// `[F0, F1, F2, F3]`.
    pub fn feature_sizes(&self) -> [usize; 4] {
        [self.input, self.hidden1, self.hidden2, 1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(Error::InvalidConfig("GNN feature sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalExtremumLayer {
    pub root: DMatrix<f64>,
    pub center: DMatrix<f64>,
    pub neighbor: DMatrix<f64>,
    /// `1 x F_out`.
    pub bias: DMatrix<f64>,
}

impl LocalExtremumLayer {
    fn zeros(f_in: usize, f_out: usize) -> Self {
        Self {
            root: DMatrix::zeros(f_in, f_out),
            center: DMatrix::zeros(f_in, f_out),
            neighbor: DMatrix::zeros(f_in, f_out),
            bias: DMatrix::zeros(1, f_out),
        }
    }
}

/// All trainable weights. Gradients use the same shape ([`GradAccumulator`]).
#[derive(Clone, Debug, PartialEq)]
pub struct GnnParams {
    pub dims: GnnDims,
    pub layers: [LocalExtremumLayer; 2],
    /// `F2 x 1`.
    pub readout: DMatrix<f64>,
    /// `1 x 1`.
    pub readout_bias: DMatrix<f64>,
}

pub type GradAccumulator = GnnParams;

pub const TENSOR_NAMES: [&str; 10] = [
    "layer1.root",
    "layer1.center",
    "layer1.neighbor",
    "layer1.bias",
    "layer2.root",
    "layer2.center",
    "layer2.neighbor",
    "layer2.bias",
    "readout.weight",
    "readout.bias",
];

impl GnnParams {
    pub fn zeros(dims: GnnDims) -> Self {
        let [f0, f1, f2, _] = dims.feature_sizes();
        Self {
            dims,
            layers: [LocalExtremumLayer::zeros(f0, f1), LocalExtremumLayer::zeros(f1, f2)],
            readout: DMatrix::zeros(f2, 1),
            readout_bias: DMatrix::zeros(1, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims)
    }

    /// Tensors in [`TENSOR_NAMES`] order.
    pub fn tensors(&self) -> [&DMatrix<f64>; 10] {
        let [a, b] = &self.layers;
        [
            &a.root, &a.center, &a.neighbor, &a.bias, &b.root, &b.center, &b.neighbor, &b.bias,
            &self.readout, &self.readout_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut DMatrix<f64>; 10] {
        let [a, b] = &mut self.layers;
        [
            &mut a.root,
            &mut a.center,
            &mut a.neighbor,
            &mut a.bias,
            &mut b.root,
            &mut b.center,
            &mut b.neighbor,
            &mut b.bias,
            &mut self.readout,
            &mut self.readout_bias,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Flat coordinate `k` as `(tensor index, offset into column-major storage)`.
    pub fn locate(&self, mut k: usize) -> Option<(usize, usize)> {
        for (i, t) in self.tensors().iter().enumerate() {
            if k < t.len() {
                return Some((i, k));
            }
            k -= t.len();
        }
        None
    }

    pub fn get(&self, k: usize) -> f64 {
        let (t, off) = self.locate(k).expect("coordinate in range");
        self.tensors()[t].as_slice()[off]
    }

    pub fn set(&mut self, k: usize, value: f64) {
        let (t, off) = self.locate(k).expect("coordinate in range");
        self.tensors_mut()[t].as_mut_slice()[off] = value;
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, other: &Self, alpha: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            *a += b * alpha;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            *t *= alpha;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.tensors()
            .iter()
            .zip(other.tensors())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    fn clear_biases(&mut self) {
        for l in &mut self.layers {
            l.bias.fill(0.0);
        }
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(dims: GnnDims, seed: u64) -> Result<GnnParams> {
    dims.validate()?;
    let mut rng = rng::stream(purpose::INIT, seed, 0);
    let mut params = GnnParams::zeros(dims);
    for (name, t) in TENSOR_NAMES.iter().zip(params.tensors_mut()) {
        if name.ends_with("bias") {
            continue;
        }
        let s = (6.0 / (t.nrows() + t.ncols()) as f64).sqrt();
        for v in t.iter_mut() {
            *v = rng.random_range(-s..s);
        }
    }
    Ok(params)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub powers: Vec<f64>,
    /// Readout before the sigmoid head.
    pub pre_activation: Vec<f64>,
}

struct LayerCache {
    input: DMatrix<f64>,
    scaled: DMatrix<f64>,
    aggregated: DMatrix<f64>,
    pre: DMatrix<f64>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
pub struct ForwardCache {
    in_strength: Vec<f64>,
    layers: Vec<LayerCache>,
    last_hidden: DMatrix<f64>,
    output: PolicyOutput,
}

impl ForwardCache {
    pub fn output(&self) -> &PolicyOutput {
        &self.output
    }
}

fn check_dims(graph: &RrmGraph, params: &GnnParams) -> Result<()> {
    if graph.node_features.ncols() != params.dims.input {
        return Err(Error::DimensionMismatch(format!(
            "graph has {} node features, GNN expects {}",
            graph.node_features.ncols(),
            params.dims.input
        )));
    }
    if graph.node_features.nrows() != graph.m() {
        return Err(Error::DimensionMismatch("node features vs edge weights".into()));
    }
    Ok(())
}

pub fn forward_cached(graph: &RrmGraph, params: &GnnParams, p_max: f64) -> Result<ForwardCache> {
    check_dims(graph, params)?;
    let w = &graph.edge_weights;
    let m = graph.m();
    let in_strength: Vec<f64> = (0..m).map(|v| w.column(v).sum()).collect();

    let mut y = graph.node_features.clone();
    let mut layers = Vec::with_capacity(2);
    for (l, layer) in params.layers.iter().enumerate() {
        let mut scaled = y.clone();
        for (v, mut row) in scaled.row_iter_mut().enumerate() {
            row *= in_strength[v];
        }
        let aggregated = w.tr_mul(&y);
        let mut pre = &y * &layer.root + &scaled * &layer.center - &aggregated * &layer.neighbor;
        for mut row in pre.row_iter_mut() {
            row += &layer.bias;
        }
        if pre.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteActivation { layer: l + 1 });
        }
        let next = pre.map(|v| v.max(0.0));
        layers.push(LayerCache {
            input: y,
            scaled,
            aggregated,
            pre,
        });
        y = next;
    }
    let z = &y * &params.readout;
    let b = params.readout_bias[(0, 0)];
    let pre_activation: Vec<f64> = z.iter().map(|v| v + b).collect();
    if pre_activation.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteActivation { layer: 3 });
    }
    let powers = pre_activation.iter().map(|&v| p_max * sigmoid(v)).collect();
    Ok(ForwardCache {
        in_strength,
        layers,
        last_hidden: y,
        output: PolicyOutput {
            powers,
            pre_activation,
        },
    })
}

pub fn forward(graph: &RrmGraph, params: &GnnParams, p_max: f64) -> Result<PolicyOutput> {
    forward_cached(graph, params, p_max).map(|c| c.output)
}

/// Accumulate `(dpowers/dphi)^T d_powers` into `grad`.
pub fn backward(
    cache: &ForwardCache,
    graph: &RrmGraph,
    params: &GnnParams,
    p_max: f64,
    d_powers: &[f64],
    grad: &mut GradAccumulator,
) {
    let m = graph.m();
    let dz = DMatrix::from_iterator(
        m,
        1,
        cache
            .output
            .pre_activation
            .iter()
            .zip(d_powers)
            .map(|(&z, &d)| {
                let s = sigmoid(z);
                d * p_max * s * (1.0 - s)
            }),
    );
    grad.readout += cache.last_hidden.tr_mul(&dz);
    grad.readout_bias[(0, 0)] += dz.sum();
    let mut d_out = &dz * params.readout.transpose();

    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let c = &cache.layers[l];
        let d_pre = d_out.zip_map(&c.pre, |d, p| if p > 0.0 { d } else { 0.0 });
        let g = &mut grad.layers[l];
        g.root += c.input.tr_mul(&d_pre);
        g.center += c.scaled.tr_mul(&d_pre);
        g.neighbor -= c.aggregated.tr_mul(&d_pre);
        if params.dims.bias {
            for row in d_pre.row_iter() {
                g.bias += row;
            }
        }
        if l == 0 {
            break;
        }
        let mut d_center = &d_pre * layer.center.transpose();
        for (v, mut row) in d_center.row_iter_mut().enumerate() {
            row *= cache.in_strength[v];
        }
        d_out = &d_pre * layer.root.transpose() + d_center
            - &graph.edge_weights * (&d_pre * layer.neighbor.transpose());
    }
}

/// What the GNN sees as node features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Conditioning {
    /// State augmentation: node features are the dual variables.
    Duals,
    /// Constant features, independent of `mu` (the non-augmented policy).
    Constant(f64),
}

pub fn policy_graph(
    h: &NetworkState,
    mu: &DualVector,
    problem: &RrmProblem,
    conditioning: Conditioning,
) -> Result<RrmGraph> {
    match conditioning {
        Conditioning::Duals => build_graph(h, mu, &problem.cfg),
        Conditioning::Constant(c) => {
            build_graph_with_features(h, DMatrix::from_element(h.m(), 1, c), &problem.cfg)
        }
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub lagrangian: f64,
    pub avg_rates: Vec<f64>,
    pub grad: GradAccumulator,
}

fn check_episode(episode: &[NetworkState], mu: &DualVector) -> Result<usize> {
    let first = episode.first().ok_or(Error::EmptyInput("channel episode"))?;
    let m = first.m();
    if mu.len() != m || episode.iter().any(|h| h.m() != m) {
        return Err(Error::DimensionMismatch(format!(
            "episode of {m} users with {} duals",
            mu.len()
        )));
    }
    Ok(m)
}

/// Episode-average rates and `L_mu(phi)` from forward passes only.
pub fn episode_lagrangian(
    episode: &[NetworkState],
    mu: &DualVector,
    params: &GnnParams,
    problem: &RrmProblem,
    conditioning: Conditioning,
) -> Result<(f64, Vec<f64>)> {
    let m = check_episode(episode, mu)?;
    let p_max = problem.cfg.p_max();
    let noise = problem.cfg.noise();
    let mut avg = vec![0.0; m];
    for h in episode {
        let graph = policy_graph(h, mu, problem, conditioning)?;
        let out = forward(&graph, params, p_max)?;
        for (a, f) in avg.iter_mut().zip(rates_from_gains(&h.power_gains(), &out.powers, noise)) {
            *a += f;
        }
    }
    let t = episode.len() as f64;
    avg.iter_mut().for_each(|a| *a /= t);
    Ok((problem.lagrangian(&avg, mu)?, avg))
}

/// `L_mu(phi)` over the episode with `mu` held fixed, and its exact gradient.
pub fn episode_lagrangian_and_grad(
    episode: &[NetworkState],
    mu: &DualVector,
    params: &GnnParams,
    problem: &RrmProblem,
    conditioning: Conditioning,
) -> Result<EpisodeOutcome> {
    let m = check_episode(episode, mu)?;
    let p_max = problem.cfg.p_max();
    let noise = problem.cfg.noise();
    let t = episode.len() as f64;

    let mut steps = Vec::with_capacity(episode.len());
    let mut avg = vec![0.0; m];
    for h in episode {
        let graph = policy_graph(h, mu, problem, conditioning)?;
        let cache = forward_cached(&graph, params, p_max)?;
        let gains = h.power_gains();
        for (a, f) in avg.iter_mut().zip(rates_from_gains(&gains, &cache.output.powers, noise)) {
            *a += f;
        }
        steps.push((graph, cache, gains));
    }
    avg.iter_mut().for_each(|a| *a /= t);
    let lagrangian = problem.lagrangian(&avg, mu)?;

    // dL/df_i(t) = dL/dx_i / T for every step.
    let d_rates: Vec<f64> = problem
        .lagrangian_grad(&avg, mu)
        .into_iter()
        .map(|g| g / t)
        .collect();
    let mut grad = params.zeros_like();
    for (graph, cache, gains) in &steps {
        let d_powers = rates_vjp(gains, &cache.output.powers, noise, &d_rates);
        backward(cache, graph, params, p_max, &d_powers, &mut grad);
    }
    if !params.dims.bias {
        grad.clear_biases();
    }
    Ok(EpisodeOutcome {
        lagrangian,
        avg_rates: avg,
        grad,
    })
}

/// Plain gradient ascent: `phi + eta * grad`.
pub fn apply_update(params: &GnnParams, grad: &GradAccumulator, eta_phi: f64) -> GnnParams {
    let mut next = params.clone();
    next.add_scaled(grad, eta_phi);
    next
}

/// Adam moments for the optional adaptive optimizer (ascent direction).
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first: GnnParams,
    pub second: GnnParams,
    pub steps: u64,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(dims: GnnDims) -> Self {
        Self {
            first: GnnParams::zeros(dims),
            second: GnnParams::zeros(dims),
            steps: 0,
        }
    }

    pub fn step(&mut self, params: &GnnParams, grad: &GradAccumulator, eta: f64) -> GnnParams {
        self.steps += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.steps as i32);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.steps as i32);
        let mut next = params.clone();
        let it = next
            .tensors_mut()
            .into_iter()
            .zip(self.first.tensors_mut())
            .zip(self.second.tensors_mut())
            .zip(grad.tensors());
        for (((p, m1), m2), g) in it {
            for k in 0..p.len() {
                let gk = g.as_slice()[k];
                let a = &mut m1.as_mut_slice()[k];
                *a = ADAM_BETA1 * *a + (1.0 - ADAM_BETA1) * gk;
                let b = &mut m2.as_mut_slice()[k];
                *b = ADAM_BETA2 * *b + (1.0 - ADAM_BETA2) * gk * gk;
                let step = eta * (*a / bc1) / ((*b / bc2).sqrt() + ADAM_EPS);
                p.as_mut_slice()[k] += step;
            }
        }
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rrm::RrmProblemConfig;
    use approx::assert_relative_eq;

    fn small_graph(m: usize, seed: u64) -> RrmGraph {
        let mut rng = rng::stream("test", seed, 0);
        let w = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let f = DMatrix::from_fn(m, 1, |_, _| rng.random_range(0.0..1.0));
        RrmGraph {
            node_features: f,
            edge_weights: w,
            z_norm: 1.0,
        }
    }

    #[test]
    fn zero_params_give_half_power() {
        let p = GnnParams::zeros(GnnDims::hidden(8));
        let out = forward(&small_graph(5, 1), &p, 10.0).unwrap();
        assert!(out.powers.iter().all(|&x| x == 5.0));
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let a = init_params(GnnDims::default(), 4).unwrap();
        assert_eq!(a, init_params(GnnDims::default(), 4).unwrap());
        assert_ne!(a, init_params(GnnDims::default(), 5).unwrap());
        assert!(a.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
        assert_eq!(a.readout_bias[(0, 0)], 0.0);
    }

    #[test]
    fn init_variance_matches_uniform_law() {
        let p = init_params(GnnDims::default(), 7).unwrap();
        let w = &p.layers[1].root;
        let s2 = 6.0 / 128.0;
        let mean = w.mean();
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
        assert!((var / (s2 / 3.0) - 1.0).abs() < 0.2, "{var}");
    }

    /// Two nodes, all feature sizes 1: evaluate the recursion by hand.
    #[test]
    fn two_node_hand_trace() {
        let dims = GnnDims {
            input: 1,
            hidden1: 1,
            hidden2: 1,
            bias: true,
        };
        let mut p = GnnParams::zeros(dims);
        let set = |t: &mut DMatrix<f64>, v: f64| t[(0, 0)] = v;
        set(&mut p.layers[0].root, 0.5);
        set(&mut p.layers[0].center, 1.0);
        set(&mut p.layers[0].neighbor, -2.0);
        set(&mut p.layers[0].bias, 0.1);
        set(&mut p.layers[1].root, 1.5);
        set(&mut p.layers[1].center, -0.5);
        set(&mut p.layers[1].neighbor, 0.25);
        set(&mut p.layers[1].bias, -0.2);
        set(&mut p.readout, 2.0);
        set(&mut p.readout_bias, -1.0);
        let graph = RrmGraph {
            node_features: DMatrix::from_column_slice(2, 1, &[0.3, 0.8]),
            edge_weights: DMatrix::from_row_slice(2, 2, &[0.6, -0.2, 0.4, 0.5]),
            z_norm: 1.0,
        };
        // w(u,v) = W[u][v]; in-strength s_0 = 0.6 + 0.4 = 1.0, s_1 = -0.2 + 0.5 = 0.3
        let relu = |x: f64| x.max(0.0);
        let (y0, y1) = (0.3, 0.8);
        let l1_0 = relu(0.5 * y0 + (0.6 * (y0 - (-2.0) * y0) + 0.4 * (y0 - (-2.0) * y1)) + 0.1);
        let l1_1 = relu(0.5 * y1 + (-0.2 * (y1 + 2.0 * y0) + 0.5 * (y1 + 2.0 * y1)) + 0.1);
        let l2 = |yv: f64, wa: f64, ya: f64, wb: f64, yb: f64| {
            relu(1.5 * yv + wa * (-0.5 * yv - 0.25 * ya) + wb * (-0.5 * yv - 0.25 * yb) - 0.2)
        };
        let l2_0 = l2(l1_0, 0.6, l1_0, 0.4, l1_1);
        let l2_1 = l2(l1_1, -0.2, l1_0, 0.5, l1_1);
        let z = [2.0 * l2_0 - 1.0, 2.0 * l2_1 - 1.0];
        let out = forward(&graph, &p, 10.0).unwrap();
        for v in 0..2 {
            assert_relative_eq!(out.pre_activation[v], z[v], epsilon = 1e-14);
            assert_relative_eq!(out.powers[v], 10.0 / (1.0 + (-z[v]).exp()), epsilon = 1e-12);
        }
    }

    #[test]
    fn param_count_is_size_invariant() {
        let p = init_params(GnnDims::default(), 0).unwrap();
        let n = p.num_params();
        assert_eq!(n, 3 * 64 + 64 + 3 * 64 * 64 + 64 + 64 + 1);
        for m in [4, 16, 64] {
            let out = forward(&small_graph(m, 3), &p, 1.0).unwrap();
            assert_eq!(out.powers.len(), m);
            assert_eq!(p.num_params(), n);
        }
    }

    #[test]
    fn update_rules() {
        let p = init_params(GnnDims::hidden(4), 1).unwrap();
        let zero = p.zeros_like();
        assert_eq!(apply_update(&p, &zero, 0.3), p);
        let g = init_params(GnnDims::hidden(4), 2).unwrap();
        assert_eq!(apply_update(&p, &g, 0.0), p);
        // One step on -(phi - 3)^2 / 2 at phi = 1: slope 2.
        let mut one = GnnParams::zeros(GnnDims::hidden(1));
        one.set(0, 1.0);
        let mut slope = one.zeros_like();
        slope.set(0, -(one.get(0) - 3.0));
        let next = apply_update(&one, &slope, 0.25);
        assert_eq!(next.get(0), 1.0 + 0.25 * 2.0);
    }

    #[test]
    fn mu_zero_value_is_mean_sum_rate() {
        let problem = RrmProblem::power_control(RrmProblemConfig::default());
        let topo = crate::channel::TopologyConfig::with_m(4, crate::channel::DensityMode::Fixed);
        let r = crate::channel::Realization::generate(&topo, 0.9, 3).unwrap();
        let ep = r.episode(6);
        let params = init_params(GnnDims::hidden(8), 0).unwrap();
        let mu = DualVector::zeros(4);
        let out = episode_lagrangian_and_grad(&ep, &mu, &params, &problem, Conditioning::Duals).unwrap();
        let mut total = 0.0;
        for h in &ep {
            let g = build_graph(h, &mu, &problem.cfg).unwrap();
            let pw = forward(&g, &params, problem.cfg.p_max()).unwrap().powers;
            total += crate::rrm::rates(h, &pw, &problem.cfg).unwrap().iter().sum::<f64>();
        }
        assert_relative_eq!(out.lagrangian, total / 6.0, max_relative = 1e-12);

        let mut doubled = ep.clone();
        doubled.extend(ep.iter().cloned());
        let mu = DualVector::new(vec![0.2, 0.0, 1.3, 0.7]).unwrap();
        let a = episode_lagrangian(&ep, &mu, &params, &problem, Conditioning::Duals).unwrap().0;
        let b = episode_lagrangian(&doubled, &mu, &params, &problem, Conditioning::Duals).unwrap().0;
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn feature_mismatch_is_reported() {
        let p = GnnParams::zeros(GnnDims {
            input: 2,
            ..GnnDims::hidden(4)
        });
        assert!(matches!(forward(&small_graph(3, 0), &p, 1.0), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn exploding_weights_are_caught() {
        let mut p = init_params(GnnDims::hidden(4), 0).unwrap();
        p.layers[0].root.fill(f64::MAX);
        p.layers[0].center.fill(f64::MAX);
        assert!(matches!(
            forward(&small_graph(3, 0), &p, 1.0),
            Err(Error::NonFiniteActivation { .. })
        ));
    }
}

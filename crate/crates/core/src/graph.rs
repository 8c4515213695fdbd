//! Per-time-step graph: one node per user, dual variables as node features,
//! a complete directed edge set (self-loops included) weighted by normalized
//! log channel gains.

use nalgebra::DMatrix;

use crate::channel::NetworkState;
use crate::rrm::{DualVector, RrmProblemConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RrmGraph {
    /// `m x F0` node features.
    pub node_features: DMatrix<f64>,
    /// `edge_weights[(u, v)]` weighs the directed edge `u -> v`.
    pub edge_weights: DMatrix<f64>,
    pub z_norm: f64,
}

impl RrmGraph {
    pub fn m(&self) -> usize {
        self.edge_weights.nrows()
    }

    /// Relabel nodes so that new node `a` is old node `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let m = self.m();
        let f = self.node_features.ncols();
        Self {
            node_features: DMatrix::from_fn(m, f, |a, c| self.node_features[(perm[a], c)]),
            edge_weights: DMatrix::from_fn(m, m, |a, b| self.edge_weights[(perm[a], perm[b])]),
            z_norm: self.z_norm,
        }
    }
}

/// Normalizers below this are treated as an all-unit-SNR degenerate network.
const MIN_NORM: f64 = 1e-12;

fn log_snr_matrix(h: &NetworkState, cfg: &RrmProblemConfig) -> Result<DMatrix<f64>> {
    let scale = cfg.p_max() / cfg.noise();
    let g = h.power_gains();
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            if g[(i, j)] == 0.0 {
                return Err(Error::ZeroChannel(i, j));
            }
        }
    }
    Ok(g.map(|v| (scale * v).ln()))
}

/// `Z = || ln(P_max |H|^2 / N) ||_F`.
pub fn edge_normalizer(h: &NetworkState, cfg: &RrmProblemConfig) -> Result<f64> {
    let z = log_snr_matrix(h, cfg)?.norm();
    if z > MIN_NORM && z.is_finite() {
        Ok(z)
    } else {
        Err(Error::DegenerateNorm)
    }
}

/// Graph with the given node features (one column per feature).
pub fn build_graph_with_features(
    h: &NetworkState,
    node_features: DMatrix<f64>,
    cfg: &RrmProblemConfig,
) -> Result<RrmGraph> {
    if node_features.nrows() != h.m() {
        return Err(Error::DimensionMismatch(format!(
            "{} node feature rows for {} users",
            node_features.nrows(),
            h.m()
        )));
    }
    let logs = log_snr_matrix(h, cfg)?;
    let z = logs.norm();
    if !(z > MIN_NORM && z.is_finite()) {
        return Err(Error::DegenerateNorm);
    }
    Ok(RrmGraph {
        node_features,
        edge_weights: logs / z,
        z_norm: z,
    })
}

pub fn build_graph(h: &NetworkState, mu: &DualVector, cfg: &RrmProblemConfig) -> Result<RrmGraph> {
    build_graph_with_features(h, DMatrix::from_column_slice(mu.len(), 1, mu.as_slice()), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex64;
    use approx::assert_relative_eq;

    fn uniform_state(m: usize, snr: f64, cfg: &RrmProblemConfig) -> NetworkState {
        let g = snr * cfg.noise() / cfg.p_max();
        NetworkState::from_power_gains(&DMatrix::from_element(m, m, g))
    }

    #[test]
    fn normalizer_examples() {
        let cfg = RrmProblemConfig::default();
        let z = edge_normalizer(&uniform_state(4, std::f64::consts::E, &cfg), &cfg).unwrap();
        assert_relative_eq!(z, 4.0, epsilon = 1e-12);
        let z = edge_normalizer(&uniform_state(1, std::f64::consts::E.powi(2), &cfg), &cfg).unwrap();
        assert_relative_eq!(z, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn normalizer_errors() {
        let cfg = RrmProblemConfig::default();
        let mut h = uniform_state(2, 10.0, &cfg);
        h.h[(0, 1)] = Complex64::new(0.0, 0.0);
        assert!(matches!(edge_normalizer(&h, &cfg), Err(Error::ZeroChannel(0, 1))));
        assert!(matches!(
            edge_normalizer(&uniform_state(3, 1.0, &cfg), &cfg),
            Err(Error::DegenerateNorm)
        ));
    }

    #[test]
    fn zero_duals_zero_features_and_unit_norm() {
        let cfg = RrmProblemConfig::default();
        let g = DMatrix::from_row_slice(2, 2, &[1e-7, 3e-12, 8e-11, 2e-8]);
        let graph = build_graph(&NetworkState::from_power_gains(&g), &DualVector::zeros(2), &cfg).unwrap();
        assert!(graph.node_features.iter().all(|&x| x == 0.0));
        assert_relative_eq!(graph.edge_weights.norm(), 1.0, epsilon = 1e-12);
    }
}

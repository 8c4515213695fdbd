//! Network topologies and the time-varying channel process.
//!
//! A realization is a set of `m` transmitter/receiver pairs dropped in a
//! square area, the resulting large-scale gains (dual-slope path loss plus
//! log-normal shadowing, fixed for the realization), and a seed for the
//! small-scale Rayleigh process. Small-scale fading evolves as a first-order
//! Gauss-Markov process on every complex coefficient.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{self, purpose};
use crate::{Complex64, Error, Result};

/// Transmitter placement gives up after this many rejected draws for one transmitter.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Default AR(1) coefficient: `J0(2π f_d τ)` for 1 m/s at 2 GHz with 10 ms slots.
pub const DEFAULT_RHO: f64 = 0.956;

/// Users per km² kept constant in fixed-density mode.
pub const FIXED_DENSITY_PER_KM2: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// Area grows with `m`: `R = sqrt(m / 20) * 2 km`.
    Fixed,
    /// `R = 2 km` regardless of `m`.
    Variable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossConfig {
    pub ref_loss_db_at_1m: f64,
    pub exponent_near: f64,
    pub exponent_far: f64,
    pub break_distance_m: f64,
}

impl Default for PathlossConfig {
    fn default() -> Self {
        Self {
            ref_loss_db_at_1m: 40.0,
            exponent_near: 2.0,
            exponent_far: 4.0,
            break_distance_m: 100.0,
        }
    }
}

impl PathlossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.exponent_near > 0.0
            && self.exponent_far >= self.exponent_near
            && self.break_distance_m > 0.0
            && self.ref_loss_db_at_1m.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad path-loss config {self:?}")))
        }
    }

    /// Dual-slope path loss in dB at distance `d` meters.
    pub fn loss_db(&self, d: f64) -> f64 {
        if d <= self.break_distance_m {
            self.ref_loss_db_at_1m + 10.0 * self.exponent_near * d.log10()
        } else {
            self.loss_db(self.break_distance_m)
                + 10.0 * self.exponent_far * (d / self.break_distance_m).log10()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub m: usize,
    pub density_mode: DensityMode,
    /// Explicit side length; overrides the density mode (nonstandard).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_side_m: Option<f64>,
    pub min_tx_separation_m: f64,
    pub rx_annulus_inner_m: f64,
    pub rx_annulus_outer_m: f64,
    pub pathloss: PathlossConfig,
    pub shadowing_sigma_db: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            m: 50,
            density_mode: DensityMode::Variable,
            area_side_m: None,
            min_tx_separation_m: 75.0,
            rx_annulus_inner_m: 10.0,
            rx_annulus_outer_m: 50.0,
            pathloss: PathlossConfig::default(),
            shadowing_sigma_db: 7.0,
        }
    }
}

impl TopologyConfig {
    pub fn with_m(m: usize, density_mode: DensityMode) -> Self {
        Self {
            m,
            density_mode,
            ..Self::default()
        }
    }

    /// Side length `R` of the square deployment area in meters.
    pub fn area_side(&self) -> f64 {
        match (self.area_side_m, self.density_mode) {
            (Some(r), _) => r,
            (None, DensityMode::Fixed) => (self.m as f64 / 20.0).sqrt() * 2000.0,
            (None, DensityMode::Variable) => 2000.0,
        }
    }

    /// True when the area was set explicitly instead of by the density mode.
    pub fn is_nonstandard(&self) -> bool {
        self.area_side_m.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        self.pathloss.validate()?;
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.m == 0 {
            return fail("m must be positive");
        }
        if !(self.area_side() > 0.0) {
            return fail("area side must be positive");
        }
        if !(self.rx_annulus_inner_m >= 0.0 && self.rx_annulus_inner_m < self.rx_annulus_outer_m) {
            return fail("receiver annulus needs 0 <= inner < outer");
        }
        if !(self.min_tx_separation_m >= 0.0) || !(self.shadowing_sigma_db >= 0.0) {
            return fail("separation and shadowing must be nonnegative");
        }
        Ok(())
    }
}

/// Large-scale power gains; `gains_linear[(i, j)]` is Tx i -> Rx j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkGainMatrix {
    #[serde(with = "crate::serde_util::matrix_rows")]
    pub gains_linear: DMatrix<f64>,
    pub tx_positions: Vec<[f64; 2]>,
    pub rx_positions: Vec<[f64; 2]>,
}

impl LinkGainMatrix {
    pub fn m(&self) -> usize {
        self.gains_linear.nrows()
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Drop transmitters and receivers and compute large-scale gains.
pub fn sample_topology(cfg: &TopologyConfig, seed: u64) -> Result<LinkGainMatrix> {
    cfg.validate()?;
    let mut rng = rng::stream(purpose::TOPOLOGY, seed, 0);
    let side = cfg.area_side();
    let m = cfg.m;

    let mut tx: Vec<[f64; 2]> = Vec::with_capacity(m);
    while tx.len() < m {
        let mut attempts = 0;
        loop {
            if attempts == MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::PlacementInfeasible {
                    placed: tx.len(),
                    requested: m,
                    attempts,
                });
            }
            attempts += 1;
            let cand = [rng.random::<f64>() * side, rng.random::<f64>() * side];
            if tx
                .iter()
                .all(|&p| distance(p, cand) >= cfg.min_tx_separation_m)
            {
                tx.push(cand);
                break;
            }
        }
    }

    // Uniform over the annulus area, not the radius.
    let (r2_lo, r2_hi) = (
        cfg.rx_annulus_inner_m.powi(2),
        cfg.rx_annulus_outer_m.powi(2),
    );
    let rx: Vec<[f64; 2]> = tx
        .iter()
        .map(|&[x, y]| {
            let r = rng.random_range(r2_lo..r2_hi).sqrt();
            let theta = rng.random::<f64>() * 2.0 * PI;
            [x + r * theta.cos(), y + r * theta.sin()]
        })
        .collect();

    let shadow = Normal::new(0.0, cfg.shadowing_sigma_db)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut gains = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            // Clamp to the 1 m reference distance so the model never yields gain > ref.
            let d = distance(tx[i], rx[j]).max(1.0);
            let s = shadow.sample(&mut rng);
            gains[(i, j)] = 10f64.powf(-(cfg.pathloss.loss_db(d) + s) / 10.0);
        }
    }
    Ok(LinkGainMatrix {
        gains_linear: gains,
        tx_positions: tx,
        rx_positions: rx,
    })
}

/// Small-scale fading coefficients and the stream that drives them.
#[derive(Clone, Debug)]
pub struct FadingState {
    pub coeffs: DMatrix<Complex64>,
    pub rho: f64,
    rng: ChaCha8Rng,
}

fn sample_cn(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Stationary CN(0, 1) start for an `m x m` AR(1) process.
pub fn init_fading(m: usize, rho: f64, seed: u64) -> FadingState {
    let mut rng = rng::stream(purpose::FADING, seed, 0);
    let coeffs = DMatrix::from_fn(m, m, |_, _| sample_cn(&mut rng));
    FadingState { coeffs, rho, rng }
}

/// One Gauss-Markov step: `c' = rho c + sqrt(1 - rho^2) w`.
pub fn fading_step(mut state: FadingState) -> FadingState {
    let rho = state.rho;
    if rho >= 1.0 {
        return state;
    }
    let innov = (1.0 - rho * rho).sqrt();
    let (rows, cols) = state.coeffs.shape();
    // Column-major fill order, matching init_fading.
    for j in 0..cols {
        for i in 0..rows {
            let w = sample_cn(&mut state.rng);
            state.coeffs[(i, j)] = state.coeffs[(i, j)] * rho + w * innov;
        }
    }
    state
}

/// Complex channel matrix at one time step; `h[(i, j)]` is Tx i -> Rx j.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    pub h: DMatrix<Complex64>,
}

impl NetworkState {
    pub fn from_power_gains(g: &DMatrix<f64>) -> Self {
        Self {
            h: g.map(|x| Complex64::new(x.sqrt(), 0.0)),
        }
    }

    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    /// `|h_ij|^2` for every link.
    pub fn power_gains(&self) -> DMatrix<f64> {
        self.h.map(|c| c.norm_sqr())
    }

    /// Relabel users: entry `(a, b)` of the result is entry `(perm[a], perm[b])`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let m = self.m();
        Self {
            h: DMatrix::from_fn(m, m, |a, b| self.h[(perm[a], perm[b])]),
        }
    }
}

pub fn channel_at(large: &LinkGainMatrix, fading: &FadingState) -> Result<NetworkState> {
    if large.gains_linear.shape() != fading.coeffs.shape() {
        return Err(Error::DimensionMismatch(format!(
            "gains {:?} vs fading {:?}",
            large.gains_linear.shape(),
            fading.coeffs.shape()
        )));
    }
    let h = large
        .gains_linear
        .zip_map(&fading.coeffs, |g, c| c * g.sqrt());
    Ok(NetworkState { h })
}

/// `J0(2π f_d τ)` with `f_d = speed * carrier / c`, via its power series.
pub fn jakes_correlation(speed_mps: f64, carrier_hz: f64, slot_s: f64) -> f64 {
    let x = 2.0 * PI * speed_mps * carrier_hz / 299_792_458.0 * slot_s;
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        term *= q / (k as f64 * k as f64);
        sum += term;
    }
    sum
}

/// One cached sample: a topology plus the seed of its small-scale process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub m: usize,
    pub seed: u64,
    pub fading_seed: u64,
    pub rho: f64,
    pub topology: TopologyConfig,
    pub gains: LinkGainMatrix,
}

impl Realization {
    pub fn generate(topology: &TopologyConfig, rho: f64, seed: u64) -> Result<Self> {
        let gains = sample_topology(topology, seed)?;
        Ok(Self {
            m: topology.m,
            seed,
            fading_seed: rng::derive_seed(purpose::FADING, seed, 0),
            rho,
            topology: topology.clone(),
            gains,
        })
    }

    /// Network states `H_0 .. H_{len-1}`; identical on every call.
    pub fn episode(&self, len: usize) -> Vec<NetworkState> {
        let mut fading = init_fading(self.m, self.rho, self.fading_seed);
        let mut out = Vec::with_capacity(len);
        for t in 0..len {
            if t > 0 {
                fading = fading_step(fading);
            }
            out.push(channel_at(&self.gains, &fading).expect("shapes agree by construction"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn pathloss_continuous_at_break() {
        let pl = PathlossConfig::default();
        let d = pl.break_distance_m;
        let near = pl.ref_loss_db_at_1m + 10.0 * pl.exponent_near * d.log10();
        assert!((pl.loss_db(d) - near).abs() < 1e-9);
        assert!((pl.loss_db(d * (1.0 + 1e-12)) - near).abs() < 1e-9);
        let mut prev = 0.0;
        for k in 1..2000 {
            let l = pl.loss_db(k as f64);
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn zero_shadowing_gain_at_break_distance() {
        let cfg = TopologyConfig {
            m: 1,
            shadowing_sigma_db: 0.0,
            ..TopologyConfig::default()
        };
        let g = sample_topology(&cfg, 3).unwrap();
        let d = distance(g.tx_positions[0], g.rx_positions[0]);
        let expected = 10f64.powf(-cfg.pathloss.loss_db(d) / 10.0);
        assert_abs_diff_eq!(g.gains_linear[(0, 0)], expected, epsilon = 1e-18);
        let at_break = 10f64.powf(-(40.0 + 20.0 * 100f64.log10()) / 10.0);
        assert_abs_diff_eq!(
            10f64.powf(-cfg.pathloss.loss_db(100.0) / 10.0),
            at_break,
            epsilon = 1e-20
        );
    }

    #[test]
    fn area_side_by_density() {
        assert_eq!(TopologyConfig::with_m(50, DensityMode::Variable).area_side(), 2000.0);
        assert_abs_diff_eq!(
            TopologyConfig::with_m(80, DensityMode::Fixed).area_side(),
            4000.0,
            epsilon = 1e-9
        );
        for m in [20, 50, 80, 100, 150, 200] {
            let r_km = TopologyConfig::with_m(m, DensityMode::Fixed).area_side() / 1000.0;
            assert_abs_diff_eq!(m as f64 / (r_km * r_km), FIXED_DENSITY_PER_KM2, epsilon = 1e-9);
        }
    }

    #[test]
    fn placement_respects_geometry_and_is_deterministic() {
        let cfg = TopologyConfig::with_m(30, DensityMode::Fixed);
        let a = sample_topology(&cfg, 11).unwrap();
        let b = sample_topology(&cfg, 11).unwrap();
        assert_eq!(a, b);
        let side = cfg.area_side();
        for (i, &p) in a.tx_positions.iter().enumerate() {
            assert!(p[0] >= 0.0 && p[0] <= side && p[1] >= 0.0 && p[1] <= side);
            for &q in &a.tx_positions[i + 1..] {
                assert!(distance(p, q) >= 75.0);
            }
            let r = distance(p, a.rx_positions[i]);
            assert!((10.0..=50.0).contains(&r));
        }
        assert!(a.gains_linear.iter().all(|&g| g > 0.0));
    }

    #[test]
    fn overcrowded_area_fails_placement() {
        let cfg = TopologyConfig {
            m: 50,
            area_side_m: Some(200.0),
            ..TopologyConfig::default()
        };
        assert!(matches!(
            sample_topology(&cfg, 0),
            Err(Error::PlacementInfeasible { .. })
        ));
    }

    #[test]
    fn rho_one_freezes_coefficients() {
        let s0 = init_fading(3, 1.0, 5);
        let s1 = fading_step(s0.clone());
        assert_eq!(s0.coeffs, s1.coeffs);
    }

    #[test]
    fn rho_zero_ignores_previous_state() {
        let a = init_fading(2, 0.0, 9);
        let mut b = a.clone();
        b.coeffs.fill(Complex64::new(100.0, -3.0));
        assert_eq!(fading_step(a).coeffs, fading_step(b).coeffs);
    }

    #[test]
    fn channel_at_arithmetic() {
        let large = LinkGainMatrix {
            gains_linear: DMatrix::from_element(2, 2, 4.0),
            tx_positions: vec![[0.0; 2]; 2],
            rx_positions: vec![[0.0; 2]; 2],
        };
        let mut f = init_fading(2, 0.5, 0);
        f.coeffs.fill(Complex64::new(0.5, 0.0));
        let h = channel_at(&large, &f).unwrap();
        assert!(h.h.iter().all(|&c| c == Complex64::new(1.0, 0.0)));

        let ones = LinkGainMatrix {
            gains_linear: DMatrix::from_element(3, 3, 1.0),
            ..large.clone()
        };
        let mut f1 = init_fading(3, 0.5, 0);
        f1.coeffs.fill(Complex64::new(1.0, 0.0));
        assert!(channel_at(&ones, &f1)
            .unwrap()
            .h
            .iter()
            .all(|&c| c == Complex64::new(1.0, 0.0)));

        assert!(matches!(
            channel_at(&large, &init_fading(3, 0.5, 0)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn jakes_default() {
        let rho = jakes_correlation(1.0, 2e9, 0.01);
        assert!((rho - DEFAULT_RHO).abs() < 1e-3, "{rho}");
    }

    #[test]
    fn episode_is_replayable() {
        let topo = TopologyConfig::with_m(4, DensityMode::Fixed);
        let r = Realization::generate(&topo, DEFAULT_RHO, 2).unwrap();
        assert_eq!(r.episode(7), r.episode(7));
        assert_eq!(r.episode(7)[..3], r.episode(3)[..]);
    }
}

//! Goldenshluger-Lepski bandwidth selection.
//!
//! For a grid `H` the bias proxy of `h` is
//!
//! ```text
//! A_eta(h) = max_{t in H} ( ||f~_{h,t} - f~_t||_{2,T} - c(eta) sqrt(N) / (n t^{3/2}) )_+
//! ```
//!
//! and the selected bandwidth minimizes `A_eta(h) + c(eta) sqrt(N) / (n h^{3/2})`
//! (fixed tuning), or `min_eta { A_eta(h) + gamma c(eta) sqrt(N) / (n h^{3/2}) }`
//! (adaptive tuning). The distances `||f~_{h,t} - f~_t||` do not depend on
//! `eta`, so a [`SelectionWorkspace`] computes them once and every tuning
//! reuses them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_tilde, truth_curve, DoubleKernelTable, EstimateCurve, ShiftedCentres, UniformGrid};
use crate::intensity::IntensityModel;
use crate::kernels::KernelSpec;
use crate::metrics::{l2_distance_values, l2_sq_values};
use crate::simulate::{replicate_rng, simulate_observation_with, ObservationSet};

pub const DEFAULT_GRID_POINTS: usize = 30;
pub const DEFAULT_ETA: f64 = -0.6;
pub const DEFAULT_GAMMA: f64 = 0.01;

/// `num` equally spaced values of eta in `[-0.95, 0.95]`.
pub fn eta_grid(num: usize) -> Vec<f64> {
    match num {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..num).map(|i| -0.95 + 1.9 * i as f64 / (num - 1) as f64).collect(),
    }
}

/// The 21-point default eta grid of the adaptive tuning.
pub fn default_eta_grid() -> Vec<f64> {
    eta_grid(21)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum GridRule {
    /// Geometric from `(aT/n)^{1/3}` to `a/A`.
    Simulation {
        min: f64,
    },
    /// `{1/D : ceil(log n) <= D <= floor(delta n^{1/3})}`.
    Theory {
        delta: f64,
    },
    Explicit,
}

/// A strictly increasing set of bandwidths, all satisfying `h A <= a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGrid {
    bandwidths: Vec<f64>,
    rule: GridRule,
}

impl BandwidthGrid {
    pub fn from_values(mut bandwidths: Vec<f64>, a: f64, kernel: &KernelSpec) -> Result<Self> {
        bandwidths.sort_by(f64::total_cmp);
        Self::validated(bandwidths, GridRule::Explicit, a, kernel)
    }

    fn validated(bandwidths: Vec<f64>, rule: GridRule, a: f64, kernel: &KernelSpec) -> Result<Self> {
        if bandwidths.is_empty() {
            return Err(Error::param("grid", "bandwidth grid is empty"));
        }
        for w in bandwidths.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::param("grid", "bandwidths must be strictly increasing"));
            }
        }
        for &h in &bandwidths {
            crate::estimator::check_bandwidth(h, a, kernel)?;
        }
        Ok(BandwidthGrid { bandwidths, rule })
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn rule(&self) -> &GridRule {
        &self.rule
    }

    pub fn len(&self) -> usize {
        self.bandwidths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bandwidths.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.bandwidths.last().unwrap()
    }

    pub fn min(&self) -> f64 {
        self.bandwidths[0]
    }

    pub fn index_of(&self, h: f64) -> Option<usize> {
        self.bandwidths.iter().position(|&b| b == h)
    }
}

/// Geometric grid of `num_points` bandwidths from `(aT/n)^{1/3}` up to `a/A`.
/// Collapses to `{a/A}` when the lower end is not below the upper one.
pub fn default_grid(n: u64, a: f64, t_end: f64, kernel: &KernelSpec, num_points: usize) -> Result<BandwidthGrid> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if num_points == 0 {
        return Err(Error::param("grid-points", "must be at least 1"));
    }
    if !(a > 0.0 && t_end > 0.0) {
        return Err(Error::param("a", "a and T must be positive"));
    }
    let lo = (a * t_end / n as f64).cbrt();
    let hi = a / kernel.support_radius();
    let bandwidths = if lo >= hi || num_points == 1 {
        vec![hi]
    } else {
        let ratio = (hi / lo).ln();
        (0..num_points)
            .map(|i| match i {
                0 => lo,
                i if i + 1 == num_points => hi,
                i => lo * (ratio * i as f64 / (num_points - 1) as f64).exp(),
            })
            .collect()
    };
    BandwidthGrid::validated(bandwidths, GridRule::Simulation { min: lo }, a, kernel)
}

/// `{1/D : D integer in [ceil(ln n), floor(delta n^{1/3})]}` restricted to `h A <= a`.
pub fn theory_grid(n: u64, delta: f64, a: f64, kernel: &KernelSpec) -> Result<BandwidthGrid> {
    if n < 2 || !(delta > 0.0) {
        return Err(Error::param("delta", "need n >= 2 and delta > 0"));
    }
    let lo = (n as f64).ln().ceil() as i64;
    // Guard against cbrt rounding just below an integer.
    let hi = (delta * (n as f64).cbrt() + 1e-9).floor() as i64;
    if hi < lo.max(1) {
        return Err(Error::EmptyBandwidthRange { lo, hi });
    }
    let bandwidths: Vec<f64> = (lo.max(1)..=hi)
        .rev()
        .map(|d| 1.0 / d as f64)
        .filter(|&h| h * kernel.support_radius() <= a)
        .collect();
    if bandwidths.is_empty() {
        return Err(Error::param(
            "grid",
            format!("no bandwidth 1/D with D in [{lo}, {hi}] satisfies h <= a/A"),
        ));
    }
    BandwidthGrid::validated(bandwidths, GridRule::Theory { delta }, a, kernel)
}

/// `c(eta) = (1 + eta)(1 + ||K||_1) ||K'||_2 sqrt(aT/2)`.
pub fn penalty_constant(eta: f64, kernel: &KernelSpec, a: f64, t_end: f64) -> Result<f64> {
    if !(eta > -1.0) || !eta.is_finite() {
        return Err(Error::param("eta", format!("must exceed -1, got {eta}")));
    }
    let norms = kernel.norms();
    Ok((1.0 + eta) * (1.0 + norms.l1) * norms.deriv_l2 * (a * t_end / 2.0).sqrt())
}

/// `G` tables for every unordered pair of a grid. They depend only on the
/// kernel and the bandwidths, so one set serves every replicate.
#[derive(Debug, Clone)]
pub struct PairTables {
    bandwidths: Vec<f64>,
    tables: Vec<DoubleKernelTable>,
}

impl PairTables {
    pub fn new(kernel: &KernelSpec, grid: &BandwidthGrid) -> Self {
        let hs = grid.bandwidths().to_vec();
        let pairs: Vec<(usize, usize)> = (0..hs.len()).flat_map(|i| (i..hs.len()).map(move |j| (i, j))).collect();
        let tables = pairs
            .par_iter()
            .map(|&(i, j)| DoubleKernelTable::new(kernel, hs[i], hs[j]))
            .collect();
        PairTables { bandwidths: hs, tables }
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let n = self.bandwidths.len();
        i * (2 * n - i + 1) / 2 + (j - i)
    }

    fn get(&self, i: usize, j: usize) -> &DoubleKernelTable {
        &self.tables[self.pair_index(i, j)]
    }
}

/// Single-smoothed estimates on the whole grid and the matrix
/// `dist[i][j] = ||f~_{h_i, h_j} - f~_{h_j}||_{2,T}`.
#[derive(Debug, Clone)]
pub struct SelectionWorkspace {
    bandwidths: Vec<f64>,
    count: usize,
    scaling_n: u64,
    noise_half_width: f64,
    window_end: f64,
    curves: Vec<EstimateCurve>,
    dist: Vec<Vec<f64>>,
}

impl SelectionWorkspace {
    pub fn build(obs: &ObservationSet, kernel: &KernelSpec, grid: &BandwidthGrid, m: usize) -> Result<Self> {
        let tables = PairTables::new(kernel, grid);
        Self::build_with_tables(obs, kernel, grid, &tables, m)
    }

    pub fn build_with_tables(
        obs: &ObservationSet,
        kernel: &KernelSpec,
        grid: &BandwidthGrid,
        tables: &PairTables,
        m: usize,
    ) -> Result<Self> {
        if tables.bandwidths != grid.bandwidths() {
            return Err(Error::param("grid", "pair tables were built for another grid"));
        }
        let hs = grid.bandwidths();
        let curves: Vec<EstimateCurve> = hs
            .iter()
            .map(|&h| estimate_tilde(obs, kernel, h, m))
            .collect::<Result<_>>()?;
        let ugrid = UniformGrid::new(obs.window_end(), m)?;
        let reach = 2.0 * kernel.support_radius() * grid.max();
        let centres = ShiftedCentres::new(obs, reach);
        let scale = obs.noise_half_width() / obs.scaling_n() as f64;
        let dx = ugrid.spacing();
        let k = hs.len();
        let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i..k).map(move |j| (i, j))).collect();
        let entries: Vec<(usize, usize, f64, f64)> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let mut ds = centres.convolve(tables.get(i, j), &ugrid);
                ds.iter_mut().for_each(|v| *v *= scale);
                let d_ij = l2_distance_values(&ds, curves[j].values(), dx);
                let d_ji = l2_distance_values(&ds, curves[i].values(), dx);
                (i, j, d_ij, d_ji)
            })
            .collect();
        let mut dist = vec![vec![0.0; k]; k];
        for (i, j, d_ij, d_ji) in entries {
            dist[i][j] = d_ij;
            dist[j][i] = d_ji;
        }
        Ok(SelectionWorkspace {
            bandwidths: hs.to_vec(),
            count: obs.count(),
            scaling_n: obs.scaling_n(),
            noise_half_width: obs.noise_half_width(),
            window_end: obs.window_end(),
            curves,
            dist,
        })
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    /// `f~_h` for every grid bandwidth, in grid order.
    pub fn curves(&self) -> &[EstimateCurve] {
        &self.curves
    }

    pub fn into_curves(self) -> Vec<EstimateCurve> {
        self.curves
    }

    /// `||f~_{h_i, h_j} - f~_{h_j}||_{2,T}`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    /// `sqrt(N) / (n h^{3/2})`; multiplied by `c` this is the penalty.
    pub fn penalty_unit(&self, h: f64) -> f64 {
        (self.count as f64).sqrt() / (self.scaling_n as f64 * h.powf(1.5))
    }

    /// `A(h_i)` for penalty constant `c`.
    pub fn criterion_a(&self, i: usize, c: f64) -> f64 {
        self.bandwidths
            .iter()
            .enumerate()
            .map(|(j, &t)| (self.dist[i][j] - c * self.penalty_unit(t)).max(0.0))
            .fold(0.0, f64::max)
    }

    fn penalty(&self, kernel: &KernelSpec, eta: f64) -> Result<f64> {
        penalty_constant(eta, kernel, self.noise_half_width, self.window_end)
    }

    /// Fixed-eta rule: `argmin_h A_eta(h) + c(eta) sqrt(N)/(n h^{3/2})`.
    pub fn select_fixed_eta(&self, kernel: &KernelSpec, eta: f64) -> Result<SelectionResult> {
        let c = self.penalty(kernel, eta)?;
        let criterion: Vec<CriterionRecord> = self
            .bandwidths
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let bias = self.criterion_a(i, c);
                let penalty = c * self.penalty_unit(h);
                CriterionRecord {
                    h,
                    bias_proxy: bias,
                    penalty,
                    total: bias + penalty,
                    eta,
                }
            })
            .collect();
        Ok(self.finish(criterion, EtaUsed::Fixed(eta), None))
    }

    /// Adaptive rule: `argmin_h min_eta { A_eta(h) + gamma c(eta) sqrt(N)/(n h^{3/2}) }`.
    pub fn select_adaptive_gamma(&self, kernel: &KernelSpec, etas: &[f64], gamma: f64) -> Result<SelectionResult> {
        if etas.is_empty() {
            return Err(Error::param("eta-grid", "must not be empty"));
        }
        if !(gamma >= 0.0) {
            return Err(Error::param("gamma", format!("must be nonnegative, got {gamma}")));
        }
        let constants: Vec<f64> = etas.iter().map(|&e| self.penalty(kernel, e)).collect::<Result<_>>()?;
        let criterion: Vec<CriterionRecord> = self
            .bandwidths
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let unit = self.penalty_unit(h);
                let mut best: Option<CriterionRecord> = None;
                for (&eta, &c) in etas.iter().zip(&constants) {
                    let bias = self.criterion_a(i, c);
                    let penalty = gamma * c * unit;
                    let total = bias + penalty;
                    if best.as_ref().is_none_or(|b| total < b.total) {
                        best = Some(CriterionRecord {
                            h,
                            bias_proxy: bias,
                            penalty,
                            total,
                            eta,
                        });
                    }
                }
                best.unwrap()
            })
            .collect();
        let per_h = criterion.iter().map(|r| r.eta).collect();
        Ok(self.finish(criterion, EtaUsed::PerBandwidth(per_h), Some(gamma)))
    }

    fn finish(&self, criterion: Vec<CriterionRecord>, eta_used: EtaUsed, gamma: Option<f64>) -> SelectionResult {
        let degenerate = self.count == 0;
        let chosen_index = if degenerate {
            criterion.len() - 1
        } else {
            argmin_first(criterion.iter().map(|r| r.total))
        };
        SelectionResult {
            chosen_h: criterion[chosen_index].h,
            chosen_index,
            criterion,
            eta_used,
            gamma_used: gamma,
            degenerate,
        }
    }
}

/// Index of the first minimum; NaN never wins.
pub(crate) fn argmin_first(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0usize, f64::INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRecord {
    pub h: f64,
    /// `A(h)`.
    pub bias_proxy: f64,
    pub penalty: f64,
    pub total: f64,
    /// The eta behind this row (the minimizing one in adaptive mode).
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaUsed {
    Fixed(f64),
    PerBandwidth(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen_h: f64,
    pub chosen_index: usize,
    pub criterion: Vec<CriterionRecord>,
    pub eta_used: EtaUsed,
    pub gamma_used: Option<f64>,
    /// No observations: every estimate is zero and the largest bandwidth is returned.
    pub degenerate: bool,
}

/// `A(h)` for a single bandwidth of the grid.
pub fn criterion_a(
    obs: &ObservationSet,
    kernel: &KernelSpec,
    grid: &BandwidthGrid,
    h: f64,
    c: f64,
    m: usize,
) -> Result<f64> {
    let i = grid
        .index_of(h)
        .ok_or_else(|| Error::param("h", format!("{h} is not in the bandwidth grid")))?;
    Ok(SelectionWorkspace::build(obs, kernel, grid, m)?.criterion_a(i, c))
}

pub fn select_fixed_eta(
    obs: &ObservationSet,
    kernel: &KernelSpec,
    grid: &BandwidthGrid,
    eta: f64,
    m: usize,
) -> Result<SelectionResult> {
    SelectionWorkspace::build(obs, kernel, grid, m)?.select_fixed_eta(kernel, eta)
}

pub fn select_adaptive_gamma(
    obs: &ObservationSet,
    kernel: &KernelSpec,
    grid: &BandwidthGrid,
    etas: &[f64],
    gamma: f64,
    m: usize,
) -> Result<SelectionResult> {
    SelectionWorkspace::build(obs, kernel, grid, m)?.select_adaptive_gamma(kernel, etas, gamma)
}

/// The risk-minimizing fixed bandwidth over simulated replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub h_star: f64,
    pub index: usize,
    /// Mean over replicates of `||f~_h - f_X||^2_{2,T}`, per grid bandwidth.
    pub risks: Vec<f64>,
    /// `per_replicate[r][i]`: squared error of replicate `r` at bandwidth `i`.
    pub per_replicate: Vec<Vec<f64>>,
}

/// Squared errors `||f~_h - f_X||^2_{2,T}` for every bandwidth of `grid`.
pub fn squared_errors(
    obs: &ObservationSet,
    kernel: &KernelSpec,
    grid: &BandwidthGrid,
    truth: &EstimateCurve,
) -> Result<Vec<f64>> {
    let m = truth.grid().len();
    grid.bandwidths()
        .iter()
        .map(|&h| {
            let c = estimate_tilde(obs, kernel, h, m)?;
            Ok(l2_sq_values(c.values(), truth.values(), truth.grid().spacing()))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn oracle_bandwidth(
    model: &IntensityModel,
    n: u64,
    a: f64,
    kernel: &KernelSpec,
    grid: &BandwidthGrid,
    replicates: usize,
    seed: u64,
    m: usize,
) -> Result<OracleResult> {
    if replicates == 0 {
        return Err(Error::param("R", "need at least one replicate"));
    }
    let truth = truth_curve(model, m)?;
    let per_replicate: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let obs = simulate_observation_with(model, n, a, &mut rng)?;
            squared_errors(&obs, kernel, grid, &truth)
        })
        .collect::<Result<_>>()?;
    let risks = column_means(&per_replicate);
    let index = argmin_first(risks.iter().copied());
    Ok(OracleResult {
        h_star: grid.bandwidths()[index],
        index,
        risks,
        per_replicate,
    })
}

pub(crate) fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let k = rows.first().map_or(0, Vec::len);
    (0..k)
        .map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len() as f64)
        .collect()
}

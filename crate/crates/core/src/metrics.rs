//! L2 risks on `[0, T]` and the Monte Carlo experiment driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::{check_bandwidth, default_grid_size, estimate_tilde, smooth_truth, truth_curve, EstimateCurve};
use crate::intensity::{IntensityModel, Scenario};
use crate::kernels::KernelSpec;
use crate::quad::trapezoid_uniform;
use crate::selection::{
    argmin_first, column_means, default_eta_grid, default_grid, oracle_bandwidth, squared_errors, BandwidthGrid,
    PairTables, SelectionWorkspace, DEFAULT_ETA, DEFAULT_GAMMA, DEFAULT_GRID_POINTS,
};
use crate::simulate::{replicate_rng, simulate_observation_with, ObservationSet};

/// `||f||_{2,T}` by the trapezoid rule on the curve's grid.
pub fn l2_norm_t(curve: &EstimateCurve) -> f64 {
    let sq: Vec<f64> = curve.values().iter().map(|v| v * v).collect();
    trapezoid_uniform(&sq, curve.grid().spacing()).sqrt()
}

pub fn l2_distance(a: &EstimateCurve, b: &EstimateCurve) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(l2_distance_values(a.values(), b.values(), a.grid().spacing()))
}

/// Squared trapezoid L2 distance between two equally long samples.
pub fn l2_sq_values(a: &[f64], b: &[f64], dx: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    trapezoid_uniform(&sq, dx)
}

pub fn l2_distance_values(a: &[f64], b: &[f64], dx: f64) -> f64 {
    l2_sq_values(a, b, dx).sqrt()
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Index of the element at the lower middle rank.
fn median_index(values: &[f64]) -> usize {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    idx[(values.len() - 1) / 2]
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `v_h = a T ||f_X||_1 ||K'||_2^2 / (2 n h^3)`, the integrated variance of `f~_h`.
pub fn integrated_variance(model: &IntensityModel, kernel: &KernelSpec, n: u64, a: f64, h: f64) -> f64 {
    let d2 = kernel.norms().deriv_l2.powi(2);
    a * model.window_end() * model.total_mass() * d2 / (2.0 * n as f64 * h.powi(3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Method {
    FixedEta { eta: f64 },
    AdaptiveGamma { gamma: f64 },
    Oracle,
}

impl Method {
    pub fn fixed_default() -> Self {
        Method::FixedEta { eta: DEFAULT_ETA }
    }

    pub fn adaptive_default() -> Self {
        Method::AdaptiveGamma { gamma: DEFAULT_GAMMA }
    }

    pub fn label(&self) -> String {
        match self {
            Method::FixedEta { eta } => format!("fixed-eta({eta})"),
            Method::AdaptiveGamma { gamma } => format!("adaptive-gamma({gamma})"),
            Method::Oracle => "oracle".to_string(),
        }
    }
}

/// One `(f_X, n, a)` cell of an experiment.
#[derive(Debug, Clone)]
pub struct BenchmarkScenario {
    pub model: IntensityModel,
    pub n: u64,
    pub a: f64,
}

impl BenchmarkScenario {
    pub fn new(scenario: Scenario, n: u64, a: f64) -> Self {
        BenchmarkScenario {
            model: scenario.model(),
            n,
            a,
        }
    }

    /// Data seed for this cell. It depends on the cell's contents, so the
    /// same cell sees the same replicates whatever suite it runs in.
    pub fn data_seed(&self, seed: u64) -> u64 {
        let mut h = Sha256::new();
        h.update(self.model.label().as_bytes());
        h.update(self.n.to_le_bytes());
        h.update(self.a.to_bits().to_le_bytes());
        let d = h.finalize();
        seed ^ u64::from_le_bytes(d[..8].try_into().unwrap())
    }

    pub fn replicate(&self, seed: u64, index: usize) -> Result<ObservationSet> {
        let mut rng = replicate_rng(self.data_seed(seed), index as u64);
        simulate_observation_with(&self.model, self.n, self.a, &mut rng)
    }
}

/// The simulation grid of the experiments: Beta scenarios with
/// `a in {0.05, 0.1}`, Laplace with `a in {0.5, 1, 2, 3}`, `n in {500, 1000}`.
pub fn simulation_suite() -> Vec<BenchmarkScenario> {
    let mut out = Vec::new();
    for s in Scenario::ALL {
        let widths: &[f64] = match s {
            Scenario::Laplace => &[0.5, 1.0, 2.0, 3.0],
            Scenario::Beta(_) => &[0.05, 0.1],
        };
        for &a in widths {
            for n in [500, 1000] {
                out.push(BenchmarkScenario::new(s, n, a));
            }
        }
    }
    out
}

pub const SUITE_REPLICATES: usize = 30;

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub kernel: KernelSpec,
    pub grid_points: usize,
    /// Evaluation grid size; `None` picks [`default_grid_size`].
    pub grid_size: Option<usize>,
    /// Eta grid searched by adaptive tuning.
    pub eta_grid: Vec<f64>,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            kernel: KernelSpec::epanechnikov(),
            grid_points: DEFAULT_GRID_POINTS,
            grid_size: None,
            eta_grid: default_eta_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub label: String,
    pub n: u64,
    pub a: f64,
    pub window_end: f64,
    pub kernel: String,
    pub bandwidths: Vec<f64>,
    pub grid_digest: String,
    pub grid_size: usize,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub scenario: ScenarioRecord,
    pub method: Method,
    /// `||f~_{h_hat} - f_X||^2_{2,T}` per replicate.
    pub per_replicate_mse: Vec<f64>,
    pub median_mse: f64,
    pub mean_mse: f64,
    /// Smallest mean risk over the fixed bandwidths of the grid.
    pub oracle_mse: f64,
    /// Median over replicates of the risk at the oracle bandwidth.
    pub oracle_median_mse: f64,
    pub oracle_h: f64,
    pub selected_bandwidths: Vec<f64>,
    /// Replicate achieving the (lower) median risk.
    pub median_replicate: usize,
}

/// Every method's report for one scenario, plus the per-bandwidth risk table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: ScenarioRecord,
    /// Mean risk of each fixed grid bandwidth.
    pub risk_by_bandwidth: Vec<f64>,
    pub reports: Vec<RiskReport>,
}

impl ScenarioResult {
    pub fn report(&self, method: &Method) -> Option<&RiskReport> {
        self.reports.iter().find(|r| &r.method == method)
    }
}

fn grid_digest(grid: &BandwidthGrid) -> String {
    let mut h = Sha256::new();
    for b in grid.bandwidths() {
        h.update(b.to_bits().to_le_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

struct ReplicateOutcome {
    mse_by_h: Vec<f64>,
    /// Selected grid index per selection method (`None` for the oracle).
    choices: Vec<Option<usize>>,
}

/// Runs every method on `replicates` shared simulated data sets per scenario.
pub fn run_benchmark(
    scenarios: &[BenchmarkScenario],
    methods: &[Method],
    replicates: usize,
    seed: u64,
    options: &BenchmarkOptions,
) -> Result<Vec<ScenarioResult>> {
    if replicates == 0 {
        return Err(Error::param("R", "need at least one replicate"));
    }
    if methods.is_empty() {
        return Err(Error::param("methods", "need at least one method"));
    }
    scenarios
        .iter()
        .map(|s| run_scenario(s, methods, replicates, seed, options))
        .collect()
}

fn run_scenario(
    s: &BenchmarkScenario,
    methods: &[Method],
    replicates: usize,
    seed: u64,
    options: &BenchmarkOptions,
) -> Result<ScenarioResult> {
    let kernel = &options.kernel;
    let t_end = s.model.window_end();
    let m = options.grid_size.unwrap_or_else(|| default_grid_size(t_end));
    let grid = default_grid(s.n, s.a, t_end, kernel, options.grid_points)?;
    let truth = truth_curve(&s.model, m)?;
    let needs_selection = methods.iter().any(|m| !matches!(m, Method::Oracle));
    let tables = needs_selection.then(|| PairTables::new(kernel, &grid));

    let outcomes: Vec<ReplicateOutcome> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let obs = s.replicate(seed, r)?;
            let (mse_by_h, ws) = match &tables {
                Some(tables) => {
                    let ws = SelectionWorkspace::build_with_tables(&obs, kernel, &grid, tables, m)?;
                    let mse = ws
                        .curves()
                        .iter()
                        .map(|c| l2_sq_values(c.values(), truth.values(), truth.grid().spacing()))
                        .collect();
                    (mse, Some(ws))
                }
                None => (squared_errors(&obs, kernel, &grid, &truth)?, None),
            };
            let choices = methods
                .iter()
                .map(|method| {
                    Ok(match (method, &ws) {
                        (Method::FixedEta { eta }, Some(ws)) => Some(ws.select_fixed_eta(kernel, *eta)?.chosen_index),
                        (Method::AdaptiveGamma { gamma }, Some(ws)) => Some(
                            ws.select_adaptive_gamma(kernel, &options.eta_grid, *gamma)?
                                .chosen_index,
                        ),
                        _ => None,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(ReplicateOutcome { mse_by_h, choices })
        })
        .collect::<Result<_>>()
        .map_err(|e: Error| match e {
            Error::InvalidParameter { name, reason } => Error::InvalidParameter {
                name,
                reason: format!("{reason} (scenario {} n={} a={})", s.model.label(), s.n, s.a),
            },
            other => other,
        })?;

    let table: Vec<Vec<f64>> = outcomes.iter().map(|o| o.mse_by_h.clone()).collect();
    let risk_by_bandwidth = column_means(&table);
    let star = argmin_first(risk_by_bandwidth.iter().copied());
    let oracle_mse = risk_by_bandwidth[star];
    let oracle_per_rep: Vec<f64> = table.iter().map(|row| row[star]).collect();
    let oracle_median_mse = median(&oracle_per_rep);
    let hs = grid.bandwidths();

    let record = ScenarioRecord {
        label: s.model.label().to_string(),
        n: s.n,
        a: s.a,
        window_end: t_end,
        kernel: kernel.name().to_string(),
        bandwidths: hs.to_vec(),
        grid_digest: grid_digest(&grid),
        grid_size: m,
        replicates,
        seed,
    };

    let reports = methods
        .iter()
        .enumerate()
        .map(|(k, method)| {
            let chosen: Vec<usize> = outcomes.iter().map(|o| o.choices[k].unwrap_or(star)).collect();
            let per_replicate_mse: Vec<f64> = chosen.iter().zip(&table).map(|(&i, row)| row[i]).collect();
            RiskReport {
                scenario: record.clone(),
                method: *method,
                median_mse: median(&per_replicate_mse),
                mean_mse: mean(&per_replicate_mse),
                median_replicate: median_index(&per_replicate_mse),
                per_replicate_mse,
                oracle_mse,
                oracle_median_mse,
                oracle_h: hs[star],
                selected_bandwidths: chosen.iter().map(|&i| hs[i]).collect(),
            }
        })
        .collect();

    Ok(ScenarioResult {
        scenario: record,
        risk_by_bandwidth,
        reports,
    })
}

/// Re-runs one replicate of a finished scenario and returns the estimate it
/// selected, for curve dumps.
pub fn replicate_curve(
    s: &BenchmarkScenario,
    report: &RiskReport,
    replicate: usize,
    kernel: &KernelSpec,
) -> Result<EstimateCurve> {
    let obs = s.replicate(report.scenario.seed, replicate)?;
    let h = *report
        .selected_bandwidths
        .get(replicate)
        .ok_or_else(|| Error::param("replicate", format!("index {replicate} out of range")))?;
    estimate_tilde(&obs, kernel, h, report.scenario.grid_size)
}

/// Least-squares slope and intercept of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::param("n_list", "need at least two matching points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::param("n_list", "log-log fit needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = mean(&lx);
    let my = mean(&ly);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::param("n_list", "all n are equal"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSlopeReport {
    pub ns: Vec<u64>,
    pub oracle_risks: Vec<f64>,
    pub oracle_bandwidths: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// `per_replicate[k][r][i]`: risk of replicate `r` at bandwidth `i` for `ns[k]`.
    pub per_replicate: Vec<Vec<Vec<f64>>>,
}

impl RateSlopeReport {
    /// Percentile bootstrap interval for the slope, resampling replicates
    /// independently for each `n`.
    pub fn bootstrap_ci(&self, resamples: usize, seed: u64, level: f64) -> Result<(f64, f64)> {
        if resamples < 2 || !(level > 0.0 && level < 1.0) {
            return Err(Error::param("bootstrap", "need >= 2 resamples and level in (0, 1)"));
        }
        let xs: Vec<f64> = self.ns.iter().map(|&n| n as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut slopes = Vec::with_capacity(resamples);
        for _ in 0..resamples {
            let risks: Vec<f64> = self
                .per_replicate
                .iter()
                .map(|rows| {
                    let r = rows.len();
                    let pick: Vec<Vec<f64>> = (0..r).map(|_| rows[rng.random_range(0..r)].clone()).collect();
                    column_means(&pick).into_iter().fold(f64::INFINITY, f64::min)
                })
                .collect();
            slopes.push(log_log_slope(&xs, &risks)?.0);
        }
        slopes.sort_by(f64::total_cmp);
        let q = |p: f64| slopes[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
        let tail = (1.0 - level) / 2.0;
        Ok((q(tail), q(1.0 - tail)))
    }
}

/// Slope of the oracle risk against `n` on a log-log scale. For a density of
/// Sobolev smoothness `beta` the theory predicts `-2 beta / (2 beta + 3)`.
#[allow(clippy::too_many_arguments)]
pub fn rate_slope_check(
    model: &IntensityModel,
    kernel: &KernelSpec,
    a: f64,
    ns: &[u64],
    replicates: usize,
    seed: u64,
    grid_points: usize,
    grid_size: Option<usize>,
) -> Result<RateSlopeReport> {
    if ns.len() < 2 {
        return Err(Error::param("n_list", "need at least two sample sizes"));
    }
    let t_end = model.window_end();
    let m = grid_size.unwrap_or_else(|| default_grid_size(t_end));
    let mut oracle_risks = Vec::new();
    let mut oracle_bandwidths = Vec::new();
    let mut per_replicate = Vec::new();
    for &n in ns {
        let grid = default_grid(n, a, t_end, kernel, grid_points)?;
        let o = oracle_bandwidth(model, n, a, kernel, &grid, replicates, seed ^ n, m)?;
        oracle_risks.push(o.risks[o.index]);
        oracle_bandwidths.push(o.h_star);
        per_replicate.push(o.per_replicate);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (slope, intercept) = log_log_slope(&xs, &oracle_risks)?;
    Ok(RateSlopeReport {
        ns: ns.to_vec(),
        oracle_risks,
        oracle_bandwidths,
        slope,
        intercept,
        per_replicate,
    })
}

/// Running mean and sum of squared deviations (Welford), mergeable.
#[derive(Debug, Clone)]
struct Moments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, xs: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(xs) {
            let d = x - *m;
            *m += d / k;
            *s += d * (x - *m);
        }
    }

    fn merge(mut self, other: &Moments) -> Moments {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other.clone();
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.count += other.count;
        self
    }
}

/// Pointwise Monte Carlo mean and unbiased variance of `f~_h`.
#[derive(Debug, Clone)]
pub struct PointwiseMoments {
    pub grid_points: Vec<f64>,
    pub spacing: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub replicates: usize,
}

const MOMENT_CHUNK: usize = 64;

/// Replicates are accumulated in fixed chunks, so the result does not depend
/// on the number of threads.
#[allow(clippy::too_many_arguments)]
pub fn replicate_moments(
    model: &IntensityModel,
    kernel: &KernelSpec,
    n: u64,
    a: f64,
    h: f64,
    replicates: usize,
    seed: u64,
    m: usize,
) -> Result<PointwiseMoments> {
    if replicates < 2 {
        return Err(Error::param("R", "variance needs at least two replicates"));
    }
    check_bandwidth(h, a, kernel)?;
    let chunks: Vec<Moments> = (0..replicates.div_ceil(MOMENT_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(m);
            for r in c * MOMENT_CHUNK..((c + 1) * MOMENT_CHUNK).min(replicates) {
                let mut rng = replicate_rng(seed, r as u64);
                let obs = simulate_observation_with(model, n, a, &mut rng)?;
                acc.push(estimate_tilde(&obs, kernel, h, m)?.values());
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let total = chunks.iter().fold(Moments::new(m), |acc, c| acc.merge(c));
    let grid = crate::estimator::UniformGrid::new(model.window_end(), m)?;
    Ok(PointwiseMoments {
        grid_points: grid.points(),
        spacing: grid.spacing(),
        variance: total.m2.iter().map(|s| s / (replicates - 1) as f64).collect(),
        mean: total.mean,
        replicates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub empirical: f64,
    pub theoretical: f64,
    pub ratio: f64,
}

/// Integrated empirical variance of `f~_h` against `v_h`.
#[allow(clippy::too_many_arguments)]
pub fn variance_check(
    model: &IntensityModel,
    kernel: &KernelSpec,
    n: u64,
    a: f64,
    h: f64,
    replicates: usize,
    seed: u64,
    m: usize,
) -> Result<VarianceCheck> {
    let mom = replicate_moments(model, kernel, n, a, h, replicates, seed, m)?;
    let empirical = trapezoid_uniform(&mom.variance, mom.spacing);
    let theoretical = integrated_variance(model, kernel, n, a, h);
    Ok(VarianceCheck {
        empirical,
        theoretical,
        ratio: empirical / theoretical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceRow {
    pub h: f64,
    pub empirical_mse: f64,
    /// Monte Carlo standard error of `empirical_mse`.
    pub standard_error: f64,
    /// `||K_h * f_X - f_X||^2_{2,T}`.
    pub bias_sq: f64,
    pub variance: f64,
    pub predicted: f64,
}

impl BiasVarianceRow {
    /// `(empirical - predicted) / standard_error`.
    pub fn z_score(&self) -> f64 {
        (self.empirical_mse - self.predicted) / self.standard_error
    }
}

/// Empirical fixed-`h` risk against `B_h^2 + v_h` for each bandwidth.
#[allow(clippy::too_many_arguments)]
pub fn bias_variance_check(
    model: &IntensityModel,
    kernel: &KernelSpec,
    n: u64,
    a: f64,
    hs: &[f64],
    replicates: usize,
    seed: u64,
    m: usize,
) -> Result<Vec<BiasVarianceRow>> {
    if replicates < 2 {
        return Err(Error::param("R", "standard errors need at least two replicates"));
    }
    let grid = BandwidthGrid::from_values(hs.to_vec(), a, kernel)?;
    let truth = truth_curve(model, m)?;
    let dx = truth.grid().spacing();
    let table: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let obs = simulate_observation_with(model, n, a, &mut rng)?;
            squared_errors(&obs, kernel, &grid, &truth)
        })
        .collect::<Result<_>>()?;
    grid.bandwidths()
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let col: Vec<f64> = table.iter().map(|row| row[i]).collect();
            let mu = mean(&col);
            let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (col.len() - 1) as f64;
            let smooth = smooth_truth(model, kernel, h, m)?;
            let bias_sq = l2_sq_values(smooth.values(), truth.values(), dx);
            let variance = integrated_variance(model, kernel, n, a, h);
            Ok(BiasVarianceRow {
                h,
                empirical_mse: mu,
                standard_error: (var / col.len() as f64).sqrt(),
                bias_sq,
                variance,
                predicted: bias_sq + variance,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::UniformGrid;
    use crate::intensity::{beta_scenario, BetaShape};

    fn curve(m: usize, f: impl Fn(f64) -> f64) -> EstimateCurve {
        EstimateCurve::tabulate(UniformGrid::new(1.0, m).unwrap(), f, "test")
    }

    #[test]
    fn norm_examples() {
        assert_eq!(l2_norm_t(&curve(100, |_| 0.0)), 0.0);
        for m in [64, 100, 513] {
            assert!((l2_norm_t(&curve(m, |_| 1.0)) - 1.0).abs() < 1e-14);
        }
        let s = l2_norm_t(&curve(512, |x| (2.0 * std::f64::consts::PI * x).sin()));
        assert!((s - 0.5f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn distance_requires_same_grid() {
        let a = curve(100, |x| x);
        let b = curve(101, |x| x);
        assert!(matches!(l2_distance(&a, &b), Err(Error::GridMismatch)));
        assert_eq!(l2_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn distance_matches_refined_grid() {
        let f = |x: f64| (3.0 * x).sin() + x * x;
        let g = |x: f64| (5.0 * x).cos();
        let m = 200;
        let coarse = l2_distance(&curve(m, f), &curve(m, g)).unwrap();
        let fine = l2_distance(&curve(4 * m, f), &curve(4 * m, g)).unwrap();
        assert!((coarse - fine).abs() <= 1e-3 * fine);
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median_index(&[4.0, 1.0, 3.0, 2.0]), 3);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn exact_power_slope() {
        let ns = [250.0, 500.0, 1000.0, 2000.0, 4000.0];
        let ys: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
        let (slope, intercept) = log_log_slope(&ns, &ys).unwrap();
        assert!((slope + 0.5).abs() < 1e-12);
        assert!((intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let mut all = Moments::new(2);
        rows.iter().for_each(|r| all.push(r));
        let mut a = Moments::new(2);
        let mut b = Moments::new(2);
        rows[..3].iter().for_each(|r| a.push(r));
        rows[3..].iter().for_each(|r| b.push(r));
        let merged = a.merge(&b);
        for i in 0..2 {
            assert!((merged.mean[i] - all.mean[i]).abs() < 1e-12);
            assert!((merged.m2[i] - all.m2[i]).abs() < 1e-9);
        }
        // Unbiased variance of 0..9 is 55/6.
        assert!((all.m2[0] / 9.0 - 55.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn variance_needs_two_replicates() {
        let model = beta_scenario(BetaShape::Unisym);
        let k = KernelSpec::epanechnikov();
        assert!(variance_check(&model, &k, 1000, 0.05, 0.05, 1, 0, 128).is_err());
    }

    #[test]
    fn closed_form_variance() {
        let model = beta_scenario(BetaShape::Unisym);
        let k = KernelSpec::epanechnikov();
        let v = integrated_variance(&model, &k, 1000, 0.05, 0.05);
        assert!((v - 0.3).abs() < 1e-12);
    }

    #[test]
    fn suite_has_twenty_cells() {
        let s = simulation_suite();
        assert_eq!(s.len(), 20);
        assert_eq!(s.iter().filter(|c| c.model.label() == "laplace").count(), 8);
    }

    #[test]
    fn small_benchmark_is_consistent() {
        let scen = [BenchmarkScenario::new(Scenario::Beta(BetaShape::Unisym), 500, 0.1)];
        let methods = [Method::fixed_default(), Method::adaptive_default(), Method::Oracle];
        let opts = BenchmarkOptions {
            grid_points: 8,
            grid_size: Some(128),
            ..Default::default()
        };
        let out = run_benchmark(&scen, &methods, 5, 11, &opts).unwrap();
        let res = &out[0];
        let min_risk = res.risk_by_bandwidth.iter().copied().fold(f64::INFINITY, f64::min);
        for r in &res.reports {
            assert_eq!(r.per_replicate_mse.len(), 5);
            assert!(r.per_replicate_mse.iter().all(|&v| v >= 0.0));
            assert_eq!(r.median_mse, median(&r.per_replicate_mse));
            assert_eq!(r.oracle_mse, min_risk);
        }
        let oracle = res.report(&Method::Oracle).unwrap();
        assert!((oracle.mean_mse - oracle.oracle_mse).abs() <= 1e-12 * oracle.oracle_mse);
        let again = run_benchmark(&scen, &methods, 5, 11, &opts).unwrap();
        assert_eq!(out, again);
    }
}

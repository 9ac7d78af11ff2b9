//! Kernel deconvolution estimators for uniform noise.
//!
//! With `Y = X + U[-a, a]`, the intensity is recovered from shifted copies of
//! the derivative kernel:
//!
//! ```text
//! f~_h(x) = a / (n h^2) * sum_k s_k sum_i K'((x - (2k+1)a - Y_i) / h),
//! s_k = +1 for k >= 0, -1 for k < 0.
//! ```
//!
//! `f^_h` keeps only `k >= 0` (with weight `2a`), `f^v_h` only `k < 0` (with
//! weight `-2a`), and `f~_h` is their average. Whenever `A h <= a` the
//! shifted windows are disjoint, so each pair `(x, Y_i)` meets at most one
//! `k` (two on a shared window endpoint), found in O(1).
//!
//! The doubly-smoothed `f~_{h,t} = K_h * f~_t` is evaluated exactly as a sum
//! of translates of `G = (K_h)' * K_t`, tabulated once per bandwidth pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intensity::IntensityModel;
use crate::kernels::KernelSpec;
use crate::quad;
use crate::simulate::ObservationSet;

/// Smallest evaluation grid accepted by the estimators.
pub const MIN_GRID_SIZE: usize = 64;

/// Default number of grid points for a window `[0, T]`.
pub fn default_grid_size(window_end: f64) -> usize {
    if window_end <= 1.0 {
        512
    } else {
        2048
    }
}

/// `m` equally spaced points `x_j = j T / (m - 1)` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    window_end: f64,
    size: usize,
}

impl UniformGrid {
    pub fn new(window_end: f64, size: usize) -> Result<Self> {
        if !(window_end.is_finite() && window_end > 0.0) {
            return Err(Error::param("T", format!("must be positive, got {window_end}")));
        }
        if size < 2 {
            return Err(Error::param("m", format!("grid needs at least 2 points, got {size}")));
        }
        Ok(UniformGrid { window_end, size })
    }

    pub fn window_end(&self) -> f64 {
        self.window_end
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.window_end / (self.size - 1) as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.size {
            self.window_end
        } else {
            j as f64 * self.window_end / (self.size - 1) as f64
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.size).map(|j| self.x(j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Variant {
    Hat,
    Check,
    Tilde,
    /// `K_h * f~_t`; the curve's bandwidth is `h`.
    DoubleSmoothed {
        inner: f64,
    },
    /// `K_h * f_X`, the expectation of `f~_h`.
    SmoothedTruth,
    /// Plain kernel smoothing of the observations, no deconvolution.
    Naive,
    /// Tabulated truth, or a curve read back from disk.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub variant: Variant,
    /// Digest of the source observations, or the model label.
    pub source: String,
}

/// A function sampled on a [`UniformGrid`]. Values are signed.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateCurve {
    grid: UniformGrid,
    values: Vec<f64>,
    bandwidth: f64,
    meta: CurveMeta,
}

impl EstimateCurve {
    pub fn new(grid: UniformGrid, values: Vec<f64>, bandwidth: f64, meta: CurveMeta) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(
                "values",
                format!("{} values for a grid of {} points", values.len(), grid.len()),
            ));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("values", format!("non-finite value at grid index {j}")));
        }
        Ok(EstimateCurve {
            grid,
            values,
            bandwidth,
            meta,
        })
    }

    /// Samples `f` on the grid.
    pub fn tabulate(grid: UniformGrid, f: impl Fn(f64) -> f64, source: impl Into<String>) -> Self {
        let values = (0..grid.len()).map(|j| f(grid.x(j))).collect();
        EstimateCurve {
            grid,
            values,
            bandwidth: 0.0,
            meta: CurveMeta {
                variant: Variant::Sampled,
                source: source.into(),
            },
        }
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn meta(&self) -> &CurveMeta {
        &self.meta
    }

    /// Presentation helper: negative values replaced by zero.
    pub fn clip_nonnegative(&self) -> EstimateCurve {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.max(0.0));
        out
    }
}

/// Rejects bandwidths outside `(0, a/A]`.
pub fn check_bandwidth(h: f64, a: f64, kernel: &KernelSpec) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", format!("bandwidth must be positive, got {h}")));
    }
    if h * kernel.support_radius() > a {
        return Err(Error::BandwidthTooLarge {
            h,
            a,
            support: kernel.support_radius(),
        });
    }
    Ok(())
}

fn check_grid_size(m: usize) -> Result<()> {
    if m < MIN_GRID_SIZE {
        return Err(Error::param(
            "m",
            format!("grid needs at least {MIN_GRID_SIZE} points, got {m}"),
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Both,
    NonNegative,
    Negative,
}

impl Side {
    #[inline]
    fn admits(self, k: i64) -> bool {
        match self {
            Side::Both => true,
            Side::NonNegative => k >= 0,
            Side::Negative => k < 0,
        }
    }
}

/// The signed kernel sum `sum_i sum_k s_k K'((x - (2k+1)a - Y_i)/h)` at one
/// point, restricted to the `k` admitted by `side`.
#[inline]
fn signed_sum_at(points: &[f64], kernel: &KernelSpec, a: f64, h: f64, x: f64, side: Side) -> f64 {
    let support = kernel.support_radius();
    let mut total = 0.0;
    for &y in points {
        let k0 = ((x - y - a) / (2.0 * a)).round() as i64;
        for k in k0 - 1..=k0 + 1 {
            if !side.admits(k) {
                continue;
            }
            let u = (x - (2 * k + 1) as f64 * a - y) / h;
            if u.abs() <= support {
                let s = if k >= 0 { 1.0 } else { -1.0 };
                total += s * kernel.deriv(u);
            }
        }
    }
    total
}

/// Same sums on every grid point at once. Walks each observation's shifted
/// windows and touches only the grid points inside them; per grid point the
/// terms arrive in the same order as in [`signed_sum_at`].
fn signed_sums_on_grid(
    points: &[f64],
    kernel: &KernelSpec,
    a: f64,
    h: f64,
    grid: &UniformGrid,
    side: Side,
) -> Vec<f64> {
    let support = kernel.support_radius();
    let reach = support * h;
    let dx = grid.spacing();
    let m = grid.len();
    let t_end = grid.window_end();
    let mut totals = vec![0.0; m];
    for &y in points {
        // Centres (2k+1)a + y that can reach [0, T].
        let k_lo = ((-reach - y - a) / (2.0 * a)).floor() as i64 - 1;
        let k_hi = ((t_end + reach - y - a) / (2.0 * a)).ceil() as i64 + 1;
        for k in k_lo..=k_hi {
            if !side.admits(k) {
                continue;
            }
            let centre = y + (2 * k + 1) as f64 * a;
            let j_lo = (((centre - reach) / dx).floor() as i64 - 1).max(0);
            let j_hi = (((centre + reach) / dx).ceil() as i64 + 1).min(m as i64 - 1);
            let s = if k >= 0 { 1.0 } else { -1.0 };
            for j in j_lo..=j_hi {
                let j = j as usize;
                let x = grid.x(j);
                let u = (x - (2 * k + 1) as f64 * a - y) / h;
                if u.abs() <= support {
                    totals[j] += s * kernel.deriv(u);
                }
            }
        }
    }
    totals
}

fn one_sided_or_tilde(
    obs: &ObservationSet,
    kernel: &KernelSpec,
    h: f64,
    m: usize,
    side: Side,
) -> Result<EstimateCurve> {
    let a = obs.noise_half_width();
    check_bandwidth(h, a, kernel)?;
    check_grid_size(m)?;
    let grid = UniformGrid::new(obs.window_end(), m)?;
    let n = obs.scaling_n() as f64;
    // The sign s_k is already inside the sums.
    let (scale, variant) = match side {
        Side::Both => (a / (n * h * h), Variant::Tilde),
        Side::NonNegative => (2.0 * a / (n * h * h), Variant::Hat),
        Side::Negative => (2.0 * a / (n * h * h), Variant::Check),
    };
    let values = signed_sums_on_grid(obs.points(), kernel, a, h, &grid, side)
        .into_iter()
        .map(|s| scale * s)
        .collect();
    EstimateCurve::new(
        grid,
        values,
        h,
        CurveMeta {
            variant,
            source: obs.digest(),
        },
    )
}

/// The symmetric estimator `f~_h` on an `m`-point grid over `[0, T]`.
pub fn estimate_tilde(obs: &ObservationSet, kernel: &KernelSpec, h: f64, m: usize) -> Result<EstimateCurve> {
    one_sided_or_tilde(obs, kernel, h, m, Side::Both)
}

/// `f^_h`, built from the shifts `k >= 0`.
pub fn estimate_hat(obs: &ObservationSet, kernel: &KernelSpec, h: f64, m: usize) -> Result<EstimateCurve> {
    one_sided_or_tilde(obs, kernel, h, m, Side::NonNegative)
}

/// `f^v_h`, built from the shifts `k < 0`.
pub fn estimate_check(obs: &ObservationSet, kernel: &KernelSpec, h: f64, m: usize) -> Result<EstimateCurve> {
    one_sided_or_tilde(obs, kernel, h, m, Side::Negative)
}

/// `f~_h` at a single point `x` (anywhere on the line).
pub fn tilde_value(obs: &ObservationSet, kernel: &KernelSpec, h: f64, x: f64) -> Result<f64> {
    let a = obs.noise_half_width();
    check_bandwidth(h, a, kernel)?;
    let n = obs.scaling_n() as f64;
    Ok(a / (n * h * h) * signed_sum_at(obs.points(), kernel, a, h, x, Side::Both))
}

/// `G(z) = ((K_h)' * K_t)(z) = (K_h * K_t)'(z)`, tabulated on
/// `[-A(h+t), A(h+t)]` with spacing at most `min(h, t) / 200` and linearly
/// interpolated in between.
#[derive(Debug, Clone)]
pub struct DoubleKernelTable {
    half_width: f64,
    inv_step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

const TABLE_RESOLUTION: f64 = 200.0;

impl DoubleKernelTable {
    pub fn new(kernel: &KernelSpec, h: f64, t: f64) -> Self {
        let support = kernel.support_radius();
        let half_width = support * (h + t);
        let max_step = h.min(t) / TABLE_RESOLUTION;
        let cells = (2.0 * half_width / max_step).ceil() as usize;
        let step = 2.0 * half_width / cells as f64;
        let (ah, at) = (support * h, support * t);
        let values: Vec<f64> = (0..=cells)
            .map(|i| {
                if i == 0 || i == cells {
                    return 0.0;
                }
                let z = -half_width + i as f64 * step;
                let lo = (-at).max(z - ah);
                let hi = at.min(z + ah);
                if hi <= lo {
                    return 0.0;
                }
                quad::integrate(
                    |s| kernel.deriv((z - s) / h) / (h * h) * kernel.value(s / t) / t,
                    lo,
                    hi,
                    1e-14 / (h * t),
                    1e-13,
                )
            })
            .collect();
        let slopes = values.windows(2).map(|w| w[1] - w[0]).collect();
        DoubleKernelTable {
            half_width,
            inv_step: 1.0 / step,
            values,
            slopes,
        }
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        let pos = (z + self.half_width) * self.inv_step;
        if !(pos >= 0.0) {
            return 0.0;
        }
        let i = pos as usize;
        if i >= self.slopes.len() {
            return 0.0;
        }
        self.values[i] + (pos - i as f64) * self.slopes[i]
    }
}

/// Every shifted centre `Y_i + (2k+1)a` within `reach` of `[0, T]`, sorted,
/// with its sign `s_k`.
#[derive(Debug, Clone)]
pub struct ShiftedCentres {
    centres: Vec<f64>,
    signs: Vec<f64>,
    reach: f64,
}

impl ShiftedCentres {
    pub fn new(obs: &ObservationSet, reach: f64) -> Self {
        let a = obs.noise_half_width();
        let t_end = obs.window_end();
        let mut pairs = Vec::new();
        for &y in obs.points() {
            let k_lo = ((-reach - y - a) / (2.0 * a)).ceil() as i64;
            let k_hi = ((t_end + reach - y - a) / (2.0 * a)).floor() as i64;
            for k in k_lo..=k_hi {
                let c = y + (2 * k + 1) as f64 * a;
                pairs.push((c, if k >= 0 { 1.0 } else { -1.0 }));
            }
        }
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        ShiftedCentres {
            centres: pairs.iter().map(|p| p.0).collect(),
            signs: pairs.iter().map(|p| p.1).collect(),
            reach,
        }
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn len(&self) -> usize {
        self.centres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centres.is_empty()
    }

    /// `sum_c s_c G(x_j - c)` on every grid point.
    pub fn convolve(&self, table: &DoubleKernelTable, grid: &UniformGrid) -> Vec<f64> {
        let w = table.half_width();
        debug_assert!(w <= self.reach + 1e-12);
        let mut out = vec![0.0; grid.len()];
        let (mut lo, mut hi) = (0usize, 0usize);
        for (j, slot) in out.iter_mut().enumerate() {
            let x = grid.x(j);
            while lo < self.centres.len() && self.centres[lo] < x - w {
                lo += 1;
            }
            if hi < lo {
                hi = lo;
            }
            while hi < self.centres.len() && self.centres[hi] <= x + w {
                hi += 1;
            }
            let mut acc = 0.0;
            for (c, s) in self.centres[lo..hi].iter().zip(&self.signs[lo..hi]) {
                acc += s * table.eval(x - c);
            }
            *slot = acc;
        }
        out
    }
}

/// `f~_{h,t} = (a/n) sum s_c G(x - c)` from precomputed pieces.
pub fn double_smooth_with(
    obs: &ObservationSet,
    centres: &ShiftedCentres,
    table: &DoubleKernelTable,
    grid: &UniformGrid,
) -> Vec<f64> {
    let scale = obs.noise_half_width() / obs.scaling_n() as f64;
    centres.convolve(table, grid).into_iter().map(|v| scale * v).collect()
}

/// The doubly-smoothed estimator `f~_{h,t} = K_h * f~_t` (symmetric in `h, t`).
pub fn double_smooth(obs: &ObservationSet, kernel: &KernelSpec, h: f64, t: f64, m: usize) -> Result<EstimateCurve> {
    let a = obs.noise_half_width();
    check_bandwidth(h, a, kernel)?;
    check_bandwidth(t, a, kernel)?;
    check_grid_size(m)?;
    let grid = UniformGrid::new(obs.window_end(), m)?;
    let table = DoubleKernelTable::new(kernel, h, t);
    let centres = ShiftedCentres::new(obs, table.half_width());
    let values = double_smooth_with(obs, &centres, &table, &grid);
    EstimateCurve::new(
        grid,
        values,
        h,
        CurveMeta {
            variant: Variant::DoubleSmoothed { inner: t },
            source: obs.digest(),
        },
    )
}

/// `(K_h * f_X)(x)` by adaptive quadrature over the kernel support.
pub fn smooth_truth_at(model: &IntensityModel, kernel: &KernelSpec, h: f64, x: f64) -> f64 {
    let support = kernel.support_radius();
    // Kinks of f_X(x - h v) as a function of v.
    let breaks: Vec<f64> = model.breakpoints().iter().map(|b| (x - b) / h).collect();
    quad::integrate_with_breaks(
        |v| kernel.value(v) * model.density(x - h * v),
        -support,
        support,
        &breaks,
        1e-13,
        1e-12,
    )
}

/// `K_h * f_X` on the grid: the exact mean of `f~_h`.
pub fn smooth_truth(model: &IntensityModel, kernel: &KernelSpec, h: f64, m: usize) -> Result<EstimateCurve> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", format!("bandwidth must be positive, got {h}")));
    }
    let grid = UniformGrid::new(model.window_end(), m)?;
    let values = grid
        .points()
        .into_iter()
        .map(|x| smooth_truth_at(model, kernel, h, x))
        .collect();
    EstimateCurve::new(
        grid,
        values,
        h,
        CurveMeta {
            variant: Variant::SmoothedTruth,
            source: model.label().to_string(),
        },
    )
}

/// `f_X` on the grid.
pub fn truth_curve(model: &IntensityModel, m: usize) -> Result<EstimateCurve> {
    let grid = UniformGrid::new(model.window_end(), m)?;
    Ok(EstimateCurve::tabulate(grid, |x| model.density(x), model.label()))
}

/// Ordinary kernel smoothing `(1/n) sum_i K_h(x - Y_i)`, ignoring the noise.
pub fn estimate_naive(obs: &ObservationSet, kernel: &KernelSpec, h: f64, m: usize) -> Result<EstimateCurve> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::param("h", format!("bandwidth must be positive, got {h}")));
    }
    check_grid_size(m)?;
    let grid = UniformGrid::new(obs.window_end(), m)?;
    let scale = 1.0 / (obs.scaling_n() as f64 * h);
    let values = grid
        .points()
        .into_iter()
        .map(|x| scale * obs.points().iter().map(|&y| kernel.value((x - y) / h)).sum::<f64>())
        .collect();
    EstimateCurve::new(
        grid,
        values,
        h,
        CurveMeta {
            variant: Variant::Naive,
            source: obs.digest(),
        },
    )
}

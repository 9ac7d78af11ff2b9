//! Kernel deconvolution of Poisson intensities observed with uniform noise.
//!
//! Occurrences `X_i` of a Poisson process with intensity `n f_X` are seen as
//! `Y_i = X_i + eps_i` with `eps_i ~ U[-a, a]`. The estimator `f~_h` inverts
//! the uniform convolution through an alternating series of kernel
//! derivatives, and the bandwidth is chosen by a Goldenshluger-Lepski rule.
//!
//! ```
//! use poisson_deconv::{beta_scenario, estimate_tilde, simulate_observation, BetaShape, KernelSpec};
//!
//! let model = beta_scenario(BetaShape::Unisym);
//! let obs = simulate_observation(&model, 1000, 0.05, 7).unwrap();
//! let curve = estimate_tilde(&obs, &KernelSpec::epanechnikov(), 0.05, 512).unwrap();
//! assert_eq!(curve.values().len(), 512);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod intensity;
pub mod io;
pub mod kernels;
pub mod metrics;
pub mod quad;
pub mod selection;
pub mod simulate;

pub use error::{Error, Result};
pub use estimator::{
    default_grid_size, double_smooth, estimate_check, estimate_hat, estimate_naive, estimate_tilde, smooth_truth,
    truth_curve, EstimateCurve, UniformGrid, Variant,
};
pub use intensity::{beta_scenario, custom_model, laplace_scenario, BetaShape, IntensityModel, Scenario};
pub use kernels::{compute_norms, higher_order_kernel, KernelNorms, KernelSpec};
pub use metrics::{
    l2_distance, l2_norm_t, rate_slope_check, run_benchmark, variance_check, BenchmarkOptions, BenchmarkScenario,
    Method, RiskReport, ScenarioResult,
};
pub use selection::{
    default_grid, oracle_bandwidth, penalty_constant, select_adaptive_gamma, select_fixed_eta, theory_grid,
    BandwidthGrid, SelectionResult, SelectionWorkspace,
};
pub use simulate::{simulate_observation, ObservationSet};

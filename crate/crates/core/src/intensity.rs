//! True intensity functions `f_X`, used to simulate data and to score estimates.
//!
//! The intensity of the observed process is `n * f_X`; `f_X` need not
//! integrate to one, its mass is `total_mass`.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use statrs::distribution::{Beta, Continuous, ContinuousCDF, Laplace};

use crate::error::{Error, Result};

/// Knots of the inverse-CDF table used by [`sample_points`].
pub const SAMPLER_KNOTS: usize = 1 << 16;

/// Half-width, in scale units, of the bracket over which the Laplace
/// sampler is tabulated. The mass left outside is `exp(-30)`.
const LAPLACE_BRACKET_SCALES: f64 = 30.0;

/// The shapes of the three Beta-mixture scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaShape {
    /// Beta(2, 2).
    Unisym,
    /// 0.5 Beta(2, 6) + 0.5 Beta(6, 2).
    Bisym,
    /// 0.5 Beta(2, 20) + 0.5 Beta(2, 2).
    Biasym,
}

/// Named simulation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Beta(BetaShape),
    Laplace,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Beta(BetaShape::Unisym),
        Scenario::Beta(BetaShape::Bisym),
        Scenario::Beta(BetaShape::Biasym),
        Scenario::Laplace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Beta(BetaShape::Unisym) => "beta-unisym",
            Scenario::Beta(BetaShape::Bisym) => "beta-bisym",
            Scenario::Beta(BetaShape::Biasym) => "beta-biasym",
            Scenario::Laplace => "laplace",
        }
    }

    pub fn model(self) -> IntensityModel {
        match self {
            Scenario::Beta(shape) => beta_scenario(shape),
            Scenario::Laplace => laplace_scenario(),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s).ok_or_else(|| {
            let valid: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
            Error::param(
                "scenario",
                format!("unknown scenario `{s}`; valid scenarios: {}", valid.join(", ")),
            )
        })
    }
}

#[derive(Clone)]
enum Shape {
    BetaMixture(Vec<(f64, Beta)>),
    Laplace(Laplace),
    /// Linear interpolation of `(xs, fs)`, zero outside `[xs[0], xs[last]]`.
    /// `cum[j]` is the exact integral up to `xs[j]`.
    PiecewiseLinear {
        xs: Vec<f64>,
        fs: Vec<f64>,
        cum: Vec<f64>,
    },
}

/// Inverse-CDF table over a bracket: `probs[j]` is the normalized CDF at `xs[j]`.
#[derive(Debug)]
struct InverseCdf {
    xs: Vec<f64>,
    probs: Vec<f64>,
}

impl InverseCdf {
    fn build(model: &IntensityModel) -> Self {
        let (lo, hi) = model.bracket;
        let step = (hi - lo) / (SAMPLER_KNOTS - 1) as f64;
        let xs: Vec<f64> = (0..SAMPLER_KNOTS)
            .map(|j| {
                if j + 1 == SAMPLER_KNOTS {
                    hi
                } else {
                    lo + j as f64 * step
                }
            })
            .collect();
        let mut probs: Vec<f64> = xs.iter().map(|&x| model.cdf(x) / model.total_mass).collect();
        // Enforce monotonicity against rounding in the CDF evaluation.
        for j in 1..probs.len() {
            if probs[j] < probs[j - 1] {
                probs[j] = probs[j - 1];
            }
        }
        InverseCdf { xs, probs }
    }

    fn quantile(&self, u: f64) -> f64 {
        let first = self.probs[0];
        let last = *self.probs.last().unwrap();
        let p = first + u * (last - first);
        let j = self.probs.partition_point(|&q| q <= p).clamp(1, self.xs.len() - 1);
        let (p0, p1) = (self.probs[j - 1], self.probs[j]);
        let (x0, x1) = (self.xs[j - 1], self.xs[j]);
        if p1 > p0 {
            x0 + (p - p0) / (p1 - p0) * (x1 - x0)
        } else {
            x0
        }
    }
}

/// A true intensity `f_X` with its CDF, mass and evaluation window `[0, T]`.
#[derive(Clone)]
pub struct IntensityModel {
    label: String,
    shape: Shape,
    total_mass: f64,
    window_end: f64,
    bracket: (f64, f64),
    breakpoints: Vec<f64>,
    sampler: OnceLock<Arc<InverseCdf>>,
}

impl fmt::Debug for IntensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntensityModel")
            .field("label", &self.label)
            .field("total_mass", &self.total_mass)
            .field("window_end", &self.window_end)
            .field("bracket", &self.bracket)
            .finish()
    }
}

impl IntensityModel {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn window_end(&self) -> f64 {
        self.window_end
    }

    /// Interval carrying all but a negligible part of the mass.
    pub fn bracket(&self) -> (f64, f64) {
        self.bracket
    }

    /// Points where the density is not smooth; quadrature splits there.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn with_window_end(mut self, window_end: f64) -> Result<Self> {
        if !(window_end.is_finite() && window_end > 0.0) {
            return Err(Error::param("T", format!("must be positive, got {window_end}")));
        }
        self.window_end = window_end;
        Ok(self)
    }

    pub fn density(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::BetaMixture(parts) => {
                if !(0.0..=1.0).contains(&x) {
                    return 0.0;
                }
                parts.iter().map(|(w, b)| w * b.pdf(x)).sum()
            }
            Shape::Laplace(l) => l.pdf(x),
            Shape::PiecewiseLinear { xs, fs, .. } => {
                let last = xs.len() - 1;
                if x < xs[0] || x > xs[last] {
                    return 0.0;
                }
                let j = xs.partition_point(|&k| k <= x).clamp(1, last);
                let t = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
                fs[j - 1] + t * (fs[j] - fs[j - 1])
            }
        }
    }

    /// `F_X(x) = int_{-inf}^x f_X`.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::BetaMixture(parts) => {
                if x <= 0.0 {
                    return 0.0;
                }
                if x >= 1.0 {
                    return self.total_mass;
                }
                parts.iter().map(|(w, b)| w * b.cdf(x)).sum()
            }
            Shape::Laplace(l) => l.cdf(x),
            Shape::PiecewiseLinear { xs, fs, cum } => {
                let last = xs.len() - 1;
                if x <= xs[0] {
                    return 0.0;
                }
                if x >= xs[last] {
                    return cum[last];
                }
                let j = xs.partition_point(|&k| k <= x).clamp(1, last);
                let dx = x - xs[j - 1];
                let slope = (fs[j] - fs[j - 1]) / (xs[j] - xs[j - 1]);
                cum[j - 1] + fs[j - 1] * dx + 0.5 * slope * dx * dx
            }
        }
    }

    fn sampler(&self) -> &InverseCdf {
        self.sampler.get_or_init(|| Arc::new(InverseCdf::build(self)))
    }

    /// Draws one point from `f_X / ||f_X||_1`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.sampler().quantile(u)
    }
}

fn beta(a: f64, b: f64) -> Beta {
    Beta::new(a, b).expect("valid beta parameters")
}

pub fn beta_scenario(which: BetaShape) -> IntensityModel {
    let parts = match which {
        BetaShape::Unisym => vec![(1.0, beta(2.0, 2.0))],
        BetaShape::Bisym => vec![(0.5, beta(2.0, 6.0)), (0.5, beta(6.0, 2.0))],
        BetaShape::Biasym => vec![(0.5, beta(2.0, 20.0)), (0.5, beta(2.0, 2.0))],
    };
    IntensityModel {
        label: Scenario::Beta(which).name().to_string(),
        shape: Shape::BetaMixture(parts),
        total_mass: 1.0,
        window_end: 1.0,
        bracket: (0.0, 1.0),
        breakpoints: vec![0.0, 1.0],
        sampler: OnceLock::new(),
    }
}

/// Laplace(5, 0.5) intensity on the window `[0, 10]`. The density keeps its
/// full-line tails; the mass outside the window is about `9e-5`.
pub fn laplace_scenario() -> IntensityModel {
    let (location, scale) = (5.0, 0.5);
    let half = LAPLACE_BRACKET_SCALES * scale;
    IntensityModel {
        label: Scenario::Laplace.name().to_string(),
        shape: Shape::Laplace(Laplace::new(location, scale).expect("valid laplace")),
        total_mass: 1.0,
        window_end: 10.0,
        bracket: (location - half, location + half),
        breakpoints: vec![location],
        sampler: OnceLock::new(),
    }
}

/// Piecewise-linear density through `samples`, zero outside their range.
/// The window end defaults to the last abscissa.
pub fn custom_model(samples: &[(f64, f64)]) -> Result<IntensityModel> {
    if samples.len() < 2 {
        return Err(Error::InvalidDensity(format!(
            "need at least 2 points, got {}",
            samples.len()
        )));
    }
    for (i, &(x, f)) in samples.iter().enumerate() {
        if !x.is_finite() || !f.is_finite() {
            return Err(Error::InvalidDensity(format!("non-finite point #{i}")));
        }
        if f < 0.0 {
            return Err(Error::InvalidDensity(format!("negative density {f} at x = {x}")));
        }
        if i > 0 && x <= samples[i - 1].0 {
            return Err(Error::InvalidDensity(format!(
                "abscissae must be strictly increasing (point #{i})"
            )));
        }
    }
    let xs: Vec<f64> = samples.iter().map(|p| p.0).collect();
    let fs: Vec<f64> = samples.iter().map(|p| p.1).collect();
    let mut cum = vec![0.0; xs.len()];
    for j in 1..xs.len() {
        cum[j] = cum[j - 1] + 0.5 * (fs[j] + fs[j - 1]) * (xs[j] - xs[j - 1]);
    }
    let total_mass = *cum.last().unwrap();
    if total_mass <= 0.0 {
        return Err(Error::InvalidDensity("density has zero mass".into()));
    }
    let (lo, hi) = (xs[0], *xs.last().unwrap());
    Ok(IntensityModel {
        label: "custom".to_string(),
        window_end: if hi > 0.0 { hi } else { 1.0 },
        bracket: (lo, hi),
        breakpoints: xs.clone(),
        shape: Shape::PiecewiseLinear { xs, fs, cum },
        total_mass,
        sampler: OnceLock::new(),
    })
}

/// Draws the clean points of a Poisson process with intensity `n * f_X`:
/// a Poisson(`n ||f_X||_1`) count, then i.i.d. draws from `f_X / ||f_X||_1`.
pub fn sample_points<R: Rng + ?Sized>(model: &IntensityModel, n: u64, rng: &mut R) -> Vec<f64> {
    assert!(n >= 1, "scaling n must be at least 1");
    let lambda = n as f64 * model.total_mass;
    let count = Poisson::new(lambda).expect("positive Poisson mean").sample(rng) as usize;
    (0..count).map(|_| model.draw(rng)).collect()
}

//! Compactly supported smoothing kernels.
//!
//! The deconvolution estimator only ever touches the kernel through its
//! derivative `K'`, so every kernel carries an exact derivative next to its
//! value, together with the norms that enter the variance and the penalty:
//! `||K||_1`, `||K'||_1`, `||K'||_2` and `||K'||_inf`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quad;

/// Highest kernel order `higher_order_kernel` will construct.
pub const MAX_ORDER: usize = 10;

const NORM_REL_TOL: f64 = 1e-12;
const SUP_SCAN_POINTS: usize = 100_001;
const MASS_TOL: f64 = 1e-10;
const MOMENT_TOL: f64 = 1e-8;
const SUP_RECONCILE_TOL: f64 = 1e-8;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Norms of a kernel and of its derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelNorms {
    pub l1: f64,
    pub deriv_l1: f64,
    pub deriv_l2: f64,
    pub deriv_sup: f64,
}

#[derive(Clone)]
enum Shape {
    /// `K(u) = sum_j coeffs[j] u^j` on `[-A, A]`.
    Polynomial {
        coeffs: Vec<f64>,
        deriv: Vec<f64>,
    },
    Custom {
        value: RealFn,
        deriv: RealFn,
    },
}

/// A kernel `K` supported on `[-A, A]`, with its derivative and norms.
#[derive(Clone)]
pub struct KernelSpec {
    name: String,
    support_radius: f64,
    order: usize,
    shape: Shape,
    norms: KernelNorms,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("support_radius", &self.support_radius)
            .field("order", &self.order)
            .field("norms", &self.norms)
            .finish()
    }
}

#[inline]
fn horner(coeffs: &[f64], u: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
}

impl KernelSpec {
    /// `K(u) = 0.75 (1 - u^2)` on `[-1, 1]`, with analytic norms.
    pub fn epanechnikov() -> Self {
        let coeffs = vec![0.75, 0.0, -0.75];
        let kernel = KernelSpec {
            name: "epanechnikov".to_string(),
            support_radius: 1.0,
            order: 1,
            shape: Shape::Polynomial {
                deriv: poly_derivative(&coeffs),
                coeffs,
            },
            norms: KernelNorms {
                l1: 1.0,
                deriv_l1: 1.5,
                deriv_l2: 1.5f64.sqrt(),
                deriv_sup: 1.5,
            },
        };
        kernel
            .reconcile_sup()
            .expect("analytic Epanechnikov sup-norm disagrees with the scan");
        kernel
    }

    /// Builds a polynomial kernel, computing its norms numerically and
    /// checking the moment conditions up to `order`.
    pub fn from_polynomial(
        name: impl Into<String>,
        coeffs: Vec<f64>,
        support_radius: f64,
        order: usize,
    ) -> Result<Self> {
        let shape = Shape::Polynomial {
            deriv: poly_derivative(&coeffs),
            coeffs,
        };
        Self::build(name.into(), shape, support_radius, order)
    }

    /// Builds a kernel from arbitrary value and derivative functions. Both are
    /// clamped to zero outside `[-A, A]`.
    pub fn from_fns(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support_radius: f64,
        order: usize,
    ) -> Result<Self> {
        let shape = Shape::Custom {
            value: Arc::new(value),
            deriv: Arc::new(deriv),
        };
        Self::build(name.into(), shape, support_radius, order)
    }

    fn build(name: String, shape: Shape, support_radius: f64, order: usize) -> Result<Self> {
        if !(support_radius.is_finite() && support_radius > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "support radius must be positive and finite, got {support_radius}"
            )));
        }
        let mut kernel = KernelSpec {
            name,
            support_radius,
            order,
            shape,
            norms: KernelNorms {
                l1: 0.0,
                deriv_l1: 0.0,
                deriv_l2: 0.0,
                deriv_sup: 0.0,
            },
        };
        kernel.norms = compute_norms(|u| kernel.value(u), |u| kernel.deriv(u), kernel.support_radius)?;
        if kernel.norms.deriv_l1 == 0.0 {
            return Err(Error::DegenerateDerivative);
        }
        kernel.check_moments()?;
        Ok(kernel)
    }

    fn check_moments(&self) -> Result<()> {
        let mass = self.moment(0);
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidKernel(format!("kernel integrates to {mass}, expected 1")));
        }
        for j in 1..=self.order {
            let m = self.moment(j as u32);
            if m.abs() > MOMENT_TOL {
                return Err(Error::InvalidKernel(format!(
                    "moment {j} is {m:e}, kernel is not of order {}",
                    self.order
                )));
            }
        }
        Ok(())
    }

    fn reconcile_sup(&self) -> Result<()> {
        let scanned = sup_abs(|u| self.deriv(u), self.support_radius)?;
        if (scanned - self.norms.deriv_sup).abs() > SUP_RECONCILE_TOL * self.norms.deriv_sup.max(1.0) {
            return Err(Error::InvalidKernel(format!(
                "stored ||K'||_inf = {} but scan finds {scanned}",
                self.norms.deriv_sup
            )));
        }
        Ok(())
    }

    /// `int u^j K(u) du` by adaptive quadrature.
    pub fn moment(&self, j: u32) -> f64 {
        let a = self.support_radius;
        quad::integrate(|u| u.powi(j as i32) * self.value(u), -a, a, 1e-15, 1e-13)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn norms(&self) -> KernelNorms {
        self.norms
    }

    /// True for kernels with a polynomial closed form; their products with
    /// other polynomial kernels integrate exactly under Gauss-Kronrod.
    pub fn is_polynomial(&self) -> bool {
        matches!(self.shape, Shape::Polynomial { .. })
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        if u.abs() > self.support_radius {
            return 0.0;
        }
        match &self.shape {
            Shape::Polynomial { coeffs, .. } => horner(coeffs, u),
            Shape::Custom { value, .. } => value(u),
        }
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        if u.abs() > self.support_radius {
            return 0.0;
        }
        match &self.shape {
            Shape::Polynomial { deriv, .. } => horner(deriv, u),
            Shape::Custom { deriv, .. } => deriv(u),
        }
    }
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect()
}

/// Dense scan of `|f|` on `[-A, A]`, refined by golden-section search around
/// the best scan point.
fn sup_abs(f: impl Fn(f64) -> f64, support_radius: f64) -> Result<f64> {
    let n = SUP_SCAN_POINTS;
    let step = 2.0 * support_radius / (n - 1) as f64;
    let at = |i: usize| {
        if i == n - 1 {
            support_radius
        } else {
            -support_radius + i as f64 * step
        }
    };
    let mut best = (0usize, 0.0f64);
    for i in 0..n {
        let u = at(i);
        let v = f(u);
        if !v.is_finite() {
            return Err(Error::NonFiniteKernel { at: u });
        }
        if v.abs() > best.1 {
            best = (i, v.abs());
        }
    }
    let (mut lo, mut hi) = (at(best.0.saturating_sub(1)), at((best.0 + 1).min(n - 1)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1).abs() >= f(m2).abs() {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok(best.1.max(f(0.5 * (lo + hi)).abs()))
}

/// Computes `(||K||_1, ||K'||_1, ||K'||_2, ||K'||_inf)` over `[-A, A]`.
///
/// A nonzero kernel whose derivative vanishes identically is rejected; the
/// all-zero function yields all-zero norms.
pub fn compute_norms(
    value: impl Fn(f64) -> f64,
    deriv: impl Fn(f64) -> f64,
    support_radius: f64,
) -> Result<KernelNorms> {
    let a = support_radius;
    // Also screens the value function for non-finite output.
    let value_sup = sup_abs(&value, a)?;
    let deriv_sup = sup_abs(&deriv, a)?;
    let l1 = quad::integrate(|u| value(u).abs(), -a, a, 1e-15, NORM_REL_TOL);
    let deriv_l1 = quad::integrate(|u| deriv(u).abs(), -a, a, 1e-15, NORM_REL_TOL);
    let deriv_l2 = quad::integrate(|u| deriv(u).powi(2), -a, a, 1e-15, NORM_REL_TOL).sqrt();
    if deriv_l1 == 0.0 && (l1 > 0.0 || value_sup > 0.0) {
        return Err(Error::DegenerateDerivative);
    }
    Ok(KernelNorms {
        l1,
        deriv_l1,
        deriv_l2,
        deriv_sup,
    })
}

/// A symmetric kernel of order `ell` on `[-1, 1]` of the form
/// `(1 - u^2) P(u)` with `P` an even polynomial, so that it vanishes at the
/// support ends. `ell = 1` gives the Epanechnikov kernel.
pub fn higher_order_kernel(ell: usize) -> Result<KernelSpec> {
    if ell == 0 || ell > MAX_ORDER {
        return Err(Error::UnsupportedOrder {
            requested: ell,
            max: MAX_ORDER,
        });
    }
    // Odd moments vanish by symmetry; solve for the even ones.
    let q = ell / 2 + 1;
    // int_{-1}^{1} u^p (1 - u^2) du for even p.
    let weighted = |p: usize| 2.0 / (p as f64 + 1.0) - 2.0 / (p as f64 + 3.0);
    let system = DMatrix::from_fn(q, q, |r, c| weighted(2 * r + 2 * c));
    let mut rhs = DVector::zeros(q);
    rhs[0] = 1.0;
    let p = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidKernel("singular moment system".into()))?;
    let mut coeffs = vec![0.0; 2 * q + 1];
    for (i, &pi) in p.iter().enumerate() {
        coeffs[2 * i] += pi;
        coeffs[2 * i + 2] -= pi;
    }
    KernelSpec::from_polynomial(format!("order{ell}"), coeffs, 1.0, ell)
}

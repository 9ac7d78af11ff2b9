//! Adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! Used for kernel norms and moments, for smoothing the true intensity, and
//! for tabulating the doubly-smoothed kernel. The panel with the largest
//! Gauss/Kronrod discrepancy is bisected until the summed discrepancy meets
//! the tolerance, which handles the kinks of compactly supported kernels and
//! densities.

use std::collections::BinaryHeap;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Upper bound on the number of panels of one integration.
const MAX_PANELS: usize = 4096;

/// Error estimates below this many ulps of `int |f|` are round-off.
const ROUNDOFF_ULPS: f64 = 50.0;

/// One Gauss-Kronrod panel on `[a, b]`.
#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    est: f64,
    /// `|kronrod - gauss|`.
    err: f64,
    /// Kronrod estimate of the integral of `|f|`.
    abs: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Self {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let fc = f(c);
        let mut k = WGK[7] * fc;
        let mut g = WG[3] * fc;
        let mut abs = WGK[7] * fc.abs();
        for j in 0..7 {
            let dx = r * XGK[j];
            let (lo, hi) = (f(c - dx), f(c + dx));
            let s = lo + hi;
            k += WGK[j] * s;
            abs += WGK[j] * (lo.abs() + hi.abs());
            if j % 2 == 1 {
                g += WG[j / 2] * s;
            }
        }
        Panel {
            a,
            b,
            est: k * r,
            err: ((k - g) * r).abs(),
            abs: abs * r.abs(),
        }
    }

    fn splittable(&self, whole: f64) -> bool {
        self.err > ROUNDOFF_ULPS * f64::EPSILON * self.abs && (self.b - self.a).abs() > 1e-12 * whole
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over `[a, b]` to roughly `max(abs_tol, rel_tol * |I|)`,
/// always bisecting the panel with the largest error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let whole = (b - a).abs();
    let first = Panel::new(&f, a, b);
    let mut total = first.est;
    let mut total_err = first.err;
    let mut heap = BinaryHeap::from([first]);
    while heap.len() < MAX_PANELS && total_err > abs_tol.max(rel_tol * total.abs()) {
        let worst = *heap.peek().unwrap();
        if !worst.splittable(whole) {
            break;
        }
        heap.pop();
        let m = 0.5 * (worst.a + worst.b);
        let left = Panel::new(&f, worst.a, m);
        let right = Panel::new(&f, m, worst.b);
        total += left.est + right.est - worst.est;
        total_err += left.err + right.err - worst.err;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum left to right so the result does not carry update round-off.
    let mut panels = heap.into_vec();
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    panels.iter().map(|p| p.est).sum()
}

/// Integrates over `[a, b]`, splitting first at every breakpoint strictly inside.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let share = abs_tol / (cuts.len() + 1) as f64;
    let mut lo = a;
    let mut total = 0.0;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        total += integrate(&f, lo, hi, share, rel_tol);
        lo = hi;
    }
    total
}

/// Composite trapezoid rule over equally spaced samples with spacing `dx`.
pub fn trapezoid_uniform(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        len => {
            let inner: f64 = values[1..len - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[len - 1]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-14, 1e-14);
        // [x^3 - x^2/2 + 2x] from -1 to 2 = (8 - 2 + 4) - (-1 - 0.5 - 2)
        assert!((v - 13.5).abs() < 1e-13);
    }

    #[test]
    fn kinks_converge() {
        let v = integrate(|x: f64| x.abs(), -1.0, 3.0, 1e-12, 1e-12);
        assert!((v - 5.0).abs() < 1e-10, "{v}");
        let w = integrate_with_breaks(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], 1e-14, 1e-14);
        assert!((w - (0.045 + 0.245)).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let xs: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 3.0 * x).collect();
        assert!((trapezoid_uniform(&ys, 0.2) - 8.0).abs() < 1e-12);
        assert_eq!(trapezoid_uniform(&[4.0], 0.1), 0.0);
    }

    #[test]
    fn unreachable_tolerance_still_terminates() {
        use std::cell::Cell;
        let calls = Cell::new(0usize);
        // A jump the tolerance can never resolve, plus evaluation noise.
        let v = integrate(
            |x: f64| {
                calls.set(calls.get() + 1);
                (if x < 1.0 / 3.0 { 1.0 } else { 0.0 }) + 1e-9 * (1e7 * x).sin()
            },
            0.0,
            1.0,
            0.0,
            0.0,
        );
        assert!((v - 1.0 / 3.0).abs() < 1e-8);
        assert!(calls.get() <= 2 * MAX_PANELS * 15);
    }
}

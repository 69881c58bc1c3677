//! Linear relaxations of activations and their derivatives over `[l, u]`.
//!
//! All constructions return a pair of lines `lower(y) ≤ target(y) ≤ upper(y)` valid on
//! the closed interval. Smooth derivative relaxations use two parallel lines of the
//! chord slope with offsets equal to the exact extrema of `σ′(y) − m·y` on `[l, u]`,
//! found from the tangent-point cubics.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::network::{sigmoid, Activation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearRelaxation {
    pub lower_slope: f64,
    pub lower_offset: f64,
    pub upper_slope: f64,
    pub upper_offset: f64,
}

impl LinearRelaxation {
    pub fn new(lower_slope: f64, lower_offset: f64, upper_slope: f64, upper_offset: f64) -> Self {
        LinearRelaxation {
            lower_slope,
            lower_offset,
            upper_slope,
            upper_offset,
        }
    }

    /// Both lines equal `slope·y + offset`.
    pub fn exact(slope: f64, offset: f64) -> Self {
        Self::new(slope, offset, slope, offset)
    }

    pub fn constant(lo: f64, hi: f64) -> Self {
        Self::new(0.0, lo, 0.0, hi)
    }

    pub fn lower(&self, y: f64) -> f64 {
        self.lower_slope * y + self.lower_offset
    }

    pub fn upper(&self, y: f64) -> f64 {
        self.upper_slope * y + self.upper_offset
    }

    pub fn gap(&self, y: f64) -> f64 {
        self.upper(y) - self.lower(y)
    }

    pub fn is_exact(&self) -> bool {
        self.lower_slope == self.upper_slope && self.lower_offset == self.upper_offset
    }
}

/// Curvature class of a function on an interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Convex,
    Concave,
    Mixed,
}

/// Sigmoid-family kinds that have tangent cubics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothKind {
    Sigmoid,
    Tanh,
}

impl SmoothKind {
    fn value(self, y: f64) -> f64 {
        match self {
            SmoothKind::Sigmoid => sigmoid(y),
            SmoothKind::Tanh => y.tanh(),
        }
    }

    fn deriv(self, y: f64) -> f64 {
        let t = self.value(y);
        match self {
            SmoothKind::Sigmoid => t * (1.0 - t),
            SmoothKind::Tanh => 1.0 - t * t,
        }
    }

    fn second_deriv(self, y: f64) -> f64 {
        let t = self.value(y);
        match self {
            SmoothKind::Sigmoid => t * (1.0 - t) * (1.0 - 2.0 * t),
            SmoothKind::Tanh => -2.0 * t * (1.0 - t * t),
        }
    }

    /// Inflection point of the derivative on the positive side.
    pub fn derivative_inflection(self) -> f64 {
        let s3 = 3f64.sqrt();
        match self {
            SmoothKind::Sigmoid => ((3.0 + s3) / (3.0 - s3)).ln(),
            SmoothKind::Tanh => (1.0 / s3).atanh(),
        }
    }

    /// Points `y` with `σ′(y) = m`, for `0 < m < max σ′`.
    fn deriv_level_points(self, m: f64) -> Option<[f64; 2]> {
        match self {
            SmoothKind::Sigmoid => {
                let disc = 1.0 - 4.0 * m;
                if !(m > 0.0 && disc > 0.0) {
                    return None;
                }
                // small root without cancellation
                let y_lambda = 2.0 * m / (1.0 + disc.sqrt());
                let x = (y_lambda / (1.0 - y_lambda)).ln();
                Some([x, -x])
            }
            SmoothKind::Tanh => {
                if !(m > 0.0 && m < 1.0) {
                    return None;
                }
                let x = (1.0 - m).sqrt().atanh();
                Some([-x, x])
            }
        }
    }

    fn from_activation(kind: Activation) -> Option<SmoothKind> {
        match kind {
            Activation::Sigmoid => Some(SmoothKind::Sigmoid),
            Activation::Tanh => Some(SmoothKind::Tanh),
            _ => None,
        }
    }
}

fn check_interval(l: f64, u: f64) -> Result<()> {
    if !(l.is_finite() && u.is_finite()) || l > u {
        return Err(Error::InvalidInterval { lower: l, upper: u });
    }
    Ok(())
}

/// Curvature of a sigmoid-family activation on `[l, u]`; a tie at 0 counts as pure.
pub fn value_region(l: f64, u: f64) -> Region {
    if u <= 0.0 {
        Region::Convex
    } else if l >= 0.0 {
        Region::Concave
    } else {
        Region::Mixed
    }
}

/// Curvature of the derivative of a sigmoid-family activation on `[l, u]`.
pub fn derivative_region(kind: SmoothKind, l: f64, u: f64) -> Region {
    let c = kind.derivative_inflection();
    if -c <= l && u <= c {
        Region::Concave
    } else if u <= -c || l >= c {
        Region::Convex
    } else {
        Region::Mixed
    }
}

/// Sound linear relaxation of `kind` over `[l, u]`.
pub fn relax_value(kind: Activation, l: f64, u: f64) -> Result<LinearRelaxation> {
    check_interval(l, u)?;
    let relax = match kind {
        Activation::Identity => LinearRelaxation::exact(1.0, 0.0),
        Activation::Relu => {
            if l >= 0.0 {
                LinearRelaxation::exact(1.0, 0.0)
            } else if u <= 0.0 {
                LinearRelaxation::exact(0.0, 0.0)
            } else {
                let s = u / (u - l);
                LinearRelaxation::new(0.0, 0.0, s, -l * s)
            }
        }
        Activation::LeakyRelu { slope: a } => {
            if l >= 0.0 {
                LinearRelaxation::exact(1.0, 0.0)
            } else if u <= 0.0 {
                LinearRelaxation::exact(a, 0.0)
            } else {
                let s = (u - a * l) / (u - l);
                LinearRelaxation::new(a, 0.0, s, u - s * u)
            }
        }
        Activation::Sigmoid => smooth_value(SmoothKind::Sigmoid, l, u),
        Activation::Tanh => smooth_value(SmoothKind::Tanh, l, u),
    };
    Ok(relax)
}

fn tangent(kind: SmoothKind, at: f64) -> (f64, f64) {
    let s = kind.deriv(at);
    (s, kind.value(at) - s * at)
}

fn smooth_value(kind: SmoothKind, l: f64, u: f64) -> LinearRelaxation {
    if l == u {
        let (s, o) = tangent(kind, l);
        return LinearRelaxation::exact(s, o);
    }
    let (vl, vu) = (kind.value(l), kind.value(u));
    let m = (vu - vl) / (u - l);
    match (kind, value_region(l, u)) {
        // midpoint tangents keep the gap at the midpoint non-increasing under nesting
        (_, Region::Convex) => {
            let (s, o) = tangent(kind, 0.5 * (l + u));
            LinearRelaxation::new(s, o, m, vu - m * u)
        }
        (_, Region::Concave) => {
            let (s, o) = tangent(kind, 0.5 * (l + u));
            LinearRelaxation::new(m, vl - m * l, s, o)
        }
        (SmoothKind::Sigmoid, Region::Mixed) => {
            let (lo, hi) = parallel_value_offsets(kind, m, l, u);
            LinearRelaxation::new(m, lo, m, hi)
        }
        (SmoothKind::Tanh, Region::Mixed) => {
            // endpoint tangents, unless one crosses tanh at the far endpoint
            let (ls, lo) = tangent(kind, l);
            let (us, uo) = tangent(kind, u);
            let lower_ok = ls * u + lo <= vu;
            let upper_ok = us * l + uo >= vl;
            if lower_ok && upper_ok {
                return LinearRelaxation::new(ls, lo, us, uo);
            }
            let (plo, phi) = parallel_value_offsets(kind, m, l, u);
            let (ls, lo) = if lower_ok { (ls, lo) } else { (m, plo) };
            let (us, uo) = if upper_ok { (us, uo) } else { (m, phi) };
            LinearRelaxation::new(ls, lo, us, uo)
        }
    }
}

/// Exact `min` and `max` of `σ(y) − m·y` over `[l, u]`.
fn parallel_value_offsets(kind: SmoothKind, m: f64, l: f64, u: f64) -> (f64, f64) {
    let h = |y: f64| kind.value(y) - m * y;
    let mut lo = h(l).min(h(u));
    let mut hi = h(l).max(h(u));
    if let Some(points) = kind.deriv_level_points(m) {
        for y in points.into_iter().filter(|y| l < *y && *y < u) {
            lo = lo.min(h(y));
            hi = hi.max(h(y));
        }
    }
    (lo, hi)
}

/// Sound linear relaxation of the derivative of `kind` over `[l, u]`.
///
/// The piecewise-linear kinds use the right derivative at 0, so an interval ending at
/// `u = 0` keeps the active slope in its upper bound.
pub fn relax_derivative(kind: Activation, l: f64, u: f64) -> Result<LinearRelaxation> {
    check_interval(l, u)?;
    let relax = match kind {
        Activation::Identity => LinearRelaxation::constant(1.0, 1.0),
        Activation::Relu => {
            if l >= 0.0 {
                LinearRelaxation::constant(1.0, 1.0)
            } else if u < 0.0 {
                LinearRelaxation::constant(0.0, 0.0)
            } else {
                LinearRelaxation::constant(0.0, 1.0)
            }
        }
        Activation::LeakyRelu { slope: a } => {
            if l >= 0.0 {
                LinearRelaxation::constant(1.0, 1.0)
            } else if u < 0.0 {
                LinearRelaxation::constant(a, a)
            } else {
                LinearRelaxation::constant(a, 1.0)
            }
        }
        Activation::Sigmoid | Activation::Tanh => {
            let kind = SmoothKind::from_activation(kind).expect("smooth kind");
            smooth_derivative(kind, l, u)
        }
    };
    Ok(relax)
}

fn smooth_derivative(kind: SmoothKind, l: f64, u: f64) -> LinearRelaxation {
    if l == u {
        let s = kind.second_deriv(l);
        return LinearRelaxation::exact(s, kind.deriv(l) - s * l);
    }
    let (dl, du) = (kind.deriv(l), kind.deriv(u));
    let m = (du - dl) / (u - l);
    let h = |y: f64| kind.deriv(y) - m * y;
    let mut lo = h(l).min(h(u));
    let mut hi = h(l).max(h(u));
    if let Ok(roots) = solve_tangent_cubic(kind, m) {
        for x in roots.into_iter().filter(|x| l < *x && *x < u) {
            lo = lo.min(h(x));
            hi = hi.max(h(x));
        }
    }
    LinearRelaxation::new(m, lo, m, hi)
}

const CUBIC_RESIDUAL_TOL: f64 = 1e-10;

/// Tangent points of slope `m_der` on the derivative of `kind`, in pre-activation
/// coordinates, ascending.
///
/// Solves `2t³ − 3t² + t = m_der` on `t ∈ (0, 1)` for the sigmoid and
/// `2t³ − 2t = m_der` on `t ∈ (−1, 1)` for tanh, maps `t` back through logit or
/// artanh, and keeps roots whose residual is below `1e-10`.
pub fn solve_tangent_cubic(kind: SmoothKind, m_der: f64) -> Result<Vec<f64>> {
    if !m_der.is_finite() {
        return Err(Error::NoTangentRoot { slope: m_der });
    }
    // depressed forms s³ + p s + q = 0
    let (p, q, shift) = match kind {
        SmoothKind::Sigmoid => (-0.25, -0.5 * m_der, 0.5),
        SmoothKind::Tanh => (-1.0, -0.5 * m_der, 0.0),
    };
    let poly = |t: f64| match kind {
        SmoothKind::Sigmoid => ((2.0 * t - 3.0) * t + 1.0) * t - m_der,
        SmoothKind::Tanh => (2.0 * t * t - 2.0) * t - m_der,
    };
    let dpoly = |t: f64| match kind {
        SmoothKind::Sigmoid => (6.0 * t - 6.0) * t + 1.0,
        SmoothKind::Tanh => 6.0 * t * t - 2.0,
    };
    let mut out = Vec::new();
    for s in depressed_cubic_roots(p, q) {
        let mut t = s + shift;
        let d = dpoly(t);
        if d != 0.0 {
            t -= poly(t) / d;
        }
        if poly(t).abs() >= CUBIC_RESIDUAL_TOL {
            continue;
        }
        let x = match kind {
            SmoothKind::Sigmoid if t > 0.0 && t < 1.0 => (t / (1.0 - t)).ln(),
            SmoothKind::Tanh if t > -1.0 && t < 1.0 => t.atanh(),
            _ => continue,
        };
        if x.is_finite() && !out.iter().any(|o: &f64| (o - x).abs() <= 1e-12 * x.abs().max(1.0)) {
            out.push(x);
        }
    }
    if out.is_empty() {
        return Err(Error::NoTangentRoot { slope: m_der });
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Real roots of `s³ + p s + q` for `p < 0`.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    debug_assert!(p < 0.0);
    let disc = 4.0 * p * p * p + 27.0 * q * q;
    if disc <= 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| r * (phi - 2.0 * PI * k as f64 / 3.0).cos())
            .collect()
    } else {
        let w = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        vec![(-q / 2.0 + w).cbrt() + (-q / 2.0 - w).cbrt()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_prime(kind: Activation, y: f64) -> f64 {
        kind.derivative(y)
    }

    fn assert_encloses(r: &LinearRelaxation, f: impl Fn(f64) -> f64, l: f64, u: f64) {
        for i in 0..=400 {
            let y = l + (u - l) * i as f64 / 400.0;
            let v = f(y);
            assert!(r.lower(y) <= v + 1e-12, "lower {} > {} at {y}", r.lower(y), v);
            assert!(v <= r.upper(y) + 1e-12, "upper {} < {} at {y}", r.upper(y), v);
        }
    }

    #[test]
    fn relu_unstable_matches_chord() {
        let r = relax_value(Activation::Relu, -1.0, 1.0).unwrap();
        assert_eq!(r, LinearRelaxation::new(0.0, 0.0, 0.5, 0.5));
    }

    #[test]
    fn relu_active_is_exact() {
        let r = relax_value(Activation::Relu, 1.0, 2.0).unwrap();
        assert_eq!(r, LinearRelaxation::exact(1.0, 0.0));
        assert!(relax_value(Activation::Relu, -3.0, -1.0).unwrap().is_exact());
    }

    #[test]
    fn tanh_mixed_uses_endpoint_tangents() {
        let r = relax_value(Activation::Tanh, -1.0, 1.0).unwrap();
        let t = (-1f64).tanh();
        let s = 1.0 - t * t;
        assert!((r.lower_slope - s).abs() < 1e-15);
        assert!((r.lower_offset - (t - s * -1.0)).abs() < 1e-15);
        assert!((r.upper_slope - s).abs() < 1e-15);
        assert!((r.upper_offset - (1f64.tanh() - s)).abs() < 1e-15);
        assert_encloses(&r, f64::tanh, -1.0, 1.0);
    }

    #[test]
    fn tanh_skewed_mixed_interval_stays_sound() {
        let r = relax_value(Activation::Tanh, -0.1, 5.0).unwrap();
        assert_encloses(&r, f64::tanh, -0.1, 5.0);
        let r = relax_value(Activation::Tanh, -6.0, 0.05).unwrap();
        assert_encloses(&r, f64::tanh, -6.0, 0.05);
    }

    #[test]
    fn sigmoid_regions_enclose() {
        for (l, u) in [(-5.0, -1.0), (0.5, 3.0), (-2.0, 7.0), (-0.1, 10.0), (-9.0, 0.01)] {
            let r = relax_value(Activation::Sigmoid, l, u).unwrap();
            assert_encloses(&r, sigmoid, l, u);
        }
    }

    #[test]
    fn relu_derivative_unstable_is_zero_one() {
        let r = relax_derivative(Activation::Relu, -1.0, 1.0).unwrap();
        assert_eq!(r, LinearRelaxation::constant(0.0, 1.0));
    }

    #[test]
    fn leaky_negative_derivative_is_slope() {
        let a = 0.05;
        let r = relax_derivative(Activation::LeakyRelu { slope: a }, -2.0, -1.0).unwrap();
        assert_eq!(r, LinearRelaxation::constant(a, a));
    }

    #[test]
    fn relu_derivative_touching_zero_covers_right_derivative() {
        let r = relax_derivative(Activation::Relu, -1.0, 0.0).unwrap();
        assert!(r.upper(0.0) >= 1.0);
    }

    #[test]
    fn tanh_symmetric_derivative_is_flat() {
        let a = 1.3;
        let r = relax_derivative(Activation::Tanh, -a, a).unwrap();
        assert!(r.lower_slope.abs() < 1e-15 && r.upper_slope.abs() < 1e-15);
        let sech2 = 1.0 - a.tanh().powi(2);
        assert!((r.lower_offset - sech2).abs() < 1e-12);
        assert!((r.upper_offset - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_derivatives_enclose() {
        for kind in [Activation::Sigmoid, Activation::Tanh] {
            for (l, u) in [(-5.0, -1.0), (0.2, 0.9), (-2.0, 7.0), (1.5, 3.0), (-0.3, 0.1), (-10.0, 10.0)] {
                let r = relax_derivative(kind, l, u).unwrap();
                assert_encloses(&r, |y| sigma_prime(kind, y), l, u);
            }
        }
    }

    #[test]
    fn point_interval_gives_tangent() {
        let r = relax_value(Activation::Tanh, 0.3, 0.3).unwrap();
        assert!(r.is_exact());
        assert!((r.lower(0.3) - 0.3f64.tanh()).abs() < 1e-15);
        let r = relax_derivative(Activation::Sigmoid, -0.7, -0.7).unwrap();
        assert!(r.is_exact());
        assert!((r.lower(-0.7) - Activation::Sigmoid.derivative(-0.7)).abs() < 1e-15);
    }

    #[test]
    fn inverted_and_nan_intervals_are_rejected() {
        assert!(matches!(
            relax_value(Activation::Relu, 1.0, 0.0),
            Err(Error::InvalidInterval { .. })
        ));
        assert!(relax_derivative(Activation::Tanh, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn tanh_cubic_zero_slope() {
        let roots = solve_tangent_cubic(SmoothKind::Tanh, 0.0).unwrap();
        assert!(roots.iter().any(|x| x.abs() < 1e-12));
    }

    #[test]
    fn sigmoid_cubic_zero_slope() {
        let roots = solve_tangent_cubic(SmoothKind::Sigmoid, 0.0).unwrap();
        assert!(roots.iter().any(|x| x.abs() < 1e-12));
    }

    #[test]
    fn tanh_cubic_residuals() {
        let roots = solve_tangent_cubic(SmoothKind::Tanh, -0.5).unwrap();
        assert!(!roots.is_empty());
        for x in roots {
            let t = x.tanh();
            assert!((2.0 * t * t * t - 2.0 * t + 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn cubic_without_valid_root() {
        // 2t³ − 2t has range (−0.77, 0.77) on (−1, 1); a slope of 5 is unreachable
        assert!(matches!(
            solve_tangent_cubic(SmoothKind::Tanh, 5.0),
            Err(Error::NoTangentRoot { .. })
        ));
    }

    #[test]
    fn region_ties_classify_as_pure() {
        assert_eq!(value_region(-1.0, 0.0), Region::Convex);
        assert_eq!(value_region(0.0, 2.0), Region::Concave);
        let c = SmoothKind::Tanh.derivative_inflection();
        assert!((c - 0.658_478_948_462_408_4).abs() < 1e-12);
        assert_eq!(derivative_region(SmoothKind::Tanh, -c, c), Region::Concave);
        assert_eq!(derivative_region(SmoothKind::Tanh, c, 2.0), Region::Convex);
        assert_eq!(derivative_region(SmoothKind::Tanh, 0.0, 2.0), Region::Mixed);
        let cs = SmoothKind::Sigmoid.derivative_inflection();
        assert!((cs - 1.316_957_896_924_816_7).abs() < 1e-12);
    }
}

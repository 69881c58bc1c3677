//! McCormick relaxations of bilinear products `a·b` whose factors carry both affine
//! bounds and interval bounds on a common region.
//!
//! With `a ∈ [aL, aU]`, `b ∈ [bL, bU]` and `η ∈ [0, 1]`:
//!
//! ```text
//! a·b ≥ CAl·b + CB·a − (η aL bL + (1−η) aU bU),   CAl = η aL + (1−η) aU
//! a·b ≤ CAu·b + CB·a − (η aU bL + (1−η) aL bU),   CAu = η aU + (1−η) aL
//!                                                 CB  = η bL + (1−η) bU
//! ```
//!
//! after which `a` and `b` are replaced by their affine bounds according to the sign of
//! the frozen coefficient. When either interval is a single point the product is
//! handled exactly instead.

use crate::enclosure::{neg, pos, AffineForm};
use crate::interval::Interval;

/// Frozen scalar coefficients of one product term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McCormickCoeffs {
    /// Multiplies `b` in the lower bound.
    pub ca_lower: f64,
    /// Multiplies `b` in the upper bound.
    pub ca_upper: f64,
    /// Multiplies `a` in the lower bound.
    pub cb_lower: f64,
    /// Multiplies `a` in the upper bound.
    pub cb_upper: f64,
    pub const_lower: f64,
    pub const_upper: f64,
}

impl McCormickCoeffs {
    pub fn new(a: Interval, b: Interval, eta: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&eta));
        if a.lo == a.hi {
            return McCormickCoeffs {
                ca_lower: a.lo,
                ca_upper: a.lo,
                cb_lower: 0.0,
                cb_upper: 0.0,
                const_lower: 0.0,
                const_upper: 0.0,
            };
        }
        if b.lo == b.hi {
            return McCormickCoeffs {
                ca_lower: 0.0,
                ca_upper: 0.0,
                cb_lower: b.lo,
                cb_upper: b.lo,
                const_lower: 0.0,
                const_upper: 0.0,
            };
        }
        let r = 1.0 - eta;
        let cb = eta * b.lo + r * b.hi;
        McCormickCoeffs {
            ca_lower: eta * a.lo + r * a.hi,
            ca_upper: eta * a.hi + r * a.lo,
            cb_lower: cb,
            cb_upper: cb,
            const_lower: eta * a.lo * b.lo + r * a.hi * b.hi,
            const_upper: eta * a.hi * b.lo + r * a.lo * b.hi,
        }
    }
}

/// One factor of a product: affine bounds plus an interval over the region.
#[derive(Clone, Copy, Debug)]
pub struct Factor<'a> {
    pub lower: &'a AffineForm,
    pub upper: &'a AffineForm,
    pub range: Interval,
}

impl<'a> Factor<'a> {
    pub fn new(lower: &'a AffineForm, upper: &'a AffineForm, range: Interval) -> Self {
        Factor { lower, upper, range }
    }

    /// `c·factor` bounded from below.
    fn scaled_lower(&self, c: f64, out: &mut AffineForm) {
        out.add_scaled(pos(c), self.lower);
        out.add_scaled(neg(c), self.upper);
    }

    /// `c·factor` bounded from above.
    fn scaled_upper(&self, c: f64, out: &mut AffineForm) {
        out.add_scaled(pos(c), self.upper);
        out.add_scaled(neg(c), self.lower);
    }
}

fn accumulate(a: &Factor<'_>, b: &Factor<'_>, eta: f64, lower: &mut AffineForm, upper: &mut AffineForm) {
    let c = McCormickCoeffs::new(a.range, b.range, eta);
    b.scaled_lower(c.ca_lower, lower);
    a.scaled_lower(c.cb_lower, lower);
    lower.offset -= c.const_lower;
    b.scaled_upper(c.ca_upper, upper);
    a.scaled_upper(c.cb_upper, upper);
    upper.offset -= c.const_upper;
}

/// Affine lower and upper bounds on `a·b`.
pub fn mccormick_product(a: &Factor<'_>, b: &Factor<'_>, eta: f64) -> (AffineForm, AffineForm) {
    mccormick_product_sum(std::slice::from_ref(&(*a, *b)), eta)
}

/// Affine lower and upper bounds on `Σ_p a_p·b_p`, accumulated in order of `p`.
pub fn mccormick_product_sum(terms: &[(Factor<'_>, Factor<'_>)], eta: f64) -> (AffineForm, AffineForm) {
    let dim = terms.first().map_or(0, |(a, _)| a.lower.dim());
    let mut lower = AffineForm::zeros(dim);
    let mut upper = AffineForm::zeros(dim);
    for (a, b) in terms {
        accumulate(a, b, eta, &mut lower, &mut upper);
    }
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coord(dim: usize, k: usize) -> AffineForm {
        let mut f = AffineForm::zeros(dim);
        f.coeffs[k] = 1.0;
        f
    }

    fn check_grid(a: Interval, b: Interval, eta: f64) {
        let fa = coord(2, 0);
        let fb = coord(2, 1);
        let (lo, hi) = mccormick_product(&Factor::new(&fa, &fa, a), &Factor::new(&fb, &fb, b), eta);
        for i in 0..=200 {
            for j in 0..=200 {
                let x = a.lo + a.width() * i as f64 / 200.0;
                let y = b.lo + b.width() * j as f64 / 200.0;
                assert!(lo.eval(&[x, y]) <= x * y + 1e-12);
                assert!(x * y <= hi.eval(&[x, y]) + 1e-12);
            }
        }
    }

    #[test]
    fn scalar_box_lower_at_center() {
        let a = Interval::new(1.0, 2.0);
        let b = Interval::new(-1.0, 1.0);
        let fa = coord(2, 0);
        let fb = coord(2, 1);
        let (lo, _) = mccormick_product(&Factor::new(&fa, &fa, a), &Factor::new(&fb, &fb, b), 0.5);
        assert!(lo.eval(&[1.5, 0.0]) <= 0.0);
        check_grid(a, b, 0.5);
    }

    #[test]
    fn extreme_eta_values_are_each_valid() {
        for eta in [0.0, 1.0] {
            check_grid(Interval::new(-0.5, 2.0), Interval::new(-3.0, -1.0), eta);
        }
    }

    #[test]
    fn constant_factor_is_exact() {
        let c = 1.5;
        let fa = AffineForm::constant(1, c);
        let bl = AffineForm::new(vec![1.0], -0.25);
        let bu = AffineForm::new(vec![1.0], 0.25);
        let (lo, hi) = mccormick_product(
            &Factor::new(&fa, &fa, Interval::point(c)),
            &Factor::new(&bl, &bu, Interval::new(-1.0, 1.0)),
            0.5,
        );
        assert_eq!(lo, bl.scaled(c));
        assert_eq!(hi, bu.scaled(c));
    }

    #[test]
    fn empty_sum_is_zero() {
        let (lo, hi) = mccormick_product_sum(&[], 0.5);
        assert_eq!(lo.offset, 0.0);
        assert_eq!(hi.offset, 0.0);
    }
}

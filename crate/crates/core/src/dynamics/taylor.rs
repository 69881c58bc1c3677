//! First-order Taylor models over simplices with Bernstein-bounded remainders.

use super::dual::Dual2;
use crate::enclosure::{AffineEnclosure, AffineForm, AffineTensor};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::mesh::Simplex;

/// Range of the degree-2 Bernstein coefficients of `L1·L2` over a simplex, given the
/// vertex values of the two affine factors.
pub fn bernstein_product_range(a: &[f64], b: &[f64]) -> (f64, f64) {
    debug_assert_eq!(a.len(), b.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..a.len() {
        for l in k..a.len() {
            let coef = if k == l {
                a[k] * b[k]
            } else {
                0.5 * (a[k] * b[l] + a[l] * b[k])
            };
            lo = lo.min(coef);
            hi = hi.max(coef);
        }
    }
    (lo, hi)
}

/// Bound `½·L(x)²·M` over the simplex, `M ∈ [m_min, m_max]`, from the Bernstein
/// coefficients of `L²`.
pub fn bernstein_remainder(linear: &AffineForm, hessian: Interval, simplex: &Simplex) -> Result<(f64, f64)> {
    if simplex.volume() <= 0.0 {
        return Err(Error::DegenerateSimplex { volume: simplex.volume() });
    }
    if !hessian.is_finite() {
        return Err(Error::HessianUnavailable(format!("non-finite bound {hessian}")));
    }
    let v = linear.vertex_values(simplex)?;
    let (bmin, bmax) = bernstein_product_range(&v, &v);
    let r = Interval::new(bmin, bmax) * hessian * 0.5;
    Ok((r.lo, r.hi))
}

/// `entry(x) ∈ affine(x) + [remainder_lo, remainder_hi]` for every `x` in the simplex.
#[derive(Clone, Debug)]
pub struct TaylorEnclosure {
    /// Row-major over `(rows, cols)`.
    pub affine: Vec<AffineForm>,
    pub remainder_lo: Vec<f64>,
    pub remainder_hi: Vec<f64>,
    pub expansion_point: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl TaylorEnclosure {
    pub(super) fn build(
        entries: &[Dual2<f64>],
        hessians: &[Vec<Interval>],
        c: &[f64],
        simplex: &Simplex,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        let n = c.len();
        // d_i = x_i − c_i at the vertices
        let d: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..=n).map(|v| simplex.vertex(v)[i] - c[i]).collect())
            .collect();
        let mut q = vec![Interval::point(0.0); n * n];
        for i in 0..n {
            for j in i..n {
                let (lo, hi) = bernstein_product_range(&d[i], &d[j]);
                let lo = if i == j { lo.max(0.0) } else { lo };
                q[i * n + j] = Interval::new(lo, hi);
                q[j * n + i] = q[i * n + j];
            }
        }
        let mut affine = Vec::with_capacity(entries.len());
        let mut remainder_lo = Vec::with_capacity(entries.len());
        let mut remainder_hi = Vec::with_capacity(entries.len());
        for (e, h) in entries.iter().zip(hessians) {
            let grad = e.gradient(n);
            let offset = e.value - grad.iter().zip(c).map(|(g, ci)| g * ci).sum::<f64>();
            affine.push(AffineForm::new(grad, offset));
            let mut r = Interval::point(0.0);
            for (hij, qij) in h.iter().zip(&q) {
                if hij.lo != 0.0 || hij.hi != 0.0 {
                    r = r + *hij * *qij;
                }
            }
            let r = r * 0.5;
            remainder_lo.push(r.lo);
            remainder_hi.push(r.hi);
        }
        Ok(TaylorEnclosure {
            affine,
            remainder_lo,
            remainder_hi,
            expansion_point: c.to_vec(),
            rows,
            cols,
        })
    }

    pub fn len(&self) -> usize {
        self.affine.len()
    }

    pub fn is_empty(&self) -> bool {
        self.affine.is_empty()
    }

    pub fn lower(&self, k: usize) -> AffineForm {
        self.affine[k].shifted(self.remainder_lo[k])
    }

    pub fn upper(&self, k: usize) -> AffineForm {
        self.affine[k].shifted(self.remainder_hi[k])
    }

    pub fn contains(&self, x: &[f64], values: &[f64], slack: f64) -> bool {
        (0..self.len()).all(|k| {
            let a = self.affine[k].eval(x);
            a + self.remainder_lo[k] - slack <= values[k] && values[k] <= a + self.remainder_hi[k] + slack
        })
    }

    pub fn max_remainder_width(&self) -> f64 {
        self.remainder_lo
            .iter()
            .zip(&self.remainder_hi)
            .map(|(l, h)| h - l)
            .fold(0.0, f64::max)
    }

    /// As an `(rows × cols)` affine enclosure.
    pub fn to_enclosure(&self) -> AffineEnclosure {
        let n = self.expansion_point.len();
        let mut lo = AffineTensor::zeros(self.rows, self.cols, n);
        let mut hi = AffineTensor::zeros(self.rows, self.cols, n);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let k = r * self.cols + c;
                lo.set_entry(r, c, &self.lower(k));
                hi.set_entry(r, c, &self.upper(k));
            }
        }
        AffineEnclosure {
            lower: lo,
            upper: hi,
            region_id: None,
        }
    }
}

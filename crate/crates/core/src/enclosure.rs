//! Affine forms, tensor-valued affine enclosures and interval matrices.
//!
//! Every linear bound in the crate has the shape `A x + a` for some reference variable
//! `x`. Matrix-valued quantities (a Jacobian, the drift vector, a layer's
//! pre-activations) are enclosed by an [`AffineEnclosure`]: a lower and an upper
//! [`AffineTensor`], each a rank-3 coefficient tensor indexed by
//! `(row, col, variable)` plus a matrix offset. Vectors use a single column.

use ndarray::{Array2, Array3, ArrayView1, Zip};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::mesh::Simplex;

/// `max(v, 0)`.
#[inline]
pub fn pos(v: f64) -> f64 {
    v.max(0.0)
}

/// `min(v, 0)`.
#[inline]
pub fn neg(v: f64) -> f64 {
    v.min(0.0)
}

/// Split a matrix into its positive and negative parts, `m = m⁺ + m⁻` exactly.
pub fn pos_neg_split(m: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    (m.mapv(pos), m.mapv(neg))
}

/// A scalar affine function `coeffs · x + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForm {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl AffineForm {
    pub fn new(coeffs: Vec<f64>, offset: f64) -> Self {
        AffineForm { coeffs, offset }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        AffineForm {
            coeffs: vec![0.0; dim],
            offset: value,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.coeffs.len());
        self.coeffs
            .iter()
            .zip(x)
            .fold(self.offset, |acc, (c, xi)| acc + c * xi)
    }

    pub fn eval_view(&self, x: ArrayView1<'_, f64>) -> f64 {
        debug_assert_eq!(x.len(), self.coeffs.len());
        self.coeffs
            .iter()
            .zip(x.iter())
            .fold(self.offset, |acc, (c, xi)| acc + c * xi)
    }

    pub fn is_finite(&self) -> bool {
        self.offset.is_finite() && self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn scaled(&self, s: f64) -> AffineForm {
        AffineForm {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            offset: self.offset * s,
        }
    }

    pub fn shifted(&self, delta: f64) -> AffineForm {
        AffineForm {
            coeffs: self.coeffs.clone(),
            offset: self.offset + delta,
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, s: f64, other: &AffineForm) {
        debug_assert_eq!(self.dim(), other.dim());
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += s * o;
        }
        self.offset += s * other.offset;
    }

    pub fn plus(&self, other: &AffineForm) -> AffineForm {
        let mut out = self.clone();
        out.add_scaled(1.0, other);
        out
    }

    /// Values at the vertices of `simplex`.
    pub fn vertex_values(&self, simplex: &Simplex) -> Result<Vec<f64>> {
        if self.dim() != simplex.dim() {
            return Err(Error::dims("affine form over simplex", simplex.dim(), self.dim()));
        }
        Ok(simplex
            .vertices()
            .rows()
            .into_iter()
            .map(|v| self.eval_view(v))
            .collect())
    }
}

/// Minimum and maximum of an affine form over a simplex, attained at its vertices.
pub fn eval_affine_extrema(form: &AffineForm, simplex: &Simplex) -> Result<(f64, f64)> {
    let values = form.vertex_values(simplex)?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

/// Matrix of affine forms sharing one reference variable.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineTensor {
    /// `(row, col, variable)`.
    pub coeffs: Array3<f64>,
    /// `(row, col)`.
    pub offset: Array2<f64>,
}

impl AffineTensor {
    pub fn new(coeffs: Array3<f64>, offset: Array2<f64>) -> Result<Self> {
        let (r, c, _) = coeffs.dim();
        if offset.dim() != (r, c) {
            return Err(Error::dims("affine tensor offset rows", r, offset.nrows()));
        }
        Ok(AffineTensor { coeffs, offset })
    }

    pub fn zeros(rows: usize, cols: usize, dim: usize) -> Self {
        AffineTensor {
            coeffs: Array3::zeros((rows, cols, dim)),
            offset: Array2::zeros((rows, cols)),
        }
    }

    /// Constant tensor equal to `value` everywhere.
    pub fn constant(value: Array2<f64>, dim: usize) -> Self {
        let (r, c) = value.dim();
        AffineTensor {
            coeffs: Array3::zeros((r, c, dim)),
            offset: value,
        }
    }

    /// Column of forms.
    pub fn from_column(forms: &[AffineForm]) -> Self {
        let dim = forms.first().map_or(0, AffineForm::dim);
        let mut t = AffineTensor::zeros(forms.len(), 1, dim);
        for (r, f) in forms.iter().enumerate() {
            t.set_entry(r, 0, f);
        }
        t
    }

    pub fn shape(&self) -> (usize, usize) {
        self.offset.dim()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim().2
    }

    pub fn entry(&self, row: usize, col: usize) -> AffineForm {
        AffineForm {
            coeffs: self
                .coeffs
                .slice(ndarray::s![row, col, ..])
                .iter()
                .copied()
                .collect(),
            offset: self.offset[[row, col]],
        }
    }

    pub fn set_entry(&mut self, row: usize, col: usize, form: &AffineForm) {
        for (k, c) in form.coeffs.iter().enumerate() {
            self.coeffs[[row, col, k]] = *c;
        }
        self.offset[[row, col]] = form.offset;
    }

    pub fn eval(&self, x: &[f64]) -> Array2<f64> {
        self.eval_view(ArrayView1::from(x))
    }

    pub fn eval_view(&self, x: ArrayView1<'_, f64>) -> Array2<f64> {
        let mut out = self.offset.clone();
        let (r, c, d) = self.coeffs.dim();
        debug_assert_eq!(d, x.len());
        for i in 0..r {
            for j in 0..c {
                let mut acc = out[[i, j]];
                for k in 0..d {
                    acc += self.coeffs[[i, j, k]] * x[k];
                }
                out[[i, j]] = acc;
            }
        }
        out
    }

    /// Elementwise minimum over the vertices of `simplex`.
    pub fn min_over(&self, simplex: &Simplex) -> Array2<f64> {
        self.fold_vertices(simplex, f64::INFINITY, f64::min)
    }

    /// Elementwise maximum over the vertices of `simplex`.
    pub fn max_over(&self, simplex: &Simplex) -> Array2<f64> {
        self.fold_vertices(simplex, f64::NEG_INFINITY, f64::max)
    }

    fn fold_vertices(&self, simplex: &Simplex, init: f64, f: fn(f64, f64) -> f64) -> Array2<f64> {
        let mut acc = Array2::from_elem(self.shape(), init);
        for v in simplex.vertices().rows() {
            let val = self.eval_view(v);
            Zip::from(&mut acc).and(&val).for_each(|a, &b| *a = f(*a, b));
        }
        acc
    }

    pub fn shifted(&self, delta: f64) -> AffineTensor {
        AffineTensor {
            coeffs: self.coeffs.clone(),
            offset: self.offset.mapv(|v| v + delta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.is_finite()) && self.offset.iter().all(|v| v.is_finite())
    }
}

/// A pair of affine tensors bounding a matrix-valued quantity over a region.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineEnclosure {
    pub lower: AffineTensor,
    pub upper: AffineTensor,
    /// Simplex the bounds were computed on, when known.
    pub region_id: Option<u64>,
}

impl AffineEnclosure {
    pub fn new(lower: AffineTensor, upper: AffineTensor) -> Result<Self> {
        if lower.coeffs.dim() != upper.coeffs.dim() {
            return Err(Error::dims(
                "enclosure lower/upper shape",
                lower.coeffs.len(),
                upper.coeffs.len(),
            ));
        }
        Ok(AffineEnclosure {
            lower,
            upper,
            region_id: None,
        })
    }

    pub fn exact(t: AffineTensor) -> Self {
        AffineEnclosure {
            lower: t.clone(),
            upper: t,
            region_id: None,
        }
    }

    pub fn with_region(mut self, id: u64) -> Self {
        self.region_id = Some(id);
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lower.shape()
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn entry(&self, row: usize, col: usize) -> (AffineForm, AffineForm) {
        (self.lower.entry(row, col), self.upper.entry(row, col))
    }

    /// Interval hull over a simplex: vertex minimum of the lower tensor and vertex
    /// maximum of the upper tensor.
    pub fn interval_over(&self, simplex: &Simplex) -> IntervalMatrix {
        IntervalMatrix {
            lo: self.lower.min_over(simplex),
            hi: self.upper.max_over(simplex),
        }
    }

    /// Whether `value` lies between the bounds at `x`, up to `slack`.
    pub fn contains(&self, x: &[f64], value: &Array2<f64>, slack: f64) -> bool {
        let lo = self.lower.eval(x);
        let hi = self.upper.eval(x);
        Zip::from(&lo)
            .and(&hi)
            .and(value)
            .all(|&l, &h, &v| l - slack <= v && v <= h + slack)
    }

    /// Largest `upper(x) - lower(x)` over all entries.
    pub fn max_gap_at(&self, x: &[f64]) -> f64 {
        let lo = self.lower.eval(x);
        let hi = self.upper.eval(x);
        Zip::from(&lo)
            .and(&hi)
            .fold(f64::NEG_INFINITY, |m, &l, &h| m.max(h - l))
    }

    /// Widen by `eps` on both sides.
    pub fn widened(&self, eps: f64) -> AffineEnclosure {
        if eps == 0.0 {
            return self.clone();
        }
        AffineEnclosure {
            lower: self.lower.shifted(-eps),
            upper: self.upper.shifted(eps),
            region_id: self.region_id,
        }
    }
}

/// Elementwise interval bounds on a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalMatrix {
    pub lo: Array2<f64>,
    pub hi: Array2<f64>,
}

impl IntervalMatrix {
    pub fn new(lo: Array2<f64>, hi: Array2<f64>) -> Result<Self> {
        if lo.dim() != hi.dim() {
            return Err(Error::dims("interval matrix shape", lo.len(), hi.len()));
        }
        if let Some((&l, &h)) = lo.iter().zip(hi.iter()).find(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidInterval { lower: l, upper: h });
        }
        Ok(IntervalMatrix { lo, hi })
    }

    pub fn point(m: Array2<f64>) -> Self {
        IntervalMatrix { lo: m.clone(), hi: m }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.lo.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> Interval {
        Interval::new(self.lo[[row, col]], self.hi[[row, col]])
    }

    pub fn contains(&self, m: &Array2<f64>, slack: f64) -> bool {
        Zip::from(&self.lo)
            .and(&self.hi)
            .and(m)
            .all(|&l, &h, &v| l - slack <= v && v <= h + slack)
    }

    /// Elementwise intersection of two intervals known to contain the same quantity.
    pub fn intersect(&self, other: &IntervalMatrix) -> IntervalMatrix {
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        Zip::from(&mut lo)
            .and(&mut hi)
            .and(&other.lo)
            .and(&other.hi)
            .for_each(|l, h, &ol, &oh| {
                let nl = l.max(ol);
                let nh = h.min(oh);
                // disjoint only through rounding; keep the first operand
                if nl <= nh {
                    *l = nl;
                    *h = nh;
                }
            });
        IntervalMatrix { lo, hi }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn split_mixed_signs() {
        let (p, n) = pos_neg_split(&array![[1.0, -2.0], [0.0, 3.0]]);
        assert_eq!(p, array![[1.0, 0.0], [0.0, 3.0]]);
        assert_eq!(n, array![[0.0, -2.0], [0.0, 0.0]]);
    }

    #[test]
    fn split_zero_and_negative() {
        let z = Array2::<f64>::zeros((2, 3));
        let (p, n) = pos_neg_split(&z);
        assert_eq!(p, z);
        assert_eq!(n, z);
        let (p, n) = pos_neg_split(&array![[-1.0]]);
        assert_eq!(p, array![[0.0]]);
        assert_eq!(n, array![[-1.0]]);
    }

    #[test]
    fn extrema_on_segment_and_triangle() {
        let seg = Simplex::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let f = AffineForm::new(vec![2.0], 1.0);
        assert_eq!(eval_affine_extrema(&f, &seg).unwrap(), (1.0, 3.0));

        let tri = Simplex::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = AffineForm::constant(2, -4.5);
        assert_eq!(eval_affine_extrema(&c, &tri).unwrap(), (-4.5, -4.5));
        let s = AffineForm::new(vec![1.0, 1.0], 0.0);
        assert_eq!(eval_affine_extrema(&s, &tri).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn extrema_dimension_mismatch() {
        let tri = Simplex::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let f = AffineForm::new(vec![1.0], 0.0);
        assert!(matches!(
            eval_affine_extrema(&f, &tri),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn interval_matrix_rejects_inverted_entries() {
        assert!(IntervalMatrix::new(array![[1.0]], array![[0.0]]).is_err());
        let m = IntervalMatrix::new(array![[0.0, -1.0]], array![[1.0, 1.0]]).unwrap();
        let other = IntervalMatrix::new(array![[0.5, -2.0]], array![[2.0, 0.0]]).unwrap();
        let i = m.intersect(&other);
        assert_eq!(i.lo, array![[0.5, -1.0]]);
        assert_eq!(i.hi, array![[1.0, 0.0]]);
    }
}

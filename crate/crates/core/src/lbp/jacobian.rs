//! Affine enclosures of `∂ℬ/∂x` by recursive McCormick relaxation of the products of
//! layer Jacobians.
//!
//! Layer `t` has Jacobian `J_t(y_t) = diag(σ_t′(y_t)) W_t`. The running product
//! `P_t = J_{L−1} ⋯ J_t` is kept as an enclosure affine in `y_t`; the step to `t−1`
//! re-expresses `P_t` in `y_{t−1}` through the value relaxation of layer `t−1`, then
//! bounds `P_t · J_{t−1}` term by term with McCormick envelopes. The final product is
//! moved to `x` by the exact substitution `y_0 = W_0 x + b_0`.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Zip};

use crate::activation::LinearRelaxation;
use crate::enclosure::{neg, pos, pos_neg_split, AffineEnclosure, AffineTensor, IntervalMatrix};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::lbp::value::LayerBounds;
use crate::mccormick::McCormickCoeffs;
use crate::mesh::Simplex;
use crate::network::{Activation, Network};

/// Variable an enclosure is affine in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reference {
    Input,
    /// Pre-activation `y_t` of layer `t`.
    Preactivation(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianEnclosure {
    pub bounds: AffineEnclosure,
    pub reference: Reference,
}

/// Entry `(p, k)` of `J_t` bounded by `slope·y_{t,p} + offset`.
struct SparseJacobian {
    lo_slope: Array2<f64>,
    lo_off: Array2<f64>,
    hi_slope: Array2<f64>,
    hi_off: Array2<f64>,
}

fn sparse_layer_jacobian(deriv: &[LinearRelaxation], weight: &Array2<f64>) -> SparseJacobian {
    let (out, inp) = weight.dim();
    let mut sj = SparseJacobian {
        lo_slope: Array2::zeros((out, inp)),
        lo_off: Array2::zeros((out, inp)),
        hi_slope: Array2::zeros((out, inp)),
        hi_off: Array2::zeros((out, inp)),
    };
    for p in 0..out {
        let r = &deriv[p];
        for k in 0..inp {
            let w = weight[[p, k]];
            let (wp, wn) = (pos(w), neg(w));
            sj.lo_slope[[p, k]] = r.lower_slope * wp + r.upper_slope * wn;
            sj.lo_off[[p, k]] = r.lower_offset * wp + r.upper_offset * wn;
            sj.hi_slope[[p, k]] = r.upper_slope * wp + r.lower_slope * wn;
            sj.hi_off[[p, k]] = r.upper_offset * wp + r.lower_offset * wn;
        }
    }
    sj
}

impl SparseJacobian {
    fn dense(&self) -> AffineEnclosure {
        let (out, inp) = self.lo_slope.dim();
        let mut lower = AffineTensor::zeros(out, inp, out);
        let mut upper = AffineTensor::zeros(out, inp, out);
        for p in 0..out {
            for k in 0..inp {
                lower.coeffs[[p, k, p]] = self.lo_slope[[p, k]];
                upper.coeffs[[p, k, p]] = self.hi_slope[[p, k]];
            }
        }
        lower.offset.assign(&self.lo_off);
        upper.offset.assign(&self.hi_off);
        AffineEnclosure {
            lower,
            upper,
            region_id: None,
        }
    }
}

/// Affine bounds on `J_t` in `y_t` from the derivative relaxation of layer `t`.
pub fn layer_jacobian_relaxation(
    layer_index: usize,
    deriv_relax: &[LinearRelaxation],
    weight: &Array2<f64>,
) -> Result<JacobianEnclosure> {
    if deriv_relax.len() != weight.nrows() {
        return Err(Error::dims("derivative relaxations per neuron", weight.nrows(), deriv_relax.len()));
    }
    Ok(JacobianEnclosure {
        bounds: sparse_layer_jacobian(deriv_relax, weight).dense(),
        reference: Reference::Preactivation(layer_index),
    })
}

fn as_matrix(a: &Array3<f64>) -> ArrayView2<'_, f64> {
    let (r, c, d) = a.dim();
    a.view()
        .into_shape_with_order((r * c, d))
        .expect("tensors are built in standard layout")
}

fn to_tensor(m: Array2<f64>, rows: usize, cols: usize) -> Array3<f64> {
    let d = m.ncols();
    m.to_shape((rows, cols, d))
        .expect("matching element count")
        .into_owned()
}

/// Substitute the two-sided affine bounds `[K̲ v + k̲, K̄ v + k̄]` of the reference
/// variable into a lower/upper tensor pair.
fn substitute(
    enc: &AffineEnclosure,
    k_lo: &Array2<f64>,
    kb_lo: &Array1<f64>,
    k_hi: &Array2<f64>,
    kb_hi: &Array1<f64>,
) -> AffineEnclosure {
    let (rows, cols) = enc.shape();
    let side = |t: &AffineTensor, same: (&Array2<f64>, &Array1<f64>), other: (&Array2<f64>, &Array1<f64>)| {
        let c = as_matrix(&t.coeffs);
        let cp = c.mapv(pos);
        let cn = c.mapv(neg);
        let coeffs = cp.dot(same.0) + cn.dot(other.0);
        let off = cp.dot(same.1) + cn.dot(other.1);
        let offset = &t.offset + &off.into_shape_with_order((rows, cols)).expect("row count");
        AffineTensor {
            coeffs: to_tensor(coeffs, rows, cols),
            offset,
        }
    };
    AffineEnclosure {
        lower: side(&enc.lower, (k_lo, kb_lo), (k_hi, kb_hi)),
        upper: side(&enc.upper, (k_hi, kb_hi), (k_lo, kb_lo)),
        region_id: enc.region_id,
    }
}

/// Re-express bounds on `J_{t+1}` (or a product ending in it), affine in `y_{t+1}`,
/// as bounds affine in `y_t` using `y_{t+1} = W_{t+1} σ_t(y_t) + b_{t+1}`.
pub fn next_layer_jacobian_in_prev_coords(
    enc: &JacobianEnclosure,
    value_relax: &[LinearRelaxation],
    weight: &Array2<f64>,
    bias: &Array1<f64>,
) -> Result<JacobianEnclosure> {
    let t = match enc.reference {
        Reference::Preactivation(t) if t > 0 => t - 1,
        other => {
            return Err(Error::InvalidParameter(format!(
                "cannot move an enclosure referenced to {other:?} back one layer"
            )))
        }
    };
    if enc.bounds.dim() != weight.nrows() || value_relax.len() != weight.ncols() {
        return Err(Error::dims("layer coordinate change", weight.nrows(), enc.bounds.dim()));
    }
    let (k_lo, kb_lo, k_hi, kb_hi) = relaxed_affine_layer(value_relax, weight, bias);
    Ok(JacobianEnclosure {
        bounds: substitute(&enc.bounds, &k_lo, &kb_lo, &k_hi, &kb_hi),
        reference: Reference::Preactivation(t),
    })
}

/// `K̲ = W⁺diag(G̲) + W⁻diag(Ḡ)`, `k̲ = b + W⁺g̲ + W⁻ḡ` and the mirrored upper pair.
fn relaxed_affine_layer(
    relax: &[LinearRelaxation],
    weight: &Array2<f64>,
    bias: &Array1<f64>,
) -> (Array2<f64>, Array1<f64>, Array2<f64>, Array1<f64>) {
    let (wp, wn) = pos_neg_split(weight);
    let gl = Array1::from_iter(relax.iter().map(|r| r.lower_slope));
    let gu = Array1::from_iter(relax.iter().map(|r| r.upper_slope));
    let ol = Array1::from_iter(relax.iter().map(|r| r.lower_offset));
    let ou = Array1::from_iter(relax.iter().map(|r| r.upper_offset));
    let k_lo = &wp * &gl + &wn * &gu;
    let k_hi = &wp * &gu + &wn * &gl;
    let kb_lo = bias + &wp.dot(&ol) + &wn.dot(&ou);
    let kb_hi = bias + &wp.dot(&ou) + &wn.dot(&ol);
    (k_lo, kb_lo, k_hi, kb_hi)
}

/// Compose an enclosure affine in `y_t` with `y_t`'s x-affine bounds.
fn to_input(enc: &AffineEnclosure, preact: &AffineEnclosure) -> AffineEnclosure {
    let (k_lo, kb_lo) = column_parts(&preact.lower);
    let (k_hi, kb_hi) = column_parts(&preact.upper);
    substitute(enc, &k_lo, &kb_lo, &k_hi, &kb_hi)
}

fn column_parts(t: &AffineTensor) -> (Array2<f64>, Array1<f64>) {
    (
        t.coeffs.slice(s![.., 0, ..]).to_owned(),
        t.offset.column(0).to_owned(),
    )
}

/// Interval bounds of every entry over `simplex`.
///
/// Enclosures referenced to a pre-activation are first composed with that layer's
/// x-affine bounds from `layers`.
pub fn jacobian_intervals(enc: &JacobianEnclosure, simplex: &Simplex, layers: &[LayerBounds]) -> IntervalMatrix {
    let on_x = match enc.reference {
        Reference::Input => enc.bounds.clone(),
        Reference::Preactivation(t) => to_input(&enc.bounds, &layers[t].preact),
    };
    let mut iv = on_x.interval_over(simplex);
    Zip::from(&mut iv.hi).and(&iv.lo).for_each(|h, &l| *h = h.max(l));
    iv
}

/// Elementwise interval of `σ′(y_p)·W_{pk}` from the exact derivative range.
fn layer_jacobian_interval(act: Activation, bounds: &LayerBounds, weight: &Array2<f64>) -> IntervalMatrix {
    let (out, inp) = weight.dim();
    let mut lo = Array2::zeros((out, inp));
    let mut hi = Array2::zeros((out, inp));
    for p in 0..out {
        let d = act.derivative_range(bounds.lo(p), bounds.hi(p));
        for k in 0..inp {
            let w = weight[[p, k]];
            let (a, b) = (d.lo * w, d.hi * w);
            lo[[p, k]] = a.min(b);
            hi[[p, k]] = a.max(b);
        }
    }
    IntervalMatrix { lo, hi }
}

/// Bound `P_t = A · J_t` where `A` is affine in `y_t` and `J_t` is the sparse layer
/// relaxation, accumulating over `p` in increasing order.
fn mccormick_step(
    a: &AffineEnclosure,
    a_iv: &IntervalMatrix,
    b: &SparseJacobian,
    b_iv: &IntervalMatrix,
    eta: f64,
) -> AffineEnclosure {
    let (n_out, width) = a.shape();
    let inp = b.lo_slope.ncols();
    let dim = a.dim();
    debug_assert_eq!(dim, width);
    let mut lower = AffineTensor::zeros(n_out, inp, dim);
    let mut upper = AffineTensor::zeros(n_out, inp, dim);
    for j in 0..n_out {
        for k in 0..inp {
            let mut off_lo = 0.0;
            let mut off_hi = 0.0;
            for p in 0..width {
                let c = McCormickCoeffs::new(
                    Interval::new(a_iv.lo[[j, p]], a_iv.hi[[j, p]]),
                    Interval::new(b_iv.lo[[p, k]], b_iv.hi[[p, k]]),
                    eta,
                );
                // CA·J_t term touches only y_{t,p}
                let (sl, ol) = if c.ca_lower >= 0.0 {
                    (b.lo_slope[[p, k]], b.lo_off[[p, k]])
                } else {
                    (b.hi_slope[[p, k]], b.hi_off[[p, k]])
                };
                lower.coeffs[[j, k, p]] += c.ca_lower * sl;
                off_lo += c.ca_lower * ol;
                let (su, ou) = if c.ca_upper >= 0.0 {
                    (b.hi_slope[[p, k]], b.hi_off[[p, k]])
                } else {
                    (b.lo_slope[[p, k]], b.lo_off[[p, k]])
                };
                upper.coeffs[[j, k, p]] += c.ca_upper * su;
                off_hi += c.ca_upper * ou;

                // CB·A term is dense in y_t
                if c.cb_lower != 0.0 {
                    let src = if c.cb_lower >= 0.0 { &a.lower } else { &a.upper };
                    add_row(&mut lower.coeffs, j, k, &src.coeffs, j, p, c.cb_lower);
                    off_lo += c.cb_lower * src.offset[[j, p]];
                }
                if c.cb_upper != 0.0 {
                    let src = if c.cb_upper >= 0.0 { &a.upper } else { &a.lower };
                    add_row(&mut upper.coeffs, j, k, &src.coeffs, j, p, c.cb_upper);
                    off_hi += c.cb_upper * src.offset[[j, p]];
                }
                off_lo -= c.const_lower;
                off_hi -= c.const_upper;
            }
            lower.offset[[j, k]] = off_lo;
            upper.offset[[j, k]] = off_hi;
        }
    }
    AffineEnclosure {
        lower,
        upper,
        region_id: a.region_id,
    }
}

fn add_row(dst: &mut Array3<f64>, j: usize, k: usize, src: &Array3<f64>, sj: usize, sp: usize, scale: f64) {
    let mut d = dst.slice_mut(s![j, k, ..]);
    let s = src.slice(s![sj, sp, ..]);
    Zip::from(&mut d).and(&s).for_each(|d, &v| *d += scale * v);
}

/// Enclose `∂out/∂x` over `simplex`, reusing the relaxations in `layers`.
///
/// The result is an `(out × n)` enclosure affine in `x` (reference [`Reference::Input`]).
pub fn propagate_jacobian_bounds(
    net: &Network,
    layers: &[LayerBounds],
    simplex: &Simplex,
    eta: f64,
) -> Result<JacobianEnclosure> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta {eta} outside [0, 1]")));
    }
    let net_layers = net.layers();
    if layers.len() != net_layers.len() {
        return Err(Error::dims("layer bounds", net_layers.len(), layers.len()));
    }
    if net.input_dim() != simplex.dim() {
        return Err(Error::dims("network input vs simplex", simplex.dim(), net.input_dim()));
    }
    let last = net_layers.len() - 1;
    let mut prod = sparse_layer_jacobian(&layers[last].deriv_relax, &net_layers[last].weight).dense();
    for t in (0..last).rev() {
        // prod bounds P_{t+1} in y_{t+1}
        let lt1 = &layers[t + 1];
        let iv_next = to_input(&prod, &lt1.preact).interval_over(simplex);
        let (k_lo, kb_lo, k_hi, kb_hi) =
            relaxed_affine_layer(&layers[t].value_relax, &net_layers[t + 1].weight, &net_layers[t + 1].bias);
        let a = substitute(&prod, &k_lo, &kb_lo, &k_hi, &kb_hi);
        let iv_here = to_input(&a, &layers[t].preact).interval_over(simplex);
        let a_iv = iv_next.intersect(&iv_here);
        let b = sparse_layer_jacobian(&layers[t].deriv_relax, &net_layers[t].weight);
        let b_iv = layer_jacobian_interval(net_layers[t].activation, &layers[t], &net_layers[t].weight);
        prod = mccormick_step(&a, &a_iv, &b, &b_iv, eta);
    }
    // y_0 = W_0 x + b_0 is exact
    let w0 = &net_layers[0].weight;
    let b0 = &net_layers[0].bias;
    let y0 = AffineTensor {
        coeffs: Array3::from_shape_fn((w0.nrows(), 1, w0.ncols()), |(i, _, k)| w0[[i, k]]),
        offset: b0.clone().insert_axis(ndarray::Axis(1)),
    };
    let exact = AffineEnclosure::exact(y0);
    let bounds = to_input(&prod, &exact).with_region(simplex.id);
    Ok(JacobianEnclosure {
        bounds,
        reference: Reference::Input,
    })
}

//! Value bounds: x-affine enclosures of each layer's pre-activations and the output.

use ndarray::{Array1, Array2, Array3};

use crate::activation::{relax_derivative, relax_value, LinearRelaxation};
use crate::enclosure::{AffineEnclosure, AffineTensor, IntervalMatrix};
use crate::error::{Error, Result};
use crate::mesh::Simplex;
use crate::network::{Activation, Network};

/// Bounds for one layer `t`, all valid on the simplex they were built on.
#[derive(Clone, Debug)]
pub struct LayerBounds {
    /// `y_t` as an `(out_t × 1)` enclosure affine in `x`.
    pub preact: AffineEnclosure,
    /// Per-neuron `[l, u]`, `(out_t × 1)`.
    pub interval: IntervalMatrix,
    pub value_relax: Vec<LinearRelaxation>,
    pub deriv_relax: Vec<LinearRelaxation>,
}

impl LayerBounds {
    pub fn width(&self) -> usize {
        self.value_relax.len()
    }

    pub fn lo(&self, neuron: usize) -> f64 {
        self.interval.lo[[neuron, 0]]
    }

    pub fn hi(&self, neuron: usize) -> f64 {
        self.interval.hi[[neuron, 0]]
    }
}

#[derive(Clone, Debug)]
pub struct ValueBounds {
    /// Network output, `(out × 1)`.
    pub output: AffineEnclosure,
    pub layers: Vec<LayerBounds>,
}

/// Enclose every pre-activation and the output of `net` over `simplex`.
pub fn propagate_value_bounds(net: &Network, simplex: &Simplex) -> Result<ValueBounds> {
    propagate_value_bounds_within(net, simplex, None)
}

/// As [`propagate_value_bounds`], additionally reusing the bounds of a simplex that
/// contains `simplex`.
///
/// Per neuron and side the tighter of the two affine bounds over `simplex` is kept, so
/// every interval is contained in the parent's.
pub fn propagate_value_bounds_within(net: &Network, simplex: &Simplex, parent: Option<&ValueBounds>) -> Result<ValueBounds> {
    if net.input_dim() != simplex.dim() {
        return Err(Error::dims("network input vs simplex", simplex.dim(), net.input_dim()));
    }
    if let Some(p) = parent {
        if p.layers.len() != net.layers().len() || p.output.dim() != simplex.dim() {
            return Err(Error::dims("parent bounds layers", net.layers().len(), p.layers.len()));
        }
    }
    let mut layers: Vec<LayerBounds> = Vec::with_capacity(net.layers().len());
    for t in 0..net.layers().len() {
        let (lam_lo, off_lo) = back_substitute(net, &layers, t, true);
        let (lam_hi, off_hi) = back_substitute(net, &layers, t, false);
        let mut lower = column_tensor(&lam_lo, &off_lo);
        let mut upper = column_tensor(&lam_hi, &off_hi);
        if let Some(p) = parent {
            let prev = &p.layers[t].preact;
            keep_tighter(&mut lower, &prev.lower, simplex, true);
            keep_tighter(&mut upper, &prev.upper, simplex, false);
        }
        let preact = AffineEnclosure::new(lower, upper)?.with_region(simplex.id);
        let interval = project(&preact, simplex);
        let act = net.layers()[t].activation;
        let mut value_relax = Vec::with_capacity(off_lo.len());
        let mut deriv_relax = Vec::with_capacity(off_lo.len());
        for p in 0..off_lo.len() {
            let (l, u) = (interval.lo[[p, 0]], interval.hi[[p, 0]]);
            value_relax.push(relax_value(act, l, u)?);
            deriv_relax.push(relax_derivative(act, l, u)?);
        }
        layers.push(LayerBounds {
            preact,
            interval,
            value_relax,
            deriv_relax,
        });
    }
    let output = layers.last().expect("at least one layer").preact.clone();
    Ok(ValueBounds { output, layers })
}

fn keep_tighter(own: &mut AffineTensor, other: &AffineTensor, simplex: &Simplex, lower: bool) {
    let (mine, theirs) = if lower {
        (own.min_over(simplex), other.min_over(simplex))
    } else {
        (own.max_over(simplex), other.max_over(simplex))
    };
    for p in 0..own.shape().0 {
        let better = if lower {
            theirs[[p, 0]] > mine[[p, 0]]
        } else {
            theirs[[p, 0]] < mine[[p, 0]]
        };
        if better {
            own.set_entry(p, 0, &other.entry(p, 0));
        }
    }
}

/// Per-layer pre-activation intervals by vertex projection.
pub fn preactivation_intervals(layers: &[LayerBounds], simplex: &Simplex) -> Vec<IntervalMatrix> {
    layers.iter().map(|l| project(&l.preact, simplex)).collect()
}

fn project(enc: &AffineEnclosure, simplex: &Simplex) -> IntervalMatrix {
    let mut iv = enc.interval_over(simplex);
    // lower ≤ upper holds pointwise; guard against rounding at coinciding bounds
    ndarray::Zip::from(&mut iv.hi).and(&iv.lo).for_each(|h, &l| {
        if *h < l {
            *h = l;
        }
    });
    iv
}

fn column_tensor(lam: &Array2<f64>, off: &Array1<f64>) -> AffineTensor {
    let (r, n) = lam.dim();
    let coeffs = Array3::from_shape_fn((r, 1, n), |(i, _, k)| lam[[i, k]]);
    let offset = off.clone().insert_axis(ndarray::Axis(1));
    AffineTensor { coeffs, offset }
}

/// Bound `y_t` by substituting relaxed layers `t−1, …, 0` back to `x`.
fn back_substitute(net: &Network, done: &[LayerBounds], t: usize, lower: bool) -> (Array2<f64>, Array1<f64>) {
    let layers = net.layers();
    let mut lam = layers[t].weight.clone();
    let mut off = layers[t].bias.clone();
    for k in (0..t).rev() {
        // lam multiplies z_k = σ_k(y_k)
        if layers[k].activation != Activation::Identity {
            let relax = &done[k].value_relax;
            for (mut row, o) in lam.rows_mut().into_iter().zip(off.iter_mut()) {
                for (c, v) in row.iter_mut().enumerate() {
                    let r = &relax[c];
                    let (slope, shift) = if (*v >= 0.0) == lower {
                        (r.lower_slope, r.lower_offset)
                    } else {
                        (r.upper_slope, r.upper_offset)
                    };
                    *o += *v * shift;
                    *v *= slope;
                }
            }
        }
        // lam multiplies y_k = W_k z_{k-1} + b_k
        off += &lam.dot(&layers[k].bias);
        lam = lam.dot(&layers[k].weight);
    }
    (lam, off)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Layer;
    use ndarray::array;

    fn tanh_bump() -> Network {
        Network::new(
            1,
            vec![
                Layer::new(array![[4.0], [4.0]], array![3.2, -3.2], Activation::Tanh),
                Layer::new(array![[0.5, -0.5]], array![-0.5], Activation::Identity),
            ],
        )
        .unwrap()
    }

    #[test]
    fn linear_net_is_exact() {
        let net = Network::new(
            2,
            vec![
                Layer::new(array![[1.0, -2.0], [0.5, 0.25], [3.0, 1.0]], array![0.1, -0.2, 0.3], Activation::Identity),
                Layer::new(array![[1.0, 2.0, -1.0]], array![0.7], Activation::Identity),
            ],
        )
        .unwrap();
        let s = Simplex::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let vb = propagate_value_bounds(&net, &s).unwrap();
        assert_eq!(vb.output.lower, vb.output.upper);
        let x = [0.2, 0.3];
        assert!((vb.output.lower.eval(&x)[[0, 0]] - net.value(&x).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn first_layer_interval_is_vertex_extrema() {
        let net = tanh_bump();
        let s = Simplex::from_rows(&[vec![-1.0], vec![0.5]]).unwrap();
        let vb = propagate_value_bounds(&net, &s).unwrap();
        let l0 = &vb.layers[0];
        assert_eq!((l0.lo(0), l0.hi(0)), (4.0 * -1.0 + 3.2, 4.0 * 0.5 + 3.2));
        assert_eq!((l0.lo(1), l0.hi(1)), (-4.0 - 3.2, 2.0 - 3.2));
    }

    #[test]
    fn zero_weight_row_gives_point_interval() {
        let net = Network::new(
            1,
            vec![
                Layer::new(array![[0.0], [1.0]], array![0.3, 0.0], Activation::Tanh),
                Layer::new(array![[1.0, 1.0]], array![0.0], Activation::Identity),
            ],
        )
        .unwrap();
        let s = Simplex::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let vb = propagate_value_bounds(&net, &s).unwrap();
        assert_eq!((vb.layers[0].lo(0), vb.layers[0].hi(0)), (0.3, 0.3));
    }

    #[test]
    fn grid_extrema_enclosed_on_interval() {
        let net = tanh_bump();
        let s = Simplex::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let vb = propagate_value_bounds(&net, &s).unwrap();
        let lo = vb.output.lower.min_over(&s)[[0, 0]];
        let hi = vb.output.upper.max_over(&s)[[0, 0]];
        let mut gmin = f64::INFINITY;
        let mut gmax = f64::NEG_INFINITY;
        for i in 0..10_000 {
            let x = -1.0 + 2.0 * i as f64 / 9_999.0;
            let v = net.value(&[x]).unwrap();
            gmin = gmin.min(v);
            gmax = gmax.max(v);
            let b = vb.output.lower.eval(&[x])[[0, 0]];
            let t = vb.output.upper.eval(&[x])[[0, 0]];
            assert!(b <= v + 1e-12 && v <= t + 1e-12);
        }
        assert!(lo <= gmin && gmax <= hi);
    }

    #[test]
    fn tiny_simplex_has_tiny_gap() {
        let net = tanh_bump();
        let s = Simplex::from_rows(&[vec![0.3], vec![0.3 + 1e-4]]).unwrap();
        let vb = propagate_value_bounds(&net, &s).unwrap();
        assert!(vb.output.max_gap_at(&s.barycenter()) < 1e-6);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = Simplex::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            propagate_value_bounds(&tanh_bump(), &s),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}

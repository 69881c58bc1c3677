#![allow(dead_code)]

use ncbf_core::mesh::{Simplex, StateBox};
use ncbf_core::network::{Activation, Layer, Network};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

pub fn fixture_path(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> Network {
    Network::load(fixture_path(name)).unwrap()
}

pub fn random_net<R: Rng>(rng: &mut R, input: usize, hidden: &[usize], act: Activation, gain: f64) -> Network {
    let mut layers = Vec::new();
    let mut fan_in = input;
    for (i, &w) in hidden.iter().chain(std::iter::once(&1)).enumerate() {
        let s = gain / (fan_in as f64).sqrt();
        let weight = Array2::from_shape_fn((w, fan_in), |_| s * rng.sample::<f64, _>(StandardNormal));
        let bias = Array1::from_shape_fn(w, |_| 0.5 * rng.sample::<f64, _>(StandardNormal));
        let a = if i == hidden.len() { Activation::Identity } else { act };
        layers.push(Layer::new(weight, bias, a));
        fan_in = w;
    }
    Network::new(input, layers).unwrap()
}

/// Random simplex inside `b`, vertices within `scale` of a random centre (relative to
/// the box widths).
pub fn random_simplex<R: Rng>(rng: &mut R, b: &StateBox, scale: f64) -> Simplex {
    let n = b.dim();
    loop {
        let center: Vec<f64> = (0..n).map(|k| rng.random_range(b.lo[k]..b.hi[k])).collect();
        let rows: Vec<Vec<f64>> = (0..=n)
            .map(|_| {
                (0..n)
                    .map(|k| {
                        let w = b.hi[k] - b.lo[k];
                        (center[k] + scale * w * rng.random_range(-1.0..1.0)).clamp(b.lo[k], b.hi[k])
                    })
                    .collect()
            })
            .collect();
        if let Ok(s) = Simplex::from_rows(&rows) {
            let cube: f64 = (0..n).map(|k| scale * (b.hi[k] - b.lo[k])).product();
            if s.volume() > 1e-3 * cube {
                return s;
            }
        }
    }
}

/// Uniform point of the simplex.
pub fn sample_in<R: Rng>(rng: &mut R, s: &Simplex) -> Vec<f64> {
    let e: Vec<f64> = (0..=s.dim()).map(|_| Exp1.sample(rng)).collect();
    let t: f64 = e.iter().sum();
    let lam: Vec<f64> = e.iter().map(|v| v / t).collect();
    s.point_at(&lam)
}

/// Vertices, barycenter, then `k` uniform samples.
pub fn probe_points<R: Rng>(rng: &mut R, s: &Simplex, k: usize) -> Vec<Vec<f64>> {
    let mut pts = s.vertex_rows();
    pts.push(s.barycenter());
    pts.extend((0..k).map(|_| sample_in(rng, s)));
    pts
}

pub fn cube(n: usize, r: f64) -> StateBox {
    StateBox::new(vec![-r; n], vec![r; n]).unwrap()
}

//! Safe sets `𝒮 = 𝒳 \ ⋃ obstacles` and conservative simplex classification.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::mesh::{Simplex, StateBox};

/// `coeff · Π x_k^{powers[k]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// A closed unsafe region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Obstacle {
    /// `‖x[axes] − center‖ ≤ radius`; all axes when `axes` is absent.
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axes: Option<Vec<usize>>,
    },
    AxisBox { lo: Vec<f64>, hi: Vec<f64> },
    /// `p(x) ≤ 0`.
    Polynomial { terms: Vec<Monomial> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafeClass {
    Inside,
    Outside,
    Straddle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Relation {
    Disjoint,
    Covers,
    Unknown,
}

impl Obstacle {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        Obstacle::Ball {
            center,
            radius,
            axes: None,
        }
    }

    fn axes(&self, n: usize) -> Vec<usize> {
        match self {
            Obstacle::Ball { axes: Some(a), .. } => a.clone(),
            _ => (0..n).collect(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Obstacle::Ball { center, radius, .. } => {
                let axes = self.axes(n);
                if axes.iter().any(|&a| a >= n) {
                    return Err(Error::InvalidParameter(format!("ball axes {axes:?} out of range")));
                }
                if center.len() != axes.len() {
                    return Err(Error::dims("ball center", axes.len(), center.len()));
                }
                if !(*radius > 0.0) {
                    return Err(Error::InvalidParameter(format!("ball radius {radius}")));
                }
            }
            Obstacle::AxisBox { lo, hi } => {
                if lo.len() != n || hi.len() != n {
                    return Err(Error::dims("obstacle box", n, lo.len().max(hi.len())));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::InvalidParameter("obstacle box with lo > hi".into()));
                }
            }
            Obstacle::Polynomial { terms } => {
                if let Some(t) = terms.iter().find(|t| t.powers.len() != n) {
                    return Err(Error::dims("monomial powers", n, t.powers.len()));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Obstacle::Ball { center, radius, .. } => {
                let axes = self.axes(x.len());
                let d2: f64 = axes.iter().zip(center).map(|(&a, c)| (x[a] - c).powi(2)).sum();
                d2.sqrt() <= *radius
            }
            Obstacle::AxisBox { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| l <= v && v <= h),
            Obstacle::Polynomial { terms } => poly_eval(terms, x) <= 0.0,
        }
    }

    fn relation(&self, s: &Simplex) -> Relation {
        let verts = s.vertex_rows();
        match self {
            Obstacle::Ball { center, radius, .. } => {
                let axes = self.axes(s.dim());
                let pts: Vec<Vec<f64>> = verts.iter().map(|v| axes.iter().map(|&a| v[a]).collect()).collect();
                if pts.iter().all(|p| dist(p, center) <= *radius) {
                    Relation::Covers
                } else if hull_distance(&pts, center) > *radius {
                    Relation::Disjoint
                } else {
                    Relation::Unknown
                }
            }
            Obstacle::AxisBox { lo, hi } => {
                if verts.iter().all(|v| self.contains(v)) {
                    return Relation::Covers;
                }
                let (slo, shi) = s.bbox();
                let axis_sep = (0..lo.len()).any(|k| shi[k] < lo[k] || slo[k] > hi[k]);
                // facet normals: λ_i < 0 on the whole box separates it from the simplex
                let facet_sep = s.barycentric_forms().is_ok_and(|forms| {
                    forms.iter().any(|f| {
                        let max: f64 = f.offset
                            + f.coeffs
                                .iter()
                                .enumerate()
                                .map(|(k, c)| (c * lo[k]).max(c * hi[k]))
                                .sum::<f64>();
                        max < 0.0
                    })
                });
                if axis_sep || facet_sep {
                    Relation::Disjoint
                } else {
                    Relation::Unknown
                }
            }
            Obstacle::Polynomial { terms } => {
                let (lo, hi) = s.bbox();
                let x: Vec<Interval> = lo.iter().zip(&hi).map(|(l, h)| Interval::new(*l, *h)).collect();
                let p = poly_interval(terms, &x);
                if p.hi <= 0.0 {
                    Relation::Covers
                } else if p.lo > 0.0 {
                    Relation::Disjoint
                } else {
                    Relation::Unknown
                }
            }
        }
    }
}

fn poly_eval(terms: &[Monomial], x: &[f64]) -> f64 {
    terms
        .iter()
        .map(|t| t.coeff * t.powers.iter().zip(x).map(|(p, v)| v.powi(*p as i32)).product::<f64>())
        .sum()
}

fn poly_interval(terms: &[Monomial], x: &[Interval]) -> Interval {
    terms.iter().fold(Interval::point(0.0), |acc, t| {
        let m = t
            .powers
            .iter()
            .zip(x)
            .fold(Interval::point(1.0), |m, (p, v)| m * v.powi(*p));
        acc + m * t.coeff
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Euclidean distance from `p` to the convex hull of `pts`, by projecting onto the
/// affine hull of every affinely independent vertex subset.
fn hull_distance(pts: &[Vec<f64>], p: &[f64]) -> f64 {
    let k = pts.len();
    let d = p.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let base = &pts[idx[0]];
        let r = idx.len() - 1;
        if r > d {
            continue;
        }
        // x = base + E μ, minimize |x − p|
        let e = DMatrix::from_fn(d, r, |row, c| pts[idx[c + 1]][row] - base[row]);
        let rhs = DVector::from_fn(d, |row, _| p[row] - base[row]);
        let mu = if r == 0 {
            DVector::zeros(0)
        } else {
            let gram = e.transpose() * &e;
            match gram.clone().cholesky() {
                Some(ch) => ch.solve(&(e.transpose() * &rhs)),
                None => continue,
            }
        };
        let tol = 1e-12;
        if mu.iter().any(|m| *m < -tol) || mu.sum() > 1.0 + tol {
            continue;
        }
        let x = DVector::from_column_slice(base) + &e * &mu;
        best = best.min(dist(x.as_slice(), p));
    }
    best
}

/// Safe set `state_box` minus the union of `obstacles`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafeSetDef {
    pub state_box: StateBox,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
}

impl SafeSetDef {
    pub fn new(state_box: StateBox, obstacles: Vec<Obstacle>) -> Result<Self> {
        let s = SafeSetDef { state_box, obstacles };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let b = StateBox::new(self.state_box.lo.clone(), self.state_box.hi.clone())?;
        for o in &self.obstacles {
            o.validate(b.dim())?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.state_box.dim()
    }

    /// `x ∈ 𝒮`.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.state_box.contains(x) && !self.obstacles.iter().any(|o| o.contains(x))
    }

    /// `x ∈ 𝒳 \ 𝒮`.
    pub fn in_unsafe(&self, x: &[f64]) -> bool {
        self.state_box.contains(x) && self.obstacles.iter().any(|o| o.contains(x))
    }
}

/// Conservative classification: `Inside` only if `s ⊆ 𝒮`, `Outside` only if `s` lies in
/// a single obstacle.
pub fn classify_safe(s: &Simplex, safe: &SafeSetDef) -> SafeClass {
    let eps = 1e-12;
    let in_box = s.vertex_rows().iter().all(|v| {
        v.iter()
            .zip(safe.state_box.lo.iter().zip(&safe.state_box.hi))
            .all(|(x, (l, h))| *x >= l - eps && *x <= h + eps)
    });
    if !in_box {
        return SafeClass::Straddle;
    }
    let mut all_disjoint = true;
    for o in &safe.obstacles {
        match o.relation(s) {
            Relation::Covers => return SafeClass::Outside,
            Relation::Disjoint => {}
            Relation::Unknown => all_disjoint = false,
        }
    }
    if all_disjoint {
        SafeClass::Inside
    } else {
        SafeClass::Straddle
    }
}

//! Builtin benchmark systems.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::dual::Real;
use super::{ControlAffine, DynamicsModel};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::mesh::StateBox;
use crate::safe_set::{Monomial, Obstacle, SafeSetDef};

pub const BUILTIN_NAMES: [&str; 7] = [
    "darboux",
    "barrier2",
    "barrier3",
    "barrier4",
    "control2d",
    "cartpole",
    "contraction1d",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CartpoleParams {
    pub m_c: f64,
    pub m_p: f64,
    pub length: f64,
    pub gravity: f64,
    pub mu_p: f64,
    pub u_max: f64,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        CartpoleParams {
            m_c: 1.0,
            m_p: 0.1,
            length: 0.5,
            gravity: 9.81,
            mu_p: 0.01,
            u_max: 10.0,
        }
    }
}

impl CartpoleParams {
    fn from_map(params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut p = CartpoleParams::default();
        for (k, v) in params {
            let slot = match k.as_str() {
                "m_c" => &mut p.m_c,
                "m_p" => &mut p.m_p,
                "length" | "l" => &mut p.length,
                "gravity" | "g" => &mut p.gravity,
                "mu_p" => &mut p.mu_p,
                "u_max" => &mut p.u_max,
                _ => return Err(Error::InvalidParameter(format!("cartpole has no parameter `{k}`"))),
            };
            *slot = *v;
        }
        for (name, v) in [("m_c", p.m_c), ("m_p", p.m_p), ("length", p.length)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("cartpole {name} must be positive, got {v}")));
            }
        }
        if !(p.u_max >= 0.0) || !p.gravity.is_finite() || !p.mu_p.is_finite() {
            return Err(Error::InvalidParameter("cartpole parameters must be finite, u_max ≥ 0".into()));
        }
        Ok(p)
    }

    /// `g_θ̈` at `θ = 0`.
    pub fn g_theta_ddot_at_zero(&self) -> f64 {
        let mt = self.m_c + self.m_p;
        -1.0 / (mt * self.length * (4.0 / 3.0 - self.m_p / mt))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    Darboux,
    Barrier2,
    Barrier3,
    Barrier4,
    Control2d,
    Cartpole(CartpoleParams),
    /// `ẋ = −x`.
    Contraction1d,
}

fn c<S: Real>(v: f64) -> S {
    S::cst(v)
}

impl ControlAffine for Builtin {
    fn name(&self) -> &str {
        match self {
            Builtin::Darboux => "darboux",
            Builtin::Barrier2 => "barrier2",
            Builtin::Barrier3 => "barrier3",
            Builtin::Barrier4 => "barrier4",
            Builtin::Control2d => "control2d",
            Builtin::Cartpole(_) => "cartpole",
            Builtin::Contraction1d => "contraction1d",
        }
    }

    fn state_dim(&self) -> usize {
        match self {
            Builtin::Contraction1d => 1,
            Builtin::Barrier4 => 3,
            Builtin::Cartpole(_) => 4,
            _ => 2,
        }
    }

    fn control_dim(&self) -> usize {
        match self {
            Builtin::Control2d => 2,
            Builtin::Cartpole(_) => 1,
            _ => 0,
        }
    }

    fn eval<S: Real>(&self, x: &[S]) -> (Vec<S>, Vec<S>) {
        match self {
            Builtin::Darboux => {
                let (x1, x2) = (x[0].clone(), x[1].clone());
                let f1 = x2.clone() + (x1.clone() * x2.clone()).scale(2.0);
                let f2 = -x1.clone() - x2.sqr() + x1.sqr().scale(2.0);
                (vec![f1, f2], vec![])
            }
            Builtin::Barrier2 => {
                let (x1, x2) = (x[0].clone(), x[1].clone());
                let f1 = (-x1.clone()).exp() + x2 - c(1.0);
                let f2 = -x1.sin().sqr();
                (vec![f1, f2], vec![])
            }
            Builtin::Barrier3 => {
                let (x1, x2) = (x[0].clone(), x[1].clone());
                let f2 = -x1.clone() - x2.clone() + (x1.sqr() * x1).scale(1.0 / 3.0);
                (vec![x2, f2], vec![])
            }
            Builtin::Barrier4 => {
                let (px, py, phi) = (x[0].clone(), x[1].clone(), x[2].clone());
                let (s, co) = (phi.sin(), phi.cos());
                let num = px.clone() * s.clone() + py.clone() * co.clone();
                let den = c::<S>(0.5) + px.sqr() + py.sqr();
                let f3 = -s.clone() + (num / den).scale(3.0);
                (vec![s, co, f3], vec![])
            }
            Builtin::Control2d => {
                let (x1, x2) = (x[0].clone(), x[1].clone());
                let f = vec![-(x1 * x2.clone()), -x2.sqr()];
                let g = vec![c(1.0), c(0.0), c(0.0), c(1.0)];
                (f, g)
            }
            Builtin::Cartpole(p) => {
                let (yd, th, thd) = (x[1].clone(), x[2].clone(), x[3].clone());
                let mt = p.m_c + p.m_p;
                let (s, co) = (th.sin(), th.cos());
                let denom = (c::<S>(4.0 / 3.0) - co.sqr().scale(p.m_p / mt)).scale(p.length);
                let inv = denom.recip();
                let num = s.scale(p.gravity)
                    + (co.clone() * thd.sqr() * s.clone()).scale(-p.m_p * p.length / mt)
                    - thd.scale(p.mu_p / (p.m_p * p.length));
                let th_dd = num * inv.clone();
                let y_dd = (thd.sqr() * s - th_dd.clone() * co.clone()).scale(p.m_p * p.length / mt);
                let g_th = -(co.clone() * inv).scale(1.0 / mt);
                let g_y = (c::<S>(1.0) - (co * g_th.clone()).scale(p.m_p * p.length)).scale(1.0 / mt);
                (vec![yd, y_dd, thd, th_dd], vec![c(0.0), g_y, c(0.0), g_th])
            }
            Builtin::Contraction1d => (vec![-x[0].clone()], vec![]),
        }
    }
}

impl Builtin {
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let b = match name.to_ascii_lowercase().as_str() {
            "darboux" => Builtin::Darboux,
            "barrier2" => Builtin::Barrier2,
            "barrier3" => Builtin::Barrier3,
            "barrier4" => Builtin::Barrier4,
            "control2d" | "2d-control" => Builtin::Control2d,
            "cartpole" | "cart-pole" => return Ok(Builtin::Cartpole(CartpoleParams::from_map(params)?)),
            "contraction1d" => Builtin::Contraction1d,
            _ => return Err(Error::UnknownSystem(name.to_string())),
        };
        if let Some(k) = params.keys().next() {
            return Err(Error::InvalidParameter(format!("{name} takes no parameter `{k}`")));
        }
        Ok(b)
    }

    pub fn control_bounds(&self) -> Vec<Interval> {
        match self {
            Builtin::Control2d => vec![Interval::new(-0.5, 0.5); 2],
            Builtin::Cartpole(p) => vec![Interval::new(-p.u_max, p.u_max)],
            _ => vec![],
        }
    }

    pub fn state_box(&self) -> StateBox {
        let (lo, hi) = match self {
            Builtin::Darboux | Builtin::Barrier2 => (vec![-2.0, -2.0], vec![2.0, 2.0]),
            Builtin::Barrier3 => (vec![-3.0, -2.0], vec![2.5, 1.0]),
            Builtin::Barrier4 => (vec![-2.0, -2.0, -PI / 2.0], vec![2.0, 2.0, PI / 2.0]),
            Builtin::Control2d => (vec![-3.0, -2.0], vec![3.0, 2.0]),
            Builtin::Cartpole(_) => (vec![-2.4, -3.0, -PI / 6.0, -2.0], vec![2.4, 3.0, PI / 6.0, 2.0]),
            Builtin::Contraction1d => (vec![-2.0], vec![2.0]),
        };
        StateBox::new(lo, hi).expect("builtin box")
    }

    pub fn default_safe_set(&self) -> SafeSetDef {
        let b = self.state_box();
        let obstacles = match self {
            Builtin::Darboux => vec![Obstacle::Polynomial {
                terms: vec![
                    Monomial { coeff: 1.0, powers: vec![1, 0] },
                    Monomial { coeff: 1.0, powers: vec![0, 2] },
                ],
            }],
            Builtin::Barrier2 => vec![Obstacle::ball(vec![0.7, -0.7], 0.3)],
            Builtin::Barrier3 => vec![
                Obstacle::ball(vec![-1.0, -1.0], 0.4),
                Obstacle::AxisBox { lo: vec![0.4, 0.1], hi: vec![0.6, 0.5] },
                Obstacle::AxisBox { lo: vec![0.4, 0.1], hi: vec![0.8, 0.3] },
            ],
            Builtin::Barrier4 => vec![Obstacle::Ball {
                center: vec![0.0, 0.0],
                radius: 0.2,
                axes: Some(vec![0, 1]),
            }],
            Builtin::Control2d => vec![Obstacle::ball(vec![1.5, 0.0], 0.3)],
            Builtin::Cartpole(_) => {
                let mut left = (b.lo.clone(), b.hi.clone());
                left.1[0] = -2.0;
                let mut right = (b.lo.clone(), b.hi.clone());
                right.0[0] = 2.0;
                vec![
                    Obstacle::AxisBox { lo: left.0, hi: left.1 },
                    Obstacle::AxisBox { lo: right.0, hi: right.1 },
                ]
            }
            Builtin::Contraction1d => vec![
                Obstacle::AxisBox { lo: vec![-2.0], hi: vec![-1.0] },
                Obstacle::AxisBox { lo: vec![1.0], hi: vec![2.0] },
            ],
        };
        SafeSetDef::new(b, obstacles).expect("builtin safe set")
    }
}

/// A builtin system by name with its control bounds.
pub fn builtin_system(name: &str, params: &BTreeMap<String, f64>) -> Result<DynamicsModel<Builtin>> {
    let b = Builtin::from_name(name, params)?;
    let bounds = b.control_bounds();
    DynamicsModel::new(b, bounds)
}

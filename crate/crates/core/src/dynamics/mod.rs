//! Control-affine dynamics `ẋ = f(x) + g(x)u` with Taylor enclosures of `f` and `g`
//! over simplices.

mod dual;
mod systems;
mod taylor;

pub use dual::{Dual2, Real};
pub use systems::{builtin_system, Builtin, CartpoleParams, BUILTIN_NAMES};
pub use taylor::{bernstein_product_range, bernstein_remainder, TaylorEnclosure};

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::mesh::Simplex;

/// How a model's `f` and `g` are linearized over a region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Linearization {
    Taylor,
    Lipschitz,
    NetworkBounds,
}

/// Closed-form control-affine dynamics, generic over the scalar type so the same code
/// yields values, derivatives and interval bounds.
pub trait ControlAffine: Send + Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    /// `f(x)` and row-major `g(x)` (`state_dim × control_dim`).
    fn eval<S: Real>(&self, x: &[S]) -> (Vec<S>, Vec<S>);

    fn linearization(&self) -> Linearization {
        Linearization::Taylor
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    F,
    G,
}

#[derive(Clone, Debug)]
pub struct DynamicsModel<D: ControlAffine = Builtin> {
    system: D,
    control_bounds: Vec<Interval>,
}

impl<D: ControlAffine> DynamicsModel<D> {
    pub fn new(system: D, control_bounds: Vec<Interval>) -> Result<Self> {
        if control_bounds.len() != system.control_dim() {
            return Err(Error::dims("control bounds", system.control_dim(), control_bounds.len()));
        }
        for b in &control_bounds {
            if !(b.lo <= b.hi) || !b.is_finite() {
                return Err(Error::InvalidInterval { lower: b.lo, upper: b.hi });
            }
        }
        Ok(DynamicsModel { system, control_bounds })
    }

    pub fn system(&self) -> &D {
        &self.system
    }

    pub fn name(&self) -> &str {
        self.system.name()
    }

    pub fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.system.control_dim()
    }

    pub fn control_bounds(&self) -> &[Interval] {
        &self.control_bounds
    }

    pub fn linearization(&self) -> Linearization {
        self.system.linearization()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::dims("state", self.state_dim(), x.len()));
        }
        Ok(())
    }

    pub fn eval_f(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(self.system.eval(x).0)
    }

    /// `g(x)` as an `n × m` matrix.
    pub fn eval_g(&self, x: &[f64]) -> Result<Array2<f64>> {
        self.check(x)?;
        let g = self.system.eval(x).1;
        Ok(Array2::from_shape_vec((self.state_dim(), self.control_dim()), g).expect("g shape"))
    }

    fn duals(&self, x: &[f64]) -> (Vec<Dual2<f64>>, Vec<Dual2<f64>>) {
        let n = x.len();
        let vars: Vec<Dual2<f64>> = x.iter().enumerate().map(|(i, v)| Dual2::var(*v, i, n)).collect();
        self.system.eval(&vars)
    }

    /// `∂f_i/∂x_k` as an `n × n` matrix.
    pub fn jac_f(&self, x: &[f64]) -> Result<Array2<f64>> {
        self.check(x)?;
        let n = x.len();
        let (f, _) = self.duals(x);
        Ok(Array2::from_shape_fn((n, n), |(i, k)| f[i].gradient(n)[k]))
    }

    /// `∂g_ij/∂x_k` as an `n × m × n` tensor.
    pub fn jac_g(&self, x: &[f64]) -> Result<Array3<f64>> {
        self.check(x)?;
        let (n, m) = (x.len(), self.control_dim());
        let (_, g) = self.duals(x);
        Ok(Array3::from_shape_fn((n, m, n), |(i, j, k)| g[i * m + j].gradient(n)[k]))
    }

    fn interval_hessians(&self, simplex: &Simplex) -> Result<(Vec<Vec<Interval>>, Vec<Vec<Interval>>)> {
        let n = self.state_dim();
        if simplex.dim() != n {
            return Err(Error::dims("simplex", n, simplex.dim()));
        }
        let (lo, hi) = simplex.bbox();
        let vars: Vec<Dual2<Interval>> = (0..n)
            .map(|i| Dual2::var(Interval::new(lo[i], hi[i]), i, n))
            .collect();
        let (f, g) = self.system.eval(&vars);
        let hess = |d: &Dual2<Interval>| -> Result<Vec<Interval>> {
            let h = d.hessian(n);
            if h.iter().all(|v| v.is_finite()) {
                Ok(h)
            } else {
                Err(Error::HessianUnavailable(format!(
                    "{} over simplex {}",
                    self.name(),
                    simplex.id
                )))
            }
        };
        let hf = f.iter().map(hess).collect::<Result<_>>()?;
        let hg = g.iter().map(hess).collect::<Result<_>>()?;
        Ok((hf, hg))
    }

    /// Row-major Hessian-entry bounds of each `f_i` over the simplex's bounding box.
    pub fn hess_bounds_f(&self, simplex: &Simplex) -> Result<Vec<Vec<Interval>>> {
        Ok(self.interval_hessians(simplex)?.0)
    }

    /// Same as [`Self::hess_bounds_f`] for each entry of `g`, row-major over `(i, j)`.
    pub fn hess_bounds_g(&self, simplex: &Simplex) -> Result<Vec<Vec<Interval>>> {
        Ok(self.interval_hessians(simplex)?.1)
    }

    /// Taylor enclosures of `f` and `g` over `simplex`, expanded at the barycenter.
    pub fn taylor_enclosures(&self, simplex: &Simplex) -> Result<(TaylorEnclosure, TaylorEnclosure)> {
        if self.linearization() != Linearization::Taylor {
            return Err(Error::InvalidConfig(format!(
                "{}: only Taylor linearization is supported",
                self.name()
            )));
        }
        let (hf, hg) = self.interval_hessians(simplex)?;
        let c = simplex.barycenter();
        let (f, g) = self.duals(&c);
        let n = self.state_dim();
        let fe = TaylorEnclosure::build(&f, &hf, &c, simplex, n, 1)?;
        let ge = TaylorEnclosure::build(&g, &hg, &c, simplex, n, self.control_dim())?;
        Ok((fe, ge))
    }

    pub fn taylor_enclosure(&self, which: Which, simplex: &Simplex) -> Result<TaylorEnclosure> {
        let (f, g) = self.taylor_enclosures(simplex)?;
        Ok(match which {
            Which::F => f,
            Which::G => g,
        })
    }
}

//! Scalar types the dynamics are evaluated over: plain floats, intervals, and
//! second-order forward-mode duals of either.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::interval::Interval;

/// Arithmetic needed by the closed-form dynamics.
pub trait Real:
    Clone
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn sqr(&self) -> Self;
    fn recip(&self) -> Self;

    fn scale(&self, k: f64) -> Self {
        self.clone() * Self::cst(k)
    }
}

impl Real for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sqr(&self) -> Self {
        self * self
    }
    fn recip(&self) -> Self {
        1.0 / self
    }
}

impl Real for Interval {
    fn cst(v: f64) -> Self {
        Interval::point(v)
    }
    fn sin(&self) -> Self {
        Interval::sin(*self)
    }
    fn cos(&self) -> Self {
        Interval::cos(*self)
    }
    fn exp(&self) -> Self {
        Interval::exp(*self)
    }
    fn sqr(&self) -> Self {
        Interval::sqr(*self)
    }
    fn recip(&self) -> Self {
        Interval::recip(*self)
    }
}

/// Value, gradient and row-major Hessian with respect to `n` variables.
///
/// An empty gradient marks a constant.
#[derive(Clone, Debug, PartialEq)]
pub struct Dual2<T> {
    pub value: T,
    pub grad: Vec<T>,
    pub hess: Vec<T>,
}

impl<T: Real> Dual2<T> {
    pub fn constant(value: T) -> Self {
        Dual2 {
            value,
            grad: Vec::new(),
            hess: Vec::new(),
        }
    }

    /// Variable `i` of `n`.
    pub fn var(value: T, i: usize, n: usize) -> Self {
        let mut grad = vec![T::cst(0.0); n];
        grad[i] = T::cst(1.0);
        Dual2 {
            value,
            grad,
            hess: vec![T::cst(0.0); n * n],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.grad.is_empty()
    }

    /// Gradient padded to `n` entries.
    pub fn gradient(&self, n: usize) -> Vec<T> {
        if self.is_constant() {
            vec![T::cst(0.0); n]
        } else {
            self.grad.clone()
        }
    }

    /// Hessian padded to `n × n` entries.
    pub fn hessian(&self, n: usize) -> Vec<T> {
        if self.is_constant() {
            vec![T::cst(0.0); n * n]
        } else {
            self.hess.clone()
        }
    }

    /// Apply `φ` with `φ(a) = f0`, `φ′(a) = f1`, `φ″(a) = f2`.
    fn chain(&self, f0: T, f1: T, f2: T) -> Self {
        if self.is_constant() {
            return Dual2::constant(f0);
        }
        let n = self.grad.len();
        let grad = self.grad.iter().map(|g| f1.clone() * g.clone()).collect();
        let mut hess = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                hess.push(
                    f1.clone() * self.hess[i * n + j].clone()
                        + f2.clone() * self.grad[i].clone() * self.grad[j].clone(),
                );
            }
        }
        Dual2 {
            value: f0,
            grad,
            hess,
        }
    }

    fn map_derivs(&self, f: impl Fn(&T) -> T, value: T) -> Self {
        Dual2 {
            value,
            grad: self.grad.iter().map(&f).collect(),
            hess: self.hess.iter().map(&f).collect(),
        }
    }
}

impl<T: Real> Add for Dual2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        match (self.is_constant(), rhs.is_constant()) {
            (true, true) => Dual2::constant(self.value + rhs.value),
            (true, false) => Dual2 {
                value: self.value + rhs.value,
                ..rhs
            },
            (false, true) => Dual2 {
                value: self.value + rhs.value,
                ..self
            },
            (false, false) => Dual2 {
                value: self.value + rhs.value,
                grad: zip_with(self.grad, rhs.grad, |a, b| a + b),
                hess: zip_with(self.hess, rhs.hess, |a, b| a + b),
            },
        }
    }
}

impl<T: Real> Neg for Dual2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        let v = -self.value.clone();
        self.map_derivs(|g| -g.clone(), v)
    }
}

impl<T: Real> Sub for Dual2<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<T: Real> Mul for Dual2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        match (self.is_constant(), rhs.is_constant()) {
            (true, true) => Dual2::constant(self.value * rhs.value),
            (true, false) => {
                let k = self.value;
                let v = k.clone() * rhs.value.clone();
                rhs.map_derivs(|g| k.clone() * g.clone(), v)
            }
            (false, true) => {
                let k = rhs.value;
                let v = self.value.clone() * k.clone();
                self.map_derivs(|g| g.clone() * k.clone(), v)
            }
            (false, false) => {
                let n = self.grad.len();
                let (a, b) = (&self, &rhs);
                let grad = (0..n)
                    .map(|i| a.value.clone() * b.grad[i].clone() + b.value.clone() * a.grad[i].clone())
                    .collect();
                let mut hess = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let k = i * n + j;
                        hess.push(
                            a.value.clone() * b.hess[k].clone()
                                + b.value.clone() * a.hess[k].clone()
                                + a.grad[i].clone() * b.grad[j].clone()
                                + b.grad[i].clone() * a.grad[j].clone(),
                        );
                    }
                }
                Dual2 {
                    value: a.value.clone() * b.value.clone(),
                    grad,
                    hess,
                }
            }
        }
    }
}

impl<T: Real> Div for Dual2<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

fn zip_with<T>(a: Vec<T>, b: Vec<T>, f: impl Fn(T, T) -> T) -> Vec<T> {
    a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

impl<T: Real> Real for Dual2<T> {
    fn cst(v: f64) -> Self {
        Dual2::constant(T::cst(v))
    }

    fn sin(&self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(s.clone(), c, -s)
    }

    fn cos(&self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(c.clone(), -s, -c)
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e.clone(), e.clone(), e)
    }

    fn sqr(&self) -> Self {
        let v = self.value.clone();
        self.chain(v.sqr(), v.scale(2.0), T::cst(2.0))
    }

    fn recip(&self) -> Self {
        let r = self.value.recip();
        let r2 = r.sqr();
        self.chain(r.clone(), -r2.clone(), (r2 * r).scale(2.0))
    }
}

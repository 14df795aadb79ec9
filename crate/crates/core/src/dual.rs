//! Forward-mode dual numbers and the scalar interface expressions evaluate over.
//!
//! `Dual<S>` carries a value and one directional derivative. Nesting
//! (`Dual<Dual<T>>`) yields second derivatives, which is how warp profiles
//! get `w″` without symbolic differentiation.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::real::Real;

/// Operations an expression tree needs from its scalar.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(x: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, k: i32) -> Self;
    /// `self^p` for a constant real exponent.
    fn powf(self, p: f64) -> Self;
    /// `self^other` with both sides varying; requires `self > 0`.
    fn pow(self, other: Self) -> Self {
        (other * self.ln()).exp()
    }
}

impl<T: Real> Scalar for T {
    #[inline]
    fn constant(x: f64) -> Self {
        T::lit(x)
    }
    #[inline]
    fn exp(self) -> Self {
        num_traits::Float::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        num_traits::Float::ln(self)
    }
    #[inline]
    fn sin(self) -> Self {
        num_traits::Float::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        num_traits::Float::cos(self)
    }
    #[inline]
    fn sinh(self) -> Self {
        num_traits::Float::sinh(self)
    }
    #[inline]
    fn cosh(self) -> Self {
        num_traits::Float::cosh(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        num_traits::Float::tanh(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        num_traits::Float::sqrt(self)
    }
    #[inline]
    fn powi(self, k: i32) -> Self {
        num_traits::Float::powi(self, k)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        num_traits::Float::powf(self, T::lit(p))
    }
    #[inline]
    fn pow(self, other: Self) -> Self {
        num_traits::Float::powf(self, other)
    }
}

/// `re + eps·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual<S> {
    pub re: S,
    pub eps: S,
}

impl<S: Scalar> Dual<S> {
    pub fn new(re: S, eps: S) -> Self {
        Self { re, eps }
    }

    /// Independent variable: derivative seed 1.
    pub fn variable(x: S) -> Self {
        Self {
            re: x,
            eps: S::constant(1.0),
        }
    }

    /// Constant: derivative 0.
    pub fn lift(x: S) -> Self {
        Self {
            re: x,
            eps: S::constant(0.0),
        }
    }

    #[inline]
    fn chain(self, f: S, df: S) -> Self {
        Self {
            re: f,
            eps: df * self.eps,
        }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.eps * o.re + self.re * o.eps)
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Self::new(q, (self.eps - q * o.eps) / o.re)
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn constant(x: f64) -> Self {
        Self::lift(S::constant(x))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), S::constant(1.0) / self.re)
    }
    fn sin(self) -> Self {
        self.chain(self.re.sin(), self.re.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.re.cos(), -self.re.sin())
    }
    fn sinh(self) -> Self {
        self.chain(self.re.sinh(), self.re.cosh())
    }
    fn cosh(self) -> Self {
        self.chain(self.re.cosh(), self.re.sinh())
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.chain(t, S::constant(1.0) - t * t)
    }
    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        self.chain(r, S::constant(0.5) / r)
    }
    fn powi(self, k: i32) -> Self {
        if k == 0 {
            return Self::constant(1.0);
        }
        let d = S::constant(k as f64) * self.re.powi(k - 1);
        self.chain(self.re.powi(k), d)
    }
    fn powf(self, p: f64) -> Self {
        let d = S::constant(p) * self.re.powf(p - 1.0);
        self.chain(self.re.powf(p), d)
    }
    fn pow(self, other: Self) -> Self {
        let v = self.re.pow(other.re);
        let eps = v * (other.eps * self.re.ln() + other.re * self.eps / self.re);
        Self::new(v, eps)
    }
}

/// Value, first and second derivative of `f` at `x` through nested duals.
pub fn derivatives2<T, F>(x: T, f: F) -> (T, T, T)
where
    T: Real,
    F: Fn(Dual<Dual<T>>) -> Dual<Dual<T>>,
{
    let v = Dual::new(Dual::variable(x), Dual::lift(T::one()));
    let r = f(v);
    (r.re.re, r.re.eps, r.eps.eps)
}

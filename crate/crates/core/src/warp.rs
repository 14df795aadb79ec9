//! Warp functions `w > 0` on an open interval `I`, the conformal time
//! `θ(t) = ∫_{t₀}^t ds/w(s)`, the function `Ω` and a null-completeness probe.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::dual::{derivatives2, Dual};
use crate::error::{Error, Result};
use crate::expr::{Expression, Func, Node};
use crate::quadrature::integrate;
use crate::real::Real;
use crate::roots::{brent, RootError};
use crate::spaceforms::Curvature;

/// Lattice spacing near `t₀`; panels grow geometrically beyond `FINE_SPAN`.
const KNOT_STEP: f64 = 0.125;
const FINE_PANELS: i64 = 64;
const FINE_SPAN: f64 = KNOT_STEP * FINE_PANELS as f64;
const GROWTH_PER_OCTAVE: f64 = 8.0;
const PANEL_TOL: f64 = 1e-13;
const MAX_SUBPANELS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq)]
enum ClosedForm {
    Constant(f64),
    Exp,
    None,
}

fn classify(expr: &Expression) -> ClosedForm {
    if expr.is_constant() {
        return ClosedForm::Constant(expr.eval::<f64>(&[0.0]));
    }
    match expr.root() {
        Node::Call(Func::Exp, arg) if **arg == Node::Var(0) => ClosedForm::Exp,
        _ => ClosedForm::None,
    }
}

/// Which end of `I` a completeness query looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Future,
    Past,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Completeness {
    /// `∫ dt/w` diverges toward the end.
    Complete,
    /// Converges; `limit` is the estimated value of `θ` at the end.
    Incomplete { limit: f64 },
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaConstancy {
    pub constant: bool,
    pub max_deviation: f64,
    pub mean: f64,
    pub samples_used: usize,
}

pub struct WarpProfile<T: Real> {
    expr: Expression,
    lo: T,
    hi: T,
    t0: T,
    closed: ClosedForm,
    panels: Mutex<HashMap<(i8, i64), T>>,
}

impl<T: Real> Clone for WarpProfile<T> {
    fn clone(&self) -> Self {
        Self {
            expr: self.expr.clone(),
            lo: self.lo,
            hi: self.hi,
            t0: self.t0,
            closed: self.closed,
            panels: Mutex::new(self.panels.lock().unwrap().clone()),
        }
    }
}

impl<T: Real> std::fmt::Debug for WarpProfile<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WarpProfile")
            .field("w", &self.expr.source())
            .field("interval", &(self.lo, self.hi))
            .field("t0", &self.t0)
            .finish()
    }
}

/// Default base point: the midpoint of a bounded interval, else 0 clamped
/// into a half-bounded one.
pub fn default_t0(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        if lo < 0.0 {
            0.0
        } else {
            lo + 1.0
        }
    } else if hi.is_finite() {
        if hi > 0.0 {
            0.0
        } else {
            hi - 1.0
        }
    } else {
        0.0
    }
}

impl<T: Real> WarpProfile<T> {
    /// Parses `source` as `w(t)` on `(lo, hi)` with base point `t0`.
    pub fn new(source: &str, lo: T, hi: T, t0: Option<T>) -> Result<Self> {
        let expr = Expression::parse(source)?;
        Self::from_expression(expr, lo, hi, t0)
    }

    pub fn from_expression(expr: Expression, lo: T, hi: T, t0: Option<T>) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidInput(format!(
                "warp interval ({lo}, {hi}) is empty"
            )));
        }
        let t0 = t0.unwrap_or_else(|| {
            T::lit(default_t0(lo.to_f64_lossy(), hi.to_f64_lossy()))
        });
        if !(t0 > lo && t0 < hi) {
            return Err(Error::OutsideInterval {
                t: t0.to_f64_lossy(),
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
            });
        }
        let closed = classify(&expr);
        let p = Self {
            expr,
            lo,
            hi,
            t0,
            closed,
            panels: Mutex::new(HashMap::new()),
        };
        p.w(t0)?;
        Ok(p)
    }

    /// `w ≡ k` on the whole line with `t₀ = 0`.
    pub fn constant(k: f64) -> Result<Self> {
        Self::new(&format!("{k:?}"), T::neg_infinity(), T::infinity(), Some(T::zero()))
    }

    /// Same warp with base point `t0`.
    pub fn with_t0(&self, t0: T) -> Result<Self> {
        let mut p = Self::from_expression(self.expr.clone(), self.lo, self.hi, Some(t0))?;
        p.closed = self.closed;
        Ok(p)
    }

    pub fn expression(&self) -> &Expression {
        &self.expr
    }

    pub fn source(&self) -> &str {
        self.expr.source()
    }

    pub fn interval(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn contains(&self, t: T) -> bool {
        t > self.lo && t < self.hi
    }

    fn check(&self, t: T) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutsideInterval {
                t: t.to_f64_lossy(),
                lo: self.lo.to_f64_lossy(),
                hi: self.hi.to_f64_lossy(),
            })
        }
    }

    fn positive(&self, t: T, w: T) -> Result<T> {
        if w > T::zero() && w.is_finite() {
            Ok(w)
        } else {
            Err(Error::NonPositiveWarp {
                t: t.to_f64_lossy(),
                w: w.to_f64_lossy(),
            })
        }
    }

    pub fn w(&self, t: T) -> Result<T> {
        self.check(t)?;
        self.positive(t, self.expr.eval1(t))
    }

    /// `w`, `w′`, `w″` at `t` through nested dual numbers.
    pub fn jet(&self, t: T) -> Result<(T, T, T)> {
        self.check(t)?;
        let (w, d1, d2) = derivatives2(t, |x| self.expr.eval1(x));
        Ok((self.positive(t, w)?, d1, d2))
    }

    /// `w`, `w′` or `w″` at `t`.
    pub fn eval_w(&self, t: T, order: u8) -> Result<T> {
        match order {
            0 => self.w(t),
            1 => {
                self.check(t)?;
                let d = self.expr.eval1(Dual::variable(t));
                self.positive(t, d.re)?;
                Ok(d.eps)
            }
            2 => Ok(self.jet(t)?.2),
            _ => Err(Error::InvalidInput(format!(
                "derivative order {order} not supported (0, 1 or 2)"
            ))),
        }
    }

    pub fn dw(&self, t: T) -> Result<T> {
        self.eval_w(t, 1)
    }

    fn knot_offset(k: i64) -> T {
        if k <= FINE_PANELS {
            T::lit(KNOT_STEP * k as f64)
        } else {
            T::lit(FINE_SPAN) * T::lit(2.0).powf(T::lit((k - FINE_PANELS) as f64 / GROWTH_PER_OCTAVE))
        }
    }

    fn panel_of(d: T) -> i64 {
        if d <= T::lit(FINE_SPAN) {
            (d / T::lit(KNOT_STEP)).floor().to_f64_lossy() as i64
        } else {
            let oct = (d / T::lit(FINE_SPAN)).log2() * T::lit(GROWTH_PER_OCTAVE);
            let mut k = FINE_PANELS + oct.floor().to_f64_lossy() as i64;
            // guard against log2 rounding at knot boundaries
            while Self::knot_offset(k + 1) <= d {
                k += 1;
            }
            while Self::knot_offset(k) > d {
                k -= 1;
            }
            k
        }
    }

    fn knot(&self, side: i8, k: i64) -> T {
        self.t0 + T::lit(side as f64) * Self::knot_offset(k)
    }

    fn integrate_recip(&self, a: T, b: T) -> Result<T> {
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let f = |s: T| match self.w(s) {
            Ok(w) => w.recip(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                T::nan()
            }
        };
        let coarse = crate::quadrature::gk15(&mut { f }, a, b);
        let refined = coarse.and_then(|c| {
            let tol = T::tol(PANEL_TOL) * (T::one() + c.value.abs());
            integrate(f, a, b, tol, MAX_SUBPANELS)
        });
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        Ok(refined?.value)
    }

    /// Oriented integral over lattice panel `k` on `side` (±1), cached.
    fn panel(&self, side: i8, k: i64) -> Result<T> {
        if let Some(v) = self.panels.lock().unwrap().get(&(side, k)) {
            return Ok(*v);
        }
        let v = self.integrate_recip(self.knot(side, k), self.knot(side, k + 1))?;
        self.panels.lock().unwrap().insert((side, k), v);
        Ok(v)
    }

    fn theta_quadrature(&self, t: T) -> Result<T> {
        let d = t - self.t0;
        if d == T::zero() {
            return Ok(T::zero());
        }
        let side: i8 = if d > T::zero() { 1 } else { -1 };
        let k = Self::panel_of(d.abs());
        let mut total = T::zero();
        for j in 0..k {
            total = total + self.panel(side, j)?;
        }
        Ok(total + self.integrate_recip(self.knot(side, k), t)?)
    }

    /// `θ(t) = ∫_{t₀}^t ds/w(s)`.
    pub fn theta(&self, t: T) -> Result<T> {
        self.check(t)?;
        match self.closed {
            ClosedForm::Constant(k) => {
                self.positive(t, T::lit(k))?;
                Ok((t - self.t0) / T::lit(k))
            }
            ClosedForm::Exp => Ok((-self.t0).exp() - (-t).exp()),
            ClosedForm::None => self.theta_quadrature(t),
        }
    }

    /// `θ′ = 1/w`, `θ″ = −w′/w²`.
    pub fn theta_derivatives(&self, t: T) -> Result<(T, T)> {
        let d = self.expr.eval1(Dual::variable(t));
        self.check(t)?;
        let w = self.positive(t, d.re)?;
        Ok((w.recip(), -d.eps / (w * w)))
    }

    /// Points marching from `t₀` toward one end of `I`.
    fn march(&self, dir: Direction, k: u32) -> T {
        let two = T::lit(2.0);
        match dir {
            Direction::Future => {
                if self.hi.is_finite() {
                    self.hi - (self.hi - self.t0) * two.powi(-(k as i32))
                } else {
                    self.t0 + two.powi(k as i32) - T::one()
                }
            }
            Direction::Past => {
                if self.lo.is_finite() {
                    self.lo + (self.t0 - self.lo) * two.powi(-(k as i32))
                } else {
                    self.t0 - two.powi(k as i32) + T::one()
                }
            }
        }
    }

    /// Advisory divergence test of `∫ dt/w` toward one end of `I`.
    pub fn is_null_complete(&self, dir: Direction) -> Completeness {
        match (self.closed, dir) {
            (ClosedForm::Constant(_), _) => {
                let end = if dir == Direction::Future { self.hi } else { self.lo };
                if end.is_infinite() {
                    return Completeness::Complete;
                }
            }
            (ClosedForm::Exp, Direction::Future) if self.hi.is_infinite() => {
                return Completeness::Incomplete {
                    limit: (-self.t0).exp().to_f64_lossy(),
                }
            }
            (ClosedForm::Exp, Direction::Past) if self.lo.is_infinite() => {
                return Completeness::Complete
            }
            _ => {}
        }
        let threshold = 1e8;
        let mut prev: Option<f64> = None;
        let mut quiet = 0;
        for k in 1..=60u32 {
            let t = self.march(dir, k);
            if !self.contains(t) {
                break;
            }
            let Ok(p) = self.theta(t) else { break };
            let p = p.to_f64_lossy();
            if p.abs() > threshold {
                return Completeness::Complete;
            }
            if let Some(q) = prev {
                if (p - q).abs() <= 1e-10 * (1.0 + p.abs()) {
                    quiet += 1;
                    if quiet >= 3 {
                        return Completeness::Incomplete { limit: p };
                    }
                } else {
                    quiet = 0;
                }
            }
            prev = Some(p);
        }
        Completeness::Indeterminate
    }

    /// Estimated `θ(I)`; infinite ends where the integral diverges. Where
    /// the probe is indeterminate, the last value reached is used.
    pub fn theta_range(&self) -> (T, T) {
        let end = |dir: Direction| -> T {
            let sign = if dir == Direction::Future { T::one() } else { -T::one() };
            match self.is_null_complete(dir) {
                Completeness::Complete => sign * T::infinity(),
                Completeness::Incomplete { limit } => T::lit(limit),
                Completeness::Indeterminate => {
                    let mut last = T::zero();
                    for k in 1..=60u32 {
                        let t = self.march(dir, k);
                        match self.theta(t) {
                            Ok(v) if self.contains(t) => last = v,
                            _ => break,
                        }
                    }
                    last
                }
            }
        };
        (end(Direction::Past), end(Direction::Future))
    }

    fn out_of_range(&self, s: T) -> Error {
        let (lo, hi) = self.theta_range();
        Error::ThetaOutOfRange {
            s: s.to_f64_lossy(),
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        }
    }

    /// The `t ∈ I` with `θ(t) = s`.
    pub fn theta_inverse(&self, s: T) -> Result<T> {
        if !s.is_finite() {
            return Err(self.out_of_range(s));
        }
        let t = match self.closed {
            ClosedForm::Constant(k) => self.t0 + T::lit(k) * s,
            ClosedForm::Exp => {
                let e = (-self.t0).exp() - s;
                if e <= T::zero() {
                    return Err(self.out_of_range(s));
                }
                -e.ln()
            }
            ClosedForm::None => return self.theta_inverse_numeric(s),
        };
        if !self.contains(t) {
            return Err(self.out_of_range(s));
        }
        Ok(t)
    }

    fn theta_inverse_numeric(&self, s: T) -> Result<T> {
        if s == T::zero() {
            return Ok(self.t0);
        }
        let dir = if s > T::zero() { Direction::Future } else { Direction::Past };
        let mut inner = self.t0;
        let mut outer = None;
        for k in 1..=60u32 {
            let t = self.march(dir, k);
            if !self.contains(t) {
                break;
            }
            let v = self.theta(t)?;
            if (s > T::zero() && v >= s) || (s < T::zero() && v <= s) {
                outer = Some(t);
                break;
            }
            inner = t;
        }
        let Some(outer) = outer else {
            return Err(self.out_of_range(s));
        };
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let g = |t: T| match self.theta(t) {
            Ok(v) => v - s,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                T::nan()
            }
        };
        let root = brent(g, inner, outer, T::zero(), 200);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        let mut t = match root {
            Ok(r) => r.x,
            Err(RootError::NoSignChange { .. }) => return Err(self.out_of_range(s)),
            Err(e) => return Err(e.into()),
        };
        // Newton polish with θ′ = 1/w
        for _ in 0..2 {
            let r = self.theta(t)? - s;
            let next = t - r * self.w(t)?;
            if !self.contains(next) || r == T::zero() {
                break;
            }
            t = next;
        }
        Ok(t)
    }

    /// `Ω(t)` in the pole-free form `(w′co(θ) − c·si(θ))/(w′si(θ) + co(θ))`,
    /// equal to `(w′ct(θ) − c)/(w′ + ct(θ))` away from poles of `ct`.
    pub fn omega(&self, c: Curvature, t: T) -> Result<T> {
        let dw = self.dw(t)?;
        let th = self.theta(t)?;
        let (co, si) = (c.co(th), c.si(th));
        let den = dw * si + co;
        if den.abs() < T::lit(1e-12) {
            return Err(Error::SingularOmega {
                t: t.to_f64_lossy(),
                denominator: den.to_f64_lossy(),
            });
        }
        Ok((dw * co - c.c::<T>() * si) / den)
    }

    /// `Ω` from its defining expression in `θ′`, `θ″` and `ct(θ)`.
    pub fn omega_theta_form(&self, c: Curvature, t: T) -> Result<T> {
        let (d1, d2) = self.theta_derivatives(t)?;
        let ct = c.ct(self.theta(t)?)?;
        let den = d2 - d1 * d1 * ct;
        if den.abs() < T::lit(1e-12) {
            return Err(Error::SingularOmega {
                t: t.to_f64_lossy(),
                denominator: den.to_f64_lossy(),
            });
        }
        Ok((d2 * ct + c.c::<T>() * d1 * d1) / den)
    }

    /// Sample points for global checks: uniform on a bounded `I`, otherwise
    /// on the part of `t₀ ± 4` inside `I`.
    pub fn sample_points(&self, count: usize) -> Vec<T> {
        let span = T::lit(4.0);
        let a = if self.lo.is_finite() { self.lo } else { self.t0 - span };
        let b = if self.hi.is_finite() { self.hi } else { self.t0 + span };
        let a = a.max(self.t0 - span);
        let b = b.min(self.t0 + span);
        (0..count)
            .map(|k| a + (b - a) * T::lit((k as f64 + 0.5) / count as f64))
            .collect()
    }

    pub fn is_omega_constant(&self, c: Curvature, sample_count: usize) -> Result<OmegaConstancy> {
        if sample_count < 16 {
            return Err(Error::InvalidInput(format!(
                "at least 16 samples are needed, got {sample_count}"
            )));
        }
        let values: Vec<f64> = self
            .sample_points(sample_count)
            .into_iter()
            .filter_map(|t| self.omega(c, t).ok())
            .map(|v| v.to_f64_lossy())
            .collect();
        if values.is_empty() {
            return Err(Error::AllSamplesSingular);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = max - min;
        Ok(OmegaConstancy {
            constant: spread <= 1e-8 * (1.0 + mean.abs()),
            max_deviation: spread,
            mean,
            samples_used: values.len(),
        })
    }

    /// Drops cached quadrature panels.
    pub fn clear_cache(&self) {
        self.panels.lock().unwrap().clear();
    }

    /// Forces the general quadrature path even for closed-form warps.
    pub fn without_closed_form(mut self) -> Self {
        self.closed = ClosedForm::None;
        self
    }
}

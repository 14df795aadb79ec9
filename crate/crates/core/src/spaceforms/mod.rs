//! The three model space forms `Q^{n+1}_c`, their flat ambient spaces and
//! the curvature-adapted trigonometric functions `co`, `si`, `ct`.
//!
//! `c = 0` is Euclidean `R^{n+1}`; `c = 1` the unit sphere in Euclidean
//! `R^{n+2}`; `c = -1` the upper sheet of the hyperboloid `⟨x,x⟩₁ = -1` in
//! Lorentzian `R^{n+2}_1` whose last coordinate is the timelike one.

mod families;

pub use families::{builtin_hypersurface, umbilic_hypersurface, Family};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, lincomb};
use crate::real::Real;

/// Distance from a pole of `ct` below which evaluation is a domain error.
pub const CT_POLE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Curvature {
    Hyperbolic,
    Flat,
    Spherical,
}

impl TryFrom<i8> for Curvature {
    type Error = String;
    fn try_from(c: i8) -> std::result::Result<Self, String> {
        match c {
            -1 => Ok(Curvature::Hyperbolic),
            0 => Ok(Curvature::Flat),
            1 => Ok(Curvature::Spherical),
            other => Err(format!("curvature sign must be -1, 0 or 1, got {other}")),
        }
    }
}

impl From<Curvature> for i8 {
    fn from(c: Curvature) -> i8 {
        c.sign()
    }
}

impl Curvature {
    pub fn sign(self) -> i8 {
        match self {
            Curvature::Hyperbolic => -1,
            Curvature::Flat => 0,
            Curvature::Spherical => 1,
        }
    }

    /// `c` as a scalar.
    #[inline]
    pub fn c<T: Real>(self) -> T {
        T::lit(self.sign() as f64)
    }

    #[inline]
    pub fn co<T: Real>(self, t: T) -> T {
        match self {
            Curvature::Spherical => t.cos(),
            Curvature::Flat => T::one(),
            Curvature::Hyperbolic => t.cosh(),
        }
    }

    #[inline]
    pub fn si<T: Real>(self, t: T) -> T {
        match self {
            Curvature::Spherical => t.sin(),
            Curvature::Flat => t,
            Curvature::Hyperbolic => t.sinh(),
        }
    }

    /// Distance from `t` to the nearest pole of `ct`.
    pub fn pole_distance<T: Real>(self, t: T) -> T {
        match self {
            Curvature::Spherical => {
                let k = (t / T::PI()).round();
                (t - k * T::PI()).abs()
            }
            _ => t.abs(),
        }
    }

    /// `co(t)/si(t)`; a domain error within [`CT_POLE_TOL`] of a pole.
    pub fn ct<T: Real>(self, t: T) -> Result<T> {
        if self.pole_distance(t) < T::lit(CT_POLE_TOL) {
            return Err(Error::CtPole {
                c: self.sign(),
                t: t.to_f64_lossy(),
            });
        }
        Ok(self.co(t) / self.si(t))
    }

    /// The `s` with `ct(s) = kappa` on the principal branch used for
    /// root brackets: `(0, π)` for `c = 1`, `1/κ` for `c = 0`, and
    /// `atanh(1/κ)` for `c = -1`. `None` where no such `s` exists.
    pub fn arc_ct<T: Real>(self, kappa: T) -> Option<T> {
        match self {
            Curvature::Spherical => Some(T::one().atan2(kappa)),
            Curvature::Flat => (kappa != T::zero()).then(|| kappa.recip()),
            Curvature::Hyperbolic => (kappa.abs() > T::one()).then(|| kappa.recip().atanh()),
        }
    }
}

/// A space form `Q^{n+1}_c` of intrinsic dimension `n + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceForm {
    pub curvature: Curvature,
    /// Dimension `n` of the hypersurfaces it hosts.
    pub n: usize,
}

impl SpaceForm {
    pub fn new(curvature: Curvature, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput(
                "space form must have intrinsic dimension at least 2".into(),
            ));
        }
        Ok(Self { curvature, n })
    }

    pub fn from_sign(c: i8, n: usize) -> Result<Self> {
        Self::new(Curvature::try_from(c).map_err(Error::InvalidInput)?, n)
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.n + 1
    }

    pub fn ambient_dim(&self) -> usize {
        match self.curvature {
            Curvature::Flat => self.n + 1,
            _ => self.n + 2,
        }
    }

    pub fn is_lorentzian(&self) -> bool {
        self.curvature == Curvature::Hyperbolic
    }

    /// Flat ambient inner product: Euclidean, or `⟨·,·⟩₁` for `c = -1`.
    pub fn inner<T: Real>(&self, a: &[T], b: &[T]) -> T {
        let d = dot(a, b);
        if self.is_lorentzian() {
            let k = a.len() - 1;
            d - T::lit(2.0) * a[k] * b[k]
        } else {
            d
        }
    }

    pub fn norm_sq<T: Real>(&self, a: &[T]) -> T {
        self.inner(a, a)
    }

    /// Flips the timelike coordinate for `c = -1`, turning a Euclidean
    /// normal into a Lorentzian one.
    pub fn lower<T: Real>(&self, v: &[T]) -> Vec<T> {
        let mut w = v.to_vec();
        if self.is_lorentzian() {
            let k = w.len() - 1;
            w[k] = -w[k];
        }
        w
    }

    /// Signed amount by which `x` misses the model quadric
    /// (`0` for `c = 0`).
    pub fn quadric_defect<T: Real>(&self, x: &[T]) -> T {
        match self.curvature {
            Curvature::Flat => T::zero(),
            Curvature::Spherical => self.norm_sq(x) - T::one(),
            Curvature::Hyperbolic => {
                let d = self.norm_sq(x) + T::one();
                if x[x.len() - 1] > T::zero() {
                    d
                } else {
                    // wrong sheet
                    T::infinity()
                }
            }
        }
    }

    pub fn on_quadric<T: Real>(&self, x: &[T], tol: T) -> bool {
        x.len() == self.ambient_dim() && self.quadric_defect(x).abs() <= tol
    }

    /// Rescales `x` back onto the quadric (identity for `c = 0`).
    pub fn project_point<T: Real>(&self, x: &[T]) -> Vec<T> {
        match self.curvature {
            Curvature::Flat => x.to_vec(),
            _ => {
                let r = self.norm_sq(x).abs().sqrt();
                x.iter().map(|&v| v / r).collect()
            }
        }
    }

    /// Removes the component of `v` along the position vector `x`.
    pub fn project_tangent<T: Real>(&self, x: &[T], v: &[T]) -> Vec<T> {
        match self.curvature {
            Curvature::Flat => v.to_vec(),
            _ => {
                let f = self.inner(v, x) / self.norm_sq(x);
                lincomb(T::one(), v, -f, x)
            }
        }
    }

    /// Unit-speed geodesic `co(t)p + si(t)v` through `p` with velocity `v`.
    pub fn geodesic<T: Real>(&self, p: &[T], v: &[T], t: T) -> Result<Vec<T>> {
        let amb = self.ambient_dim();
        if p.len() != amb || v.len() != amb {
            return Err(Error::InvalidGeodesic(format!(
                "expected ambient dimension {amb}, got |p| = {}, |v| = {}",
                p.len(),
                v.len()
            )));
        }
        let tol = T::tol(1e-9);
        let vv = self.norm_sq(v);
        if (vv - T::one()).abs() > tol {
            return Err(Error::InvalidGeodesic(format!(
                "velocity not unit: <v,v> = {vv}"
            )));
        }
        if self.curvature != Curvature::Flat {
            if self.quadric_defect(p).abs() > tol {
                return Err(Error::InvalidGeodesic("base point off the quadric".into()));
            }
            let pv = self.inner(p, v);
            if pv.abs() > tol {
                return Err(Error::InvalidGeodesic(format!(
                    "velocity not tangent: <p,v> = {pv}"
                )));
            }
        }
        let c = self.curvature;
        Ok(lincomb(c.co(t), p, c.si(t), v))
    }
}

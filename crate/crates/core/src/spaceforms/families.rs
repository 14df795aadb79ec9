//! Classic hypersurfaces with closed-form Gauss maps and principal
//! curvatures, used as fixtures and as oracles for the numeric jets.

use std::collections::BTreeMap;

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::hypersurface::HypersurfaceChart;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::real::Real;

use super::{Curvature, SpaceForm};

const SPHERE_AZIMUTH: (f64, f64) = (-2.5, 2.5);
const SPHERE_POLAR: (f64, f64) = (0.5, std::f64::consts::PI - 0.5);

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// Sphere of radius `r` in `R^{n+1}`.
    RoundSphere { r: f64 },
    Hyperplane,
    /// `S^k(cos a) × S^{n-k}(sin a)` in `S^{n+1}`; the Clifford torus is `n = 2, k = 1`.
    ProductTorus { a: f64, k: usize },
    /// Geodesic sphere of radius `a` in `S^{n+1}`.
    SmallSphere { a: f64 },
    GeodesicSphere { r: f64 },
    /// Hypersurface at distance `r` from a totally geodesic `H^n ⊂ H^{n+1}`.
    Equidistant { r: f64 },
    Horosphere,
    /// Torus of revolution in `R³` with radii `big_r > r`.
    TorusOfRevolution { big_r: f64, r: f64 },
    /// Graph `x_{n+1} = f(u)` over a box in `R^n`.
    Graph {
        f: Expression,
        domain: Vec<(f64, f64)>,
    },
}

fn invalid(family: &str, message: impl Into<String>) -> Error {
    Error::InvalidParameter {
        family: family.to_string(),
        message: message.into(),
    }
}

fn param(family: &str, params: &BTreeMap<String, f64>, key: &str) -> Result<f64> {
    params
        .get(key)
        .copied()
        .ok_or_else(|| invalid(family, format!("missing parameter `{key}`")))
}

impl Family {
    /// Builds a family from its configuration name and parameters.
    pub fn from_name(
        name: &str,
        params: &BTreeMap<String, f64>,
        expression: Option<&str>,
        n: usize,
    ) -> Result<Family> {
        let fam = match name {
            "round_sphere" | "sphere" => Family::RoundSphere {
                r: param(name, params, "r")?,
            },
            "hyperplane" => Family::Hyperplane,
            "clifford_torus" => Family::ProductTorus {
                a: param(name, params, "a")?,
                k: 1,
            },
            "product_torus" => Family::ProductTorus {
                a: param(name, params, "a")?,
                k: params.get("k").copied().unwrap_or(1.0) as usize,
            },
            "small_sphere" => Family::SmallSphere {
                a: param(name, params, "a")?,
            },
            "geodesic_sphere" => Family::GeodesicSphere {
                r: param(name, params, "r")?,
            },
            "equidistant" | "equidistant_hypersurface" => Family::Equidistant {
                r: param(name, params, "r")?,
            },
            "horosphere" => Family::Horosphere,
            "torus_of_revolution" => Family::TorusOfRevolution {
                big_r: param(name, params, "R")?,
                r: param(name, params, "r")?,
            },
            "graph" => {
                let src = expression.ok_or_else(|| invalid(name, "missing expression `f`"))?;
                let vars: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
                let refs: Vec<&str> = vars.iter().map(String::as_str).collect();
                let f = Expression::parse_with_vars(src, &refs)?;
                let half = params.get("half_width").copied().unwrap_or(1.0);
                Family::Graph {
                    f,
                    domain: vec![(-half, half); n],
                }
            }
            other => return Err(Error::UnknownFamily(other.to_string())),
        };
        if name == "clifford_torus" && n != 2 {
            return Err(invalid(name, format!("the Clifford torus lives in S^3 (n = 2), got n = {n}")));
        }
        Ok(fam)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::RoundSphere { .. } => "round_sphere",
            Family::Hyperplane => "hyperplane",
            Family::ProductTorus { .. } => "product_torus",
            Family::SmallSphere { .. } => "small_sphere",
            Family::GeodesicSphere { .. } => "geodesic_sphere",
            Family::Equidistant { .. } => "equidistant_hypersurface",
            Family::Horosphere => "horosphere",
            Family::TorusOfRevolution { .. } => "torus_of_revolution",
            Family::Graph { .. } => "graph",
        }
    }

    pub fn validate(&self, space: &SpaceForm) -> Result<()> {
        let name = self.name();
        let c = space.curvature;
        let n = space.n;
        let need = |want: Curvature| {
            if c == want {
                Ok(())
            } else {
                Err(invalid(
                    name,
                    format!("requires c = {}, got c = {}", want.sign(), c.sign()),
                ))
            }
        };
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("{what} must be positive, got {v}")))
            }
        };
        match *self {
            Family::RoundSphere { r } => {
                need(Curvature::Flat)?;
                positive(r, "r")
            }
            Family::Hyperplane => need(Curvature::Flat),
            Family::ProductTorus { a, k } => {
                need(Curvature::Spherical)?;
                if !(a > 0.0 && a < std::f64::consts::FRAC_PI_2) {
                    return Err(invalid(name, format!("a must lie in (0, pi/2), got {a}")));
                }
                if n < 2 || k < 1 || k >= n {
                    return Err(invalid(name, format!("need 1 <= k < n, got k = {k}, n = {n}")));
                }
                Ok(())
            }
            Family::SmallSphere { a } => {
                need(Curvature::Spherical)?;
                if !(a > 0.0 && a < std::f64::consts::PI) {
                    return Err(invalid(name, format!("a must lie in (0, pi), got {a}")));
                }
                Ok(())
            }
            Family::GeodesicSphere { r } => {
                need(Curvature::Hyperbolic)?;
                positive(r, "r")
            }
            Family::Equidistant { r } => {
                need(Curvature::Hyperbolic)?;
                if r.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(name, "r must be finite"))
                }
            }
            Family::Horosphere => need(Curvature::Hyperbolic),
            Family::TorusOfRevolution { big_r, r } => {
                need(Curvature::Flat)?;
                if n != 2 {
                    return Err(invalid(name, "only defined for n = 2"));
                }
                positive(r, "r")?;
                if !(big_r > r) {
                    return Err(invalid(name, format!("need R > r, got R = {big_r}, r = {r}")));
                }
                Ok(())
            }
            Family::Graph { ref f, ref domain } => {
                need(Curvature::Flat)?;
                if f.vars().len() != n || domain.len() != n {
                    return Err(invalid(name, format!("expected {n} variables u1..u{n}")));
                }
                Ok(())
            }
        }
    }

    /// Parameter box covered by the default grid.
    pub fn default_domain(&self, n: usize) -> Vec<(f64, f64)> {
        let sphere = |m: usize| -> Vec<(f64, f64)> {
            (0..m)
                .map(|i| if i == 0 { SPHERE_AZIMUTH } else { SPHERE_POLAR })
                .collect()
        };
        match self {
            Family::RoundSphere { .. } | Family::SmallSphere { .. } | Family::GeodesicSphere { .. } => {
                sphere(n)
            }
            Family::ProductTorus { k, .. } => {
                let mut d = sphere(*k);
                d.extend(sphere(n - k));
                d
            }
            Family::TorusOfRevolution { .. } => vec![SPHERE_AZIMUTH, (-1.0, 1.0)],
            Family::Graph { domain, .. } => domain.clone(),
            Family::Hyperplane | Family::Equidistant { .. } | Family::Horosphere => {
                vec![(-1.0, 1.0); n]
            }
        }
    }

    pub fn point<T: Real>(&self, u: &[T]) -> Vec<T> {
        match self {
            Family::RoundSphere { r } => scaled(T::lit(*r), &sphere_point(u)),
            Family::Hyperplane => {
                let mut x = u.to_vec();
                x.push(T::zero());
                x
            }
            Family::ProductTorus { a, k } => {
                let a = T::lit(*a);
                let mut x = scaled(a.cos(), &sphere_point(&u[..*k]));
                x.extend(scaled(a.sin(), &sphere_point(&u[*k..])));
                x
            }
            Family::SmallSphere { a } => {
                let a = T::lit(*a);
                let mut x = scaled(a.sin(), &sphere_point(u));
                x.push(a.cos());
                x
            }
            Family::GeodesicSphere { r } => {
                let r = T::lit(*r);
                let mut x = scaled(r.sinh(), &sphere_point(u));
                x.push(r.cosh());
                x
            }
            Family::Equidistant { r } => {
                let r = T::lit(*r);
                let q0 = (T::one() + sq(u)).sqrt();
                let mut x = scaled(r.cosh(), u);
                x.push(r.sinh());
                x.push(r.cosh() * q0);
                x
            }
            Family::Horosphere => {
                let h = sq(u) * T::lit(0.5);
                let mut x = u.to_vec();
                x.push(-h);
                x.push(T::one() + h);
                x
            }
            Family::TorusOfRevolution { big_r, r } => {
                let (a, v) = (u[0], u[1]);
                let rho = T::lit(*big_r) + T::lit(*r) * v.cos();
                vec![rho * a.cos(), rho * a.sin(), T::lit(*r) * v.sin()]
            }
            Family::Graph { f, .. } => {
                let mut x = u.to_vec();
                x.push(f.eval(u));
                x
            }
        }
    }

    /// Closed-form unit normal; positive principal curvatures for the
    /// convex families.
    pub fn normal<T: Real>(&self, u: &[T]) -> Vec<T> {
        match self {
            Family::RoundSphere { .. } => scaled(-T::one(), &sphere_point(u)),
            Family::Hyperplane => {
                let mut x = vec![T::zero(); u.len()];
                x.push(T::one());
                x
            }
            Family::ProductTorus { a, k } => {
                let a = T::lit(*a);
                let mut x = scaled(a.sin(), &sphere_point(&u[..*k]));
                x.extend(scaled(-a.cos(), &sphere_point(&u[*k..])));
                x
            }
            Family::SmallSphere { a } => {
                let a = T::lit(*a);
                let mut x = scaled(-a.cos(), &sphere_point(u));
                x.push(a.sin());
                x
            }
            Family::GeodesicSphere { r } => {
                let r = T::lit(*r);
                let mut x = scaled(-r.cosh(), &sphere_point(u));
                x.push(-r.sinh());
                x
            }
            Family::Equidistant { r } => {
                let r = T::lit(*r);
                let q0 = (T::one() + sq(u)).sqrt();
                let mut x = scaled(-r.sinh(), u);
                x.push(-r.cosh());
                x.push(-r.sinh() * q0);
                x
            }
            Family::Horosphere => {
                let h = sq(u) * T::lit(0.5);
                let mut x = scaled(-T::one(), u);
                x.push(h - T::one());
                x.push(-h);
                x
            }
            Family::TorusOfRevolution { .. } => {
                let (a, v) = (u[0], u[1]);
                vec![-v.cos() * a.cos(), -v.cos() * a.sin(), -v.sin()]
            }
            Family::Graph { f, .. } => {
                let (grad, _) = graph_derivatives(f, u);
                let w = (T::one() + sq(&grad)).sqrt();
                let mut x: Vec<T> = grad.iter().map(|&g| -g / w).collect();
                x.push(w.recip());
                x
            }
        }
    }

    /// Principal curvatures with respect to [`Family::normal`], ascending.
    pub fn curvatures<T: Real>(&self, u: &[T], n: usize) -> Vec<T> {
        let mut k: Vec<T> = match self {
            Family::RoundSphere { r } => vec![T::lit(*r).recip(); n],
            Family::Hyperplane => vec![T::zero(); n],
            Family::ProductTorus { a, k } => {
                let a = T::lit(*a);
                let mut v = vec![-a.tan(); *k];
                v.extend(vec![a.tan().recip(); n - k]);
                v
            }
            Family::SmallSphere { a } => vec![T::lit(*a).tan().recip(); n],
            Family::GeodesicSphere { r } => vec![T::lit(*r).tanh().recip(); n],
            Family::Equidistant { r } => vec![T::lit(*r).tanh(); n],
            Family::Horosphere => vec![T::one(); n],
            Family::TorusOfRevolution { big_r, r } => {
                let v = u[1];
                let r = T::lit(*r);
                vec![v.cos() / (T::lit(*big_r) + r * v.cos()), r.recip()]
            }
            Family::Graph { f, .. } => {
                let (grad, hess) = graph_derivatives(f, u);
                let w = (T::one() + sq(&grad)).sqrt();
                let g = Matrix::from_fn(n, n, |i, j| {
                    let d = if i == j { T::one() } else { T::zero() };
                    d + grad[i] * grad[j]
                });
                let b = Matrix::from_fn(n, n, |i, j| hess[(i, j)] / w);
                let l = g.cholesky().expect("graph metric is positive definite");
                let li = l.lower_inverse();
                let m = li.mul(&b).mul(&li.transpose()).symmetrized();
                symmetric_eigen(&m).values
            }
        };
        k.sort_by(|a, b| a.partial_cmp(b).unwrap());
        k
    }
}

fn sq<T: Real>(u: &[T]) -> T {
    u.iter().map(|&v| v * v).sum()
}

fn scaled<T: Real>(s: T, v: &[T]) -> Vec<T> {
    v.iter().map(|&x| s * x).collect()
}

/// Unit sphere `S^m ⊂ R^{m+1}` in azimuth/polar coordinates.
pub(crate) fn sphere_point<T: Real>(u: &[T]) -> Vec<T> {
    let m = u.len();
    let tail = |j: usize| -> T { u[j..].iter().fold(T::one(), |p, &a| p * a.sin()) };
    let mut x = Vec::with_capacity(m + 1);
    x.push(u[0].cos() * tail(1));
    x.push(u[0].sin() * tail(1));
    for j in 2..=m {
        x.push(u[j - 1].cos() * tail(j));
    }
    x
}

/// Gradient and Hessian of `f` through nested duals.
fn graph_derivatives<T: Real>(f: &Expression, u: &[T]) -> (Vec<T>, Matrix<T>) {
    let n = u.len();
    let mut grad = vec![T::zero(); n];
    let mut hess = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let vars: Vec<Dual<Dual<T>>> = (0..n)
                .map(|k| {
                    let dj = if k == j { T::one() } else { T::zero() };
                    let di = if k == i { T::one() } else { T::zero() };
                    Dual::new(Dual::new(u[k], dj), Dual::new(di, T::zero()))
                })
                .collect();
            let r = f.eval(&vars);
            hess[(i, j)] = r.eps.eps;
            if j == 0 {
                grad[i] = r.eps.re;
            }
        }
    }
    (grad, hess.symmetrized())
}

/// Builds a builtin chart on the family's default domain with
/// `points_per_axis` nodes per axis.
pub fn builtin_hypersurface<T: Real>(
    space: SpaceForm,
    family: Family,
    points_per_axis: usize,
) -> Result<HypersurfaceChart<T>> {
    HypersurfaceChart::builtin(space, family, false, points_per_axis)
}

/// Totally umbilic hypersurface with all principal curvatures equal to
/// `kappa`: hyperplane or sphere (`c = 0`), small sphere (`c = 1`), geodesic
/// sphere, horosphere or equidistant hypersurface (`c = -1`). Negative
/// curvatures use the opposite normal.
pub fn umbilic_hypersurface<T: Real>(
    space: SpaceForm,
    kappa: f64,
    points_per_axis: usize,
) -> Result<HypersurfaceChart<T>> {
    if !kappa.is_finite() {
        return Err(invalid("umbilic", format!("curvature must be finite, got {kappa}")));
    }
    let (family, flip) = match space.curvature {
        Curvature::Flat if kappa == 0.0 => (Family::Hyperplane, false),
        Curvature::Flat => (Family::RoundSphere { r: 1.0 / kappa.abs() }, kappa < 0.0),
        Curvature::Spherical => (Family::SmallSphere { a: (1.0f64).atan2(kappa) }, false),
        Curvature::Hyperbolic => {
            let k = kappa.abs();
            if (k - 1.0).abs() <= 1e-12 {
                (Family::Horosphere, kappa < 0.0)
            } else if k > 1.0 {
                (Family::GeodesicSphere { r: (1.0 / k).atanh() }, kappa < 0.0)
            } else {
                (Family::Equidistant { r: kappa.atanh() }, false)
            }
        }
    };
    HypersurfaceChart::builtin(space, family, flip, points_per_axis)
}

//! The height equation for marginally trapped normal-form immersions:
//!
//! `n·w′(τ) − Σ m_i (κ_i co(θ(τ)) + c si(θ(τ))) / (co(θ(τ)) − κ_i si(θ(τ))) = 0`,
//!
//! its root brackets between consecutive principal curvatures, pointwise and
//! grid solvers, and the slice, curve and null second fundamental form modes.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::derivatives2;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::hypersurface::{cluster, multiplicities, Cluster, Grid, HypersurfaceChart};
use crate::real::Real;
use crate::roots::{brent, RootError};
use crate::spaceforms::{umbilic_hypersurface, Curvature, SpaceForm};
use crate::warp::WarpProfile;

pub const MAX_ITER: usize = 200;
/// Bracket tolerance in `s`.
pub const SOLVE_XTOL: f64 = 1e-12;
pub const RESIDUAL_TOL: f64 = 1e-9;
/// `|co − κ si|` below which the residual is singular.
pub const SINGULAR_TOL: f64 = 1e-12;
pub const COLLISION_TOL: f64 = 1e-10;
pub const SLICE_TOL: f64 = 1e-7;
const EDGE_TOL: f64 = 1e-12;

fn f64s<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    Admissible,
    /// `c = 0` and one of the pair vanishes.
    ZeroCurvature,
    /// `c = 0` and the pair straddles zero.
    OppositeSigns,
    /// `c = −1` and a curvature lies in `[−1, 1]`.
    InsideUnitInterval,
    /// `c = −1` with `κ_i < −1` and `κ_{i+1} > 1`.
    SplitRegions,
    /// `κ² + c = 0` at an endpoint.
    Boundary,
}

impl Admissibility {
    pub fn reason(self) -> &'static str {
        match self {
            Admissibility::Admissible => "admissible",
            Admissibility::ZeroCurvature => "κ_iκ_{i+1} = 0",
            Admissibility::OppositeSigns => "κ_i < 0 < κ_{i+1}: ct has a pole between",
            Admissibility::InsideUnitInterval => "a curvature lies in [-1, 1]",
            Admissibility::SplitRegions => "κ_i < -1 and κ_{i+1} > 1 lie in different regions",
            Admissibility::Boundary => "boundary root: κ² + c = 0 at an endpoint",
        }
    }
}

/// Candidate interval for the root between clusters `index` and `index + 1`.
/// `ct` maps `(s_lo, s_hi)` onto `(κ_lo, κ_hi)`, decreasingly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootBracket<T> {
    pub index: usize,
    pub kappa_lo: T,
    pub kappa_hi: T,
    pub s_lo: T,
    pub s_hi: T,
    pub admissibility: Admissibility,
    /// `G` at the endpoints (NaN when not admissible).
    pub g_lo: T,
    pub g_hi: T,
}

impl<T: Real> RootBracket<T> {
    pub fn is_admissible(&self) -> bool {
        self.admissibility == Admissibility::Admissible
    }

    pub fn width(&self) -> T {
        self.s_hi - self.s_lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BracketSet<T> {
    pub brackets: Vec<RootBracket<T>>,
    /// Solution count given by the closed formula (`p − 1`, `#{κ ≠ 0} − 1`
    /// or `#{|κ| > 1} − 2`); may disagree with the admissible count.
    pub q: i64,
}

impl<T: Real> BracketSet<T> {
    pub fn admissible(&self) -> impl Iterator<Item = &RootBracket<T>> {
        self.brackets.iter().filter(|b| b.is_admissible())
    }

    pub fn admissible_count(&self) -> usize {
        self.admissible().count()
    }

    /// The `branch`-th admissible bracket.
    pub fn branch(&self, branch: usize) -> Result<&RootBracket<T>> {
        self.admissible().nth(branch).ok_or(Error::NoSuchBranch {
            branch,
            available: self.admissible_count(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Solution<T> {
    pub bracket: usize,
    /// Period shift `k` (the root lies in the bracket translated by `kπ`).
    pub window: i64,
    pub s: T,
    pub tau: T,
    pub residual: T,
    pub iterations: usize,
}

/// Search interval after clipping to `θ(I)`.
struct Span<T> {
    lo: T,
    hi: T,
    g_lo: T,
    g_hi: T,
    clipped: bool,
}

#[derive(Clone, Debug)]
pub struct MTEquation<'a, T: Real> {
    warp: &'a WarpProfile<T>,
    space: SpaceForm,
    clusters: Vec<Cluster<T>>,
    universe: (T, T),
}

impl<'a, T: Real> MTEquation<'a, T> {
    pub fn new(warp: &'a WarpProfile<T>, space: SpaceForm, clusters: Vec<Cluster<T>>) -> Result<Self> {
        let universe = warp.theta_range();
        Self::with_universe(warp, space, clusters, universe)
    }

    /// As [`MTEquation::new`] with a precomputed `θ(I)`.
    pub fn with_universe(
        warp: &'a WarpProfile<T>,
        space: SpaceForm,
        clusters: Vec<Cluster<T>>,
        universe: (T, T),
    ) -> Result<Self> {
        let total: usize = clusters.iter().map(|c| c.multiplicity).sum();
        if total != space.n {
            return Err(Error::InvalidInput(format!(
                "multiplicities sum to {total}, expected n = {}",
                space.n
            )));
        }
        if clusters.windows(2).any(|w| !(w[0].kappa < w[1].kappa)) {
            return Err(Error::InvalidInput(
                "principal curvatures must be distinct and increasing".into(),
            ));
        }
        if clusters.iter().any(|c| !c.kappa.is_finite() || c.multiplicity == 0) {
            return Err(Error::InvalidInput("clusters need finite κ and m ≥ 1".into()));
        }
        Ok(Self {
            warp,
            space,
            clusters,
            universe,
        })
    }

    /// Clusters the ascending principal curvatures first.
    pub fn from_curvatures(warp: &'a WarpProfile<T>, space: SpaceForm, sorted: &[T]) -> Result<Self> {
        Self::new(warp, space, cluster(sorted))
    }

    pub fn clusters(&self) -> &[Cluster<T>] {
        &self.clusters
    }

    pub fn space(&self) -> SpaceForm {
        self.space
    }

    pub fn warp(&self) -> &'a WarpProfile<T> {
        self.warp
    }

    /// `θ(I)`.
    pub fn universe(&self) -> (T, T) {
        self.universe
    }

    pub fn n(&self) -> usize {
        self.space.n
    }

    fn curvature(&self) -> Curvature {
        self.space.curvature
    }

    /// Residual at conformal time `s` given `w′`; `None` on a κ collision.
    pub fn residual_in_s(&self, s: T, dw: T) -> Option<T> {
        let c = self.curvature();
        let (co, si) = (c.co(s), c.si(s));
        let mut sum = T::zero();
        for cl in &self.clusters {
            let den = co - cl.kappa * si;
            if den.abs() < T::lit(SINGULAR_TOL) {
                return None;
            }
            sum = sum + T::lit(cl.multiplicity as f64) * (cl.kappa * co + c.c::<T>() * si) / den;
        }
        Some(T::lit(self.n() as f64) * dw - sum)
    }

    /// Left side of the height equation at `t ∈ I`.
    pub fn mt_residual(&self, t: T) -> Result<T> {
        let s = self.warp.theta(t)?;
        let dw = self.warp.dw(t)?;
        self.residual_in_s(s, dw).ok_or_else(|| Error::SingularResidual {
            t: t.to_f64_lossy(),
            reason: "ct(θ(t)) coincides with a principal curvature".into(),
        })
    }

    /// Residual numerator after clearing `Π(co − κ_k si)`; factor `skip`
    /// is taken as exactly zero.
    fn cleared(&self, s: T, dw: T, skip: Option<usize>) -> T {
        let c = self.curvature();
        let (co, si) = (c.co(s), c.si(s));
        let f: Vec<T> = self
            .clusters
            .iter()
            .enumerate()
            .map(|(k, cl)| if Some(k) == skip { T::zero() } else { co - cl.kappa * si })
            .collect();
        let product_except = |e: usize| {
            f.iter()
                .enumerate()
                .filter(|&(j, _)| j != e)
                .fold(T::one(), |a, (_, &v)| a * v)
        };
        let full = f.iter().fold(T::one(), |a, &v| a * v);
        let mut p = T::lit(self.n() as f64) * dw * full;
        for (k, cl) in self.clusters.iter().enumerate() {
            p = p - T::lit(cl.multiplicity as f64) * (cl.kappa * co + c.c::<T>() * si) * product_except(k);
        }
        p
    }

    fn si_sign_power(&self, s: T) -> T {
        let si = self.curvature().si(s);
        if si < T::zero() && self.clusters.len() % 2 == 1 {
            -T::one()
        } else {
            T::one()
        }
    }

    /// `G(s)` in pole-free form for a given `w′`: `−P(s)·sign(si(s))^p`,
    /// where `P = si^p · Π(ct − κ_k) · residual`.
    pub fn g_pole_free(&self, s: T, dw: T) -> T {
        -self.cleared(s, dw, None) * self.si_sign_power(s)
    }

    /// `G(s)` with `w′` taken at `θ⁻¹(s)`.
    pub fn g(&self, s: T) -> Result<T> {
        let t = self.warp.theta_inverse(s)?;
        Ok(self.g_pole_free(s, self.warp.dw(t)?))
    }

    /// `G` written with `ct`, for cross-checks away from poles.
    pub fn g_rational(&self, s: T, dw: T) -> Result<T> {
        let c = self.curvature();
        let ct = c.ct(s)?;
        let full = self.clusters.iter().fold(T::one(), |a, cl| a * (ct - cl.kappa));
        let mut g = -T::lit(self.n() as f64) * dw * full;
        for (k, cl) in self.clusters.iter().enumerate() {
            let others = self
                .clusters
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .fold(T::one(), |a, (_, o)| a * (ct - o.kappa));
            g = g + T::lit(cl.multiplicity as f64) * (ct * cl.kappa + c.c::<T>()) * others;
        }
        Ok(g)
    }

    fn classify(&self, a: T, b: T) -> Admissibility {
        let edge = T::lit(EDGE_TOL);
        match self.curvature() {
            Curvature::Spherical => Admissibility::Admissible,
            Curvature::Flat => {
                if a.abs() < edge || b.abs() < edge {
                    Admissibility::ZeroCurvature
                } else if (a < T::zero()) != (b < T::zero()) {
                    Admissibility::OppositeSigns
                } else {
                    Admissibility::Admissible
                }
            }
            Curvature::Hyperbolic => {
                // +2 beyond 1, +1 at 1, 0 inside, −1 at −1, −2 beyond −1
                let region = |k: T| {
                    if (k - T::one()).abs() < edge {
                        1
                    } else if (k + T::one()).abs() < edge {
                        -1
                    } else if k > T::one() {
                        2
                    } else if k < -T::one() {
                        -2
                    } else {
                        0
                    }
                };
                match (region(a), region(b)) {
                    (2, 2) | (-2, -2) => Admissibility::Admissible,
                    (1, 2) | (-2, -1) => Admissibility::Boundary,
                    (-2, 2) => Admissibility::SplitRegions,
                    _ => Admissibility::InsideUnitInterval,
                }
            }
        }
    }

    fn formula_q(&self) -> i64 {
        let p = self.clusters.len() as i64;
        let count = |f: &dyn Fn(T) -> bool| self.clusters.iter().filter(|c| f(c.kappa)).count() as i64;
        match self.curvature() {
            Curvature::Spherical => p - 1,
            Curvature::Flat => count(&|k| k.abs() >= T::lit(EDGE_TOL)) - 1,
            Curvature::Hyperbolic => count(&|k| k.abs() > T::one() + T::lit(EDGE_TOL)) - 2,
        }
    }

    /// One bracket per consecutive pair of clusters, with the admissibility
    /// verdict and the formula count `q`.
    pub fn brackets(&self) -> BracketSet<T> {
        let c = self.curvature();
        let brackets = self
            .clusters
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (a, b) = (w[0].kappa, w[1].kappa);
                let admissibility = self.classify(a, b);
                let ends = match admissibility {
                    Admissibility::Admissible | Admissibility::Boundary => {
                        c.arc_ct(b).zip(c.arc_ct(a))
                    }
                    _ => None,
                };
                let (s_lo, s_hi) = ends.unwrap_or((T::nan(), T::nan()));
                let (g_lo, g_hi) = if ends.is_some() {
                    let g_lo = -self.cleared(s_lo, T::zero(), Some(i + 1)) * self.si_sign_power(s_lo);
                    let g_hi = -self.cleared(s_hi, T::zero(), Some(i)) * self.si_sign_power(s_hi);
                    (g_lo, g_hi)
                } else {
                    (T::nan(), T::nan())
                };
                RootBracket {
                    index: i,
                    kappa_lo: a,
                    kappa_hi: b,
                    s_lo,
                    s_hi,
                    admissibility,
                    g_lo,
                    g_hi,
                }
            })
            .collect();
        BracketSet {
            brackets,
            q: self.formula_q(),
        }
    }

    fn check_admissible(&self, bracket: &RootBracket<T>) -> Result<()> {
        match bracket.admissibility {
            Admissibility::Admissible => Ok(()),
            Admissibility::Boundary => Err(Error::BoundaryRoot { index: bracket.index }),
            a => Err(Error::InadmissibleBracket {
                index: bracket.index,
                reason: a.reason().into(),
            }),
        }
    }

    fn outside(&self) -> Error {
        Error::HeightOutsideUniverse {
            lo: self.universe.0.to_f64_lossy(),
            hi: self.universe.1.to_f64_lossy(),
        }
    }

    /// `G` with failures mapped to "outside the universe" where `θ⁻¹` fails.
    fn g_checked(&self, s: T) -> Result<T> {
        self.g(s).map_err(|e| match e {
            Error::ThetaOutOfRange { .. } | Error::OutsideInterval { .. } => self.outside(),
            e => e,
        })
    }

    fn span(&self, bracket: &RootBracket<T>, shift: T) -> Result<Span<T>> {
        let (ulo, uhi) = self.universe;
        let pad = |v: T| T::tol(SOLVE_XTOL) * (T::one() + v.abs());
        let (mut lo, mut hi) = (bracket.s_lo + shift, bracket.s_hi + shift);
        let (mut g_lo, mut g_hi) = (bracket.g_lo, bracket.g_hi);
        let mut clipped = false;
        if lo <= ulo {
            lo = ulo + pad(ulo);
            clipped = true;
        }
        if hi >= uhi {
            hi = uhi - pad(uhi);
            clipped = true;
        }
        if !(lo < hi) {
            return Err(self.outside());
        }
        if lo != bracket.s_lo + shift {
            g_lo = self.g_checked(lo)?;
        }
        if hi != bracket.s_hi + shift {
            g_hi = self.g_checked(hi)?;
        }
        Ok(Span {
            lo,
            hi,
            g_lo,
            g_hi,
            clipped,
        })
    }

    fn brent_on(&self, span: &Span<T>, a: T, b: T) -> Result<(T, usize)> {
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let f = |s: T| {
            if s == span.lo {
                span.g_lo
            } else if s == span.hi {
                span.g_hi
            } else {
                match self.g_checked(s) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        T::nan()
                    }
                }
            }
        };
        // xtol 0: Brent stops at 2ε|s|, well inside the 1e-12 bracket tolerance
        let root = brent(f, a, b, T::zero(), MAX_ITER);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        match root {
            Ok(r) => Ok((r.x, r.iterations)),
            Err(RootError::NoSignChange { .. }) if span.clipped => Err(self.outside()),
            Err(e) => Err(e.into()),
        }
    }

    fn finish(&self, bracket: &RootBracket<T>, window: i64, s: T, iterations: usize) -> Result<Solution<T>> {
        let shift = T::PI() * T::lit(window as f64);
        if !(s > bracket.s_lo + shift && s < bracket.s_hi + shift) {
            return Err(Error::BoundaryRoot { index: bracket.index });
        }
        let tau = self.warp.theta_inverse(s).map_err(|_| self.outside())?;
        let residual = self.mt_residual(tau)?.abs();
        if !(residual <= T::tol(RESIDUAL_TOL)) {
            return Err(Error::ResidualTooLarge {
                t: tau.to_f64_lossy(),
                residual: residual.to_f64_lossy(),
            });
        }
        Ok(Solution {
            bracket: bracket.index,
            window,
            s,
            tau,
            residual,
            iterations,
        })
    }

    fn window_shift(&self, window: i64) -> Result<T> {
        if window != 0 && self.curvature() != Curvature::Spherical {
            return Err(Error::InvalidInput("period windows exist only for c = 1".into()));
        }
        Ok(T::PI() * T::lit(window as f64))
    }

    /// Root of `G` inside an admissible bracket, by Brent's method.
    pub fn solve_point(&self, bracket: &RootBracket<T>) -> Result<Solution<T>> {
        self.solve_window(bracket, 0)
    }

    /// Root inside the bracket translated by `window·π` (`c = 1`).
    pub fn solve_window(&self, bracket: &RootBracket<T>, window: i64) -> Result<Solution<T>> {
        self.check_admissible(bracket)?;
        let span = self.span(bracket, self.window_shift(window)?)?;
        let (s, it) = self.brent_on(&span, span.lo, span.hi)?;
        self.finish(bracket, window, s, it)
    }

    /// For `c = 1`: the roots in every translate `(s_lo + kπ, s_hi + kπ)`
    /// whose period window `[kπ, (k+1)π]` lies inside `θ(I)`, `|k| ≤ max_window`.
    /// Other curvatures return the single root.
    pub fn periodic_roots(&self, bracket: &RootBracket<T>, max_window: i64) -> Result<Vec<Solution<T>>> {
        if self.curvature() != Curvature::Spherical {
            return Ok(vec![self.solve_point(bracket)?]);
        }
        self.check_admissible(bracket)?;
        let (ulo, uhi) = self.universe;
        let mut out = Vec::new();
        for k in -max_window..=max_window {
            let a = T::PI() * T::lit(k as f64);
            let b = T::PI() * T::lit((k + 1) as f64);
            if a >= ulo && b <= uhi {
                out.push(self.solve_window(bracket, k)?);
            }
        }
        Ok(out)
    }

    /// Root on the branch through `seed`: the search interval grows around
    /// `seed` until `G` changes sign, so ties go to the nearest root.
    pub fn solve_near(&self, bracket: &RootBracket<T>, seed: T) -> Result<Solution<T>> {
        self.check_admissible(bracket)?;
        if !(bracket.width() >= T::lit(COLLISION_TOL)) {
            return Err(Error::BranchCollision {
                width: bracket.width().to_f64_lossy(),
            });
        }
        let window = if self.curvature() == Curvature::Spherical && seed.is_finite() {
            (seed / T::PI()).floor().to_f64_lossy() as i64
        } else {
            0
        };
        let span = self.span(bracket, self.window_shift(window)?)?;
        let seed = if seed > span.lo && seed < span.hi {
            seed
        } else {
            (span.lo + span.hi) * T::lit(0.5)
        };
        let mut d = (span.hi - span.lo) * T::lit(1e-3);
        loop {
            let a = (seed - d).max(span.lo);
            let b = (seed + d).min(span.hi);
            if a == span.lo && b == span.hi {
                let (s, it) = self.brent_on(&span, a, b)?;
                return self.finish(bracket, window, s, it);
            }
            let ga = if a == span.lo { span.g_lo } else { self.g_checked(a)? };
            let gb = if b == span.hi { span.g_hi } else { self.g_checked(b)? };
            if ga * gb <= T::zero() {
                let (s, it) = self.brent_on(&span, a, b)?;
                let s_lo = bracket.s_lo + self.window_shift(window)?;
                let s_hi = bracket.s_hi + self.window_shift(window)?;
                if (s - s_lo).min(s_hi - s) < T::lit(COLLISION_TOL) {
                    return Err(Error::BranchCollision {
                        width: bracket.width().to_f64_lossy(),
                    });
                }
                return self.finish(bracket, window, s, it);
            }
            d = d * T::lit(4.0);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldFailure {
    pub index: usize,
    pub u: Vec<f64>,
    pub reason: String,
}

/// Solved height `τ` on a chart grid for one branch.
#[derive(Clone, Debug)]
pub struct HeightField<T> {
    pub grid: Grid<T>,
    /// Conformal time `θ(τ)`; NaN where unsolved.
    pub s: Vec<T>,
    pub tau: Vec<T>,
    pub residual: Vec<T>,
    /// Admissible-branch index requested.
    pub branch_id: usize,
    /// Cluster pair index of that branch.
    pub pair: usize,
    pub pattern: Vec<usize>,
    pub failures: Vec<FieldFailure>,
}

impl<T: Real> HeightField<T> {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn is_solved(&self, i: usize) -> bool {
        self.tau[i].is_finite()
    }

    pub fn max_residual(&self) -> T {
        self.residual
            .iter()
            .filter(|r| r.is_finite())
            .fold(T::zero(), |m, &r| m.max(r))
    }

    /// Tracker for this branch on `chart`.
    pub fn tracker<'a>(&self, chart: &'a HypersurfaceChart<T>, warp: &'a WarpProfile<T>) -> BranchTracker<'a, T> {
        BranchTracker {
            chart,
            warp,
            universe: warp.theta_range(),
            pattern: self.pattern.clone(),
            pair: self.pair,
        }
    }

    /// Seed for an arbitrary parameter: `s` at the nearest grid node.
    pub fn seed_for(&self, u: &[T]) -> Option<T> {
        let s = self.s[self.grid.nearest(u)];
        s.is_finite().then_some(s)
    }
}

/// Follows one root branch across a chart with a fixed cluster pattern.
pub struct BranchTracker<'a, T: Real> {
    chart: &'a HypersurfaceChart<T>,
    warp: &'a WarpProfile<T>,
    universe: (T, T),
    pattern: Vec<usize>,
    pair: usize,
}

impl<'a, T: Real> BranchTracker<'a, T> {
    pub fn new(
        chart: &'a HypersurfaceChart<T>,
        warp: &'a WarpProfile<T>,
        universe: (T, T),
        pattern: Vec<usize>,
        pair: usize,
    ) -> Self {
        Self {
            chart,
            warp,
            universe,
            pattern,
            pair,
        }
    }

    pub fn equation_at(&self, u: &[T]) -> Result<MTEquation<'a, T>> {
        let clusters = self.chart.clusters_at(u)?;
        let found = multiplicities(&clusters);
        if found != self.pattern {
            return Err(Error::ClusterPatternChanged {
                expected: self.pattern.clone(),
                found,
                u: f64s(u),
            });
        }
        MTEquation::with_universe(self.warp, self.chart.space(), clusters, self.universe)
    }

    pub fn solve_at(&self, u: &[T], seed: T) -> Result<Solution<T>> {
        let eq = self.equation_at(u)?;
        let set = eq.brackets();
        eq.solve_near(&set.brackets[self.pair], seed)
    }
}

/// Solves the height equation at every grid node of `chart` on the
/// `branch`-th admissible bracket of the centre node, continuing the root
/// ring by ring outward from the centre.
pub fn solve_field<T: Real>(chart: &HypersurfaceChart<T>, warp: &WarpProfile<T>, branch: usize) -> Result<HeightField<T>> {
    let grid = chart.grid().clone();
    let universe = warp.theta_range();
    let seed = grid.center_index();
    let u0 = grid.point(seed);
    let eq = MTEquation::with_universe(warp, chart.space(), chart.clusters_at(&u0)?, universe)?;
    let set = eq.brackets();
    let bracket = *set.branch(branch)?;
    let first = eq.solve_point(&bracket)?;
    let tracker = BranchTracker {
        chart,
        warp,
        universe,
        pattern: multiplicities(eq.clusters()),
        pair: bracket.index,
    };
    let len = grid.len();
    let mut s = vec![T::nan(); len];
    let mut tau = vec![T::nan(); len];
    let mut residual = vec![T::nan(); len];
    let mut failures = Vec::new();
    s[seed] = first.s;
    tau[seed] = first.tau;
    residual[seed] = first.residual;
    for ring in grid.rings(seed).into_iter().skip(1) {
        let results: Vec<(usize, Result<Solution<T>>)> = ring
            .par_iter()
            .map(|&i| {
                let from = grid
                    .neighbors(i)
                    .into_iter()
                    .filter(|&j| s[j].is_finite())
                    .min();
                let r = match from {
                    Some(j) => tracker.solve_at(&grid.point(i), s[j]),
                    None => Err(Error::InvalidInput("no solved neighbour".into())),
                };
                (i, r)
            })
            .collect();
        for (i, r) in results {
            match r {
                Ok(sol) => {
                    s[i] = sol.s;
                    tau[i] = sol.tau;
                    residual[i] = sol.residual;
                }
                Err(e) => failures.push(FieldFailure {
                    index: i,
                    u: f64s(&grid.point(i)),
                    reason: e.to_string(),
                }),
            }
        }
    }
    Ok(HeightField {
        grid,
        s,
        tau,
        residual,
        branch_id: branch,
        pair: bracket.index,
        pattern: tracker.pattern,
        failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub t: f64,
    pub w_prime: f64,
    pub min_mean_curvature: f64,
    pub max_mean_curvature: f64,
    /// `max |H_Q − w′(T)|` over the grid.
    pub max_defect: f64,
    pub points: usize,
    pub is_mt: bool,
}

/// A hypersurface placed in the slice `t = T` is marginally trapped iff its
/// mean curvature `(1/n)Σκ_i` equals `w′(T)`.
pub fn slice_check<T: Real>(chart: &HypersurfaceChart<T>, warp: &WarpProfile<T>, t: T) -> Result<SliceReport> {
    let dw = warp.dw(t)?;
    let n = T::lit(chart.space().n as f64);
    let h: Vec<T> = chart
        .grid()
        .points()
        .par_iter()
        .map(|u| Ok(chart.curvatures_at(u)?.into_iter().sum::<T>() / n))
        .collect::<Result<_>>()?;
    let max_defect = h.iter().fold(T::zero(), |m, &v| m.max((v - dw).abs()));
    let min = h.iter().fold(T::infinity(), |m, &v| m.min(v));
    let max = h.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    Ok(SliceReport {
        t: t.to_f64_lossy(),
        w_prime: dw.to_f64_lossy(),
        min_mean_curvature: min.to_f64_lossy(),
        max_mean_curvature: max.to_f64_lossy(),
        max_defect: max_defect.to_f64_lossy(),
        points: h.len(),
        is_mt: max_defect <= T::tol(SLICE_TOL),
    })
}

fn require_curve(space: SpaceForm) -> Result<()> {
    if space.n != 1 {
        return Err(Error::InvalidInput(format!(
            "curve mode needs n = 1, got n = {}",
            space.n
        )));
    }
    Ok(())
}

/// Curvature `(w′ct(θ) − c)/(w′ + ct(θ))` at `τ` that a curve of `Q²_c`
/// must have for its lift to have null acceleration.
pub fn curve_kappa<T: Real>(warp: &WarpProfile<T>, space: SpaceForm, tau: T) -> Result<T> {
    require_curve(space)?;
    warp.omega(space.curvature, tau).map_err(|e| match e {
        Error::SingularOmega { t, denominator } => Error::CurveCusp { tau: t, denominator },
        e => e,
    })
}

#[derive(Clone, Debug)]
pub struct CurveSample<T> {
    /// Arc length of `γ`.
    pub sigma: T,
    pub tau: T,
    pub dtau: T,
    pub ddtau: T,
    pub kappa: T,
    pub dkappa: T,
    pub gamma: Vec<T>,
    pub tangent: Vec<T>,
    pub normal: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct NullCurve<T> {
    pub space: SpaceForm,
    pub step: T,
    pub samples: Vec<CurveSample<T>>,
}

impl<T: Real> NullCurve<T> {
    /// Lift `(co(θ(τ))γ + si(θ(τ))N, τ)` of sample `i`.
    pub fn lift(&self, warp: &WarpProfile<T>, i: usize) -> Result<Vec<T>> {
        let p = &self.samples[i];
        let c = self.space.curvature;
        let th = warp.theta(p.tau)?;
        let mut v = crate::linalg::lincomb(c.co(th), &p.gamma, c.si(th), &p.normal);
        v.push(p.tau);
        Ok(v)
    }
}

/// Initial point and Frenet frame: `e₃, e₁, e₂` on the sphere and the
/// hyperboloid, the origin with `e₁, e₂` in the plane.
fn initial_frame<T: Real>(space: SpaceForm) -> (Vec<T>, Vec<T>, Vec<T>) {
    let amb = space.ambient_dim();
    let e = |i: usize| crate::fd::unit::<T>(amb, i);
    let gamma = match space.curvature {
        Curvature::Flat => vec![T::zero(); amb],
        _ => e(2),
    };
    (gamma, e(0), e(1))
}

/// Integrates the Frenet equations `γ′ = T, T′ = −cγ + κN, N′ = −κT` with
/// `κ(σ) = Ω(τ(σ))` by RK4 over `σ ∈ [0, length]`.
pub fn build_null_curve<T: Real>(
    warp: &WarpProfile<T>,
    space: SpaceForm,
    tau_profile: &Expression,
    length: T,
    step: T,
) -> Result<NullCurve<T>> {
    require_curve(space)?;
    if !(length > T::zero() && step > T::zero()) {
        return Err(Error::InvalidInput("curve length and step must be positive".into()));
    }
    let c = space.curvature.c::<T>();
    let amb = space.ambient_dim();
    let kappa = |sigma: T| -> Result<T> {
        let tau = tau_profile.eval1(sigma);
        curve_kappa(warp, space, tau)
    };
    let rhs = |sigma: T, y: &[T]| -> Result<Vec<T>> {
        let k = kappa(sigma)?;
        let (g, t, nn) = (&y[..amb], &y[amb..2 * amb], &y[2 * amb..]);
        let mut out = Vec::with_capacity(3 * amb);
        out.extend_from_slice(t);
        out.extend((0..amb).map(|i| -c * g[i] + k * nn[i]));
        out.extend((0..amb).map(|i| -k * t[i]));
        Ok(out)
    };
    let sample = |sigma: T, y: &[T]| -> Result<CurveSample<T>> {
        let (tau, dtau, ddtau) = derivatives2(sigma, |x| tau_profile.eval1(x));
        let k = curve_kappa(warp, space, tau)?;
        let h = T::lit(1e-4) * (T::one() + tau.abs());
        let mut dk = T::zero();
        for (off, wgt) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
            dk = dk + T::lit(wgt) * curve_kappa(warp, space, tau + T::lit(off) * h)?;
        }
        Ok(CurveSample {
            sigma,
            tau,
            dtau,
            ddtau,
            kappa: k,
            dkappa: dk / (T::lit(12.0) * h) * dtau,
            gamma: y[..amb].to_vec(),
            tangent: y[amb..2 * amb].to_vec(),
            normal: y[2 * amb..].to_vec(),
        })
    };
    let (g0, t0, n0) = initial_frame::<T>(space);
    let mut y: Vec<T> = g0.into_iter().chain(t0).chain(n0).collect();
    let steps = (length / step).ceil().to_f64_lossy() as usize;
    let h = length / T::lit(steps as f64);
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(sample(T::zero(), &y)?);
    let half = T::lit(0.5);
    let axpy = |a: &[T], s: T, b: &[T]| -> Vec<T> { a.iter().zip(b).map(|(&x, &d)| x + s * d).collect() };
    for k in 0..steps {
        let sigma = h * T::lit(k as f64);
        let k1 = rhs(sigma, &y)?;
        let k2 = rhs(sigma + half * h, &axpy(&y, half * h, &k1))?;
        let k3 = rhs(sigma + half * h, &axpy(&y, half * h, &k2))?;
        let k4 = rhs(sigma + h, &axpy(&y, h, &k3))?;
        for i in 0..y.len() {
            y[i] = y[i] + h / T::lit(6.0) * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
        samples.push(sample(h * T::lit((k + 1) as f64), &y)?);
    }
    Ok(NullCurve {
        space,
        step: h,
        samples,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "snake_case")]
pub enum Null2ffRecipe {
    /// `Ω ≡ c0`: a totally umbilic chart of curvature `c0`, any height.
    Umbilic { c0: f64, max_deviation: f64 },
    /// `Ω` not constant: the slice `t = T` over a totally umbilic chart of
    /// curvature `w′(T)`.
    Slice { t: f64, curvature: f64 },
}

impl Null2ffRecipe {
    pub fn curvature(&self) -> f64 {
        match *self {
            Null2ffRecipe::Umbilic { c0, .. } => c0,
            Null2ffRecipe::Slice { curvature, .. } => curvature,
        }
    }

    /// The umbilic chart the recipe calls for.
    pub fn chart<T: Real>(&self, space: SpaceForm, points_per_axis: usize) -> Result<HypersurfaceChart<T>> {
        umbilic_hypersurface(space, self.curvature(), points_per_axis)
    }
}

/// Chooses the null second fundamental form construction for `warp`;
/// `slice_t` picks the slice (default `t₀`) when `Ω` is not constant.
pub fn null_2ff_mode<T: Real>(warp: &WarpProfile<T>, space: SpaceForm, slice_t: Option<T>) -> Result<Null2ffRecipe> {
    let oc = warp.is_omega_constant(space.curvature, 64)?;
    if oc.constant {
        return Ok(Null2ffRecipe::Umbilic {
            c0: oc.mean,
            max_deviation: oc.max_deviation,
        });
    }
    let t = slice_t.unwrap_or_else(|| warp.t0());
    Ok(Null2ffRecipe::Slice {
        t: t.to_f64_lossy(),
        curvature: warp.dw(t)?.to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaceforms::{builtin_hypersurface, Family};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

    fn space(c: i8, n: usize) -> SpaceForm {
        SpaceForm::from_sign(c, n).unwrap()
    }

    fn flat_warp() -> WarpProfile<f64> {
        WarpProfile::constant(1.0).unwrap()
    }

    fn cl(k: &[(f64, usize)]) -> Vec<Cluster<f64>> {
        k.iter()
            .map(|&(kappa, multiplicity)| Cluster { kappa, multiplicity })
            .collect()
    }

    fn clifford(a: f64) -> Vec<Cluster<f64>> {
        cl(&[(-a.tan(), 1), (1.0 / a.tan(), 1)])
    }

    #[test]
    fn clifford_root_matches_quadratic() {
        let w = flat_warp();
        let eq = MTEquation::new(&w, space(1, 2), clifford(FRAC_PI_6)).unwrap();
        let set = eq.brackets();
        assert_eq!(set.q, 1);
        assert_eq!(set.admissible_count(), 1);
        let sol = eq.solve_point(set.branch(0).unwrap()).unwrap();
        assert!((sol.s - 5.0 * PI / 12.0).abs() < 1e-12);
        assert!((1.0 / sol.s.tan() - (2.0 - 3f64.sqrt())).abs() < 1e-12);
        assert!((sol.tau - 5.0 * PI / 12.0).abs() < 1e-12);
        assert!(sol.residual <= 1e-9);
    }

    #[test]
    fn minimal_clifford_root_is_a_quarter_turn() {
        let w = flat_warp();
        let eq = MTEquation::new(&w, space(1, 2), clifford(FRAC_PI_4)).unwrap();
        let sol = eq.solve_point(&eq.brackets().brackets[0]).unwrap();
        assert!((sol.s - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn flat_pair_root() {
        let w = flat_warp();
        let eq = MTEquation::new(&w, space(0, 2), cl(&[(1.0, 1), (2.0, 1)])).unwrap();
        let sol = eq.solve_point(&eq.brackets().brackets[0]).unwrap();
        assert!((sol.s - 0.75).abs() < 1e-12);
        assert!((sol.tau - 0.75).abs() < 1e-12);
    }

    #[test]
    fn hyperplane_residual_vanishes() {
        let w = flat_warp();
        let eq = MTEquation::new(&w, space(0, 3), cl(&[(0.0, 3)])).unwrap();
        for t in [-3.0, -0.2, 0.0, 0.7, 5.0] {
            assert_eq!(eq.mt_residual(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn sphere_slice_candidate_residual() {
        // residual at T vanishes iff the displaced sphere's mean curvature is w′(T)
        let r = 2.0f64;
        let w = WarpProfile::new("exp(t)", f64::NEG_INFINITY, f64::INFINITY, Some(-r.ln())).unwrap();
        let eq = MTEquation::new(&w, space(0, 2), cl(&[(1.0 / r, 2)])).unwrap();
        assert!(eq.mt_residual(-r.ln()).unwrap().abs() < 1e-15);
        let t = 0.3;
        let s = w.theta(t).unwrap();
        let displaced = crate::hypersurface::displaced_curvature(Curvature::Flat, 1.0 / r, s);
        let want = 2.0 * (t.exp() - displaced);
        assert!((eq.mt_residual(t).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn collision_is_singular() {
        let w = flat_warp();
        let eq = MTEquation::new(&w, space(0, 2), cl(&[(1.0, 1), (2.0, 1)])).unwrap();
        assert!(matches!(eq.mt_residual(0.5), Err(Error::SingularResidual { .. })));
    }

    #[test]
    fn invalid_clusters_are_rejected() {
        let w = flat_warp();
        assert!(MTEquation::new(&w, space(0, 2), cl(&[(1.0, 1)])).is_err());
        assert!(MTEquation::new(&w, space(0, 2), cl(&[(2.0, 1), (1.0, 1)])).is_err());
    }

    #[test]
    fn bracket_examples() {
        let w = flat_warp();
        let eq = MTEquation::new(&w, space(0, 3), cl(&[(0.0, 1), (1.0, 2)])).unwrap();
        let set = eq.brackets();
        assert_eq!(set.admissible_count(), 0);
        assert_eq!(set.q, 0);
        assert_eq!(set.brackets[0].admissibility, Admissibility::ZeroCurvature);

        let eq = MTEquation::from_curvatures(&w, space(-1, 3), &[0.5, 1.5, 2.0]).unwrap();
        let set = eq.brackets();
        assert_eq!(set.admissible_count(), 1);
        assert!(set.brackets[1].is_admissible());
        assert_eq!(set.brackets[0].admissibility, Admissibility::InsideUnitInterval);
        assert_eq!(set.q, 0);

        let eq = MTEquation::from_curvatures(&w, space(-1, 2), &[1.0, 3.0]).unwrap();
        let b = eq.brackets().brackets[0];
        assert_eq!(b.admissibility, Admissibility::Boundary);
        assert!(matches!(eq.solve_point(&b), Err(Error::BoundaryRoot { .. })));

        let eq = MTEquation::from_curvatures(&w, space(-1, 2), &[-2.0, 3.0]).unwrap();
        assert_eq!(eq.brackets().brackets[0].admissibility, Admissibility::SplitRegions);
        let eq = MTEquation::from_curvatures(&w, space(0, 2), &[-2.0, 3.0]).unwrap();
        let set = eq.brackets();
        assert_eq!(set.brackets[0].admissibility, Admissibility::OppositeSigns);
        assert_eq!(set.q, 1);
        assert!(matches!(
            eq.solve_point(&set.brackets[0]),
            Err(Error::InadmissibleBracket { .. })
        ));
    }

    #[test]
    fn negative_flat_pair() {
        let w = flat_warp();
        let eq = MTEquation::from_curvatures(&w, space(0, 2), &[-2.0, -1.0]).unwrap();
        let b = eq.brackets().brackets[0];
        assert!(b.s_lo < b.s_hi && b.s_hi < 0.0);
        let sol = eq.solve_point(&b).unwrap();
        assert!((sol.s + 0.75).abs() < 1e-12);
    }

    #[test]
    fn root_outside_universe() {
        // θ(I) = (−∞, 1) for w = e^t, t₀ = 0; the Clifford root 5π/12 > 1
        let w = WarpProfile::new("exp(t)", f64::NEG_INFINITY, f64::INFINITY, Some(0.0)).unwrap();
        let eq = MTEquation::new(&w, space(1, 2), clifford(FRAC_PI_6)).unwrap();
        let set = eq.brackets();
        match eq.solve_point(&set.brackets[0]) {
            Err(Error::HeightOutsideUniverse { hi, .. }) => assert!((hi - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn periodic_family() {
        let w = flat_warp();
        let eq = MTEquation::new(&w, space(1, 2), clifford(FRAC_PI_6)).unwrap();
        let b = eq.brackets().brackets[0];
        let roots = eq.periodic_roots(&b, 2).unwrap();
        assert_eq!(roots.len(), 5);
        for r in roots {
            assert!((r.s - 5.0 * PI / 12.0 - PI * r.window as f64).abs() < 1e-11);
        }
    }

    #[test]
    fn near_solve_follows_the_seed() {
        let w = flat_warp();
        let eq = MTEquation::new(&w, space(1, 2), clifford(FRAC_PI_6)).unwrap();
        let b = eq.brackets().brackets[0];
        let sol = eq.solve_near(&b, 1.2 + PI).unwrap();
        assert_eq!(sol.window, 1);
        assert!((sol.s - 17.0 * PI / 12.0).abs() < 1e-11);
    }

    fn quadratic_root(c: f64, k1: f64, k2: f64, m1: f64, m2: f64) -> f64 {
        // m1(κ1u + c)(u − κ2) + m2(κ2u + c)(u − κ1) = 0 on (κ1, κ2)
        let a = m1 * k1 + m2 * k2;
        let b = (m1 + m2) * c - (m1 + m2) * k1 * k2;
        let cc = -c * (m1 * k2 + m2 * k1);
        let roots = if a.abs() < 1e-14 {
            vec![-cc / b]
        } else {
            let d = (b * b - 4.0 * a * cc).sqrt();
            vec![(-b + d) / (2.0 * a), (-b - d) / (2.0 * a)]
        };
        *roots.iter().find(|&&u| u > k1 && u < k2).unwrap()
    }

    fn curvatures(c: i8) -> impl Strategy<Value = Vec<f64>> {
        let one = match c {
            1 => (-6.0..6.0f64).boxed(),
            0 => (0.1..6.0f64).boxed(),
            _ => (1.05..6.0f64).boxed(),
        };
        (prop::collection::vec(one, 2..5), any::<bool>()).prop_filter_map("distinct", |(mut v, neg)| {
            if neg {
                v.iter_mut().for_each(|k| *k = -*k);
            }
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.windows(2).all(|w| w[1] - w[0] > 1e-2).then_some(v)
        })
    }

    fn check_instance(c: i8, kappas: Vec<f64>, w: &WarpProfile<f64>, seed: u64) -> std::result::Result<(), TestCaseError> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let clusters: Vec<Cluster<f64>> = kappas
            .iter()
            .map(|&k| Cluster {
                kappa: k,
                multiplicity: rng.random_range(1..3),
            })
            .collect();
        let n = clusters.iter().map(|c| c.multiplicity).sum();
        let eq = MTEquation::new(w, space(c, n), clusters.clone()).unwrap();
        let set = eq.brackets();
        prop_assert_eq!(set.admissible_count(), kappas.len() - 1);
        for b in set.admissible() {
            prop_assert!(b.g_lo * b.g_hi < 0.0);
            let sol = eq.solve_point(b).unwrap();
            prop_assert!(sol.s > b.s_lo && sol.s < b.s_hi);
            prop_assert!(sol.residual <= 1e-9);
            for _ in 0..100 {
                let s = rng.random_range(b.s_lo..b.s_hi);
                let t = w.theta_inverse(s).unwrap();
                let dw = w.dw(t).unwrap();
                let pf = eq.g_pole_free(s, dw);
                let rational = eq.g_rational(s, dw).unwrap();
                if rational.abs() > 1e-9 {
                    prop_assert_eq!(pf.signum(), rational.signum());
                }
            }
            if clusters.len() == 2 && w.source() == "1" {
                let u = quadratic_root(
                    c as f64,
                    clusters[0].kappa,
                    clusters[1].kappa,
                    clusters[0].multiplicity as f64,
                    clusters[1].multiplicity as f64,
                );
                let ct = Curvature::try_from(c).unwrap().ct(sol.s).unwrap();
                prop_assert!((ct - u).abs() <= 1e-10 * (1.0 + u.abs()), "{} vs {}", ct, u);
            }
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn spherical_brackets_hold(k in curvatures(1), seed in any::<u64>()) {
            check_instance(1, k, &flat_warp(), seed)?;
        }

        #[test]
        fn flat_brackets_hold(k in curvatures(0), seed in any::<u64>()) {
            check_instance(0, k, &flat_warp(), seed)?;
        }

        #[test]
        fn hyperbolic_brackets_hold(k in curvatures(-1), seed in any::<u64>()) {
            check_instance(-1, k, &flat_warp(), seed)?;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]

        #[test]
        fn varying_warp_brackets_hold(c in prop::sample::select(vec![-1i8, 0, 1]), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w = WarpProfile::new("1 + 0.5*sin(t)", f64::NEG_INFINITY, f64::INFINITY, Some(0.0)).unwrap();
            let base = match c { 1 => -3.0, 0 => 0.2, _ => 1.1 };
            let mut k: Vec<f64> = (0..3).map(|j| base + j as f64 * 1.5 + rng.random_range(0.0..1.0)).collect();
            k.sort_by(|a, b| a.partial_cmp(b).unwrap());
            check_instance(c, k, &w, seed)?;
        }
    }

    #[test]
    fn clifford_field_is_constant() {
        let chart = builtin_hypersurface::<f64>(space(1, 2), Family::ProductTorus { a: FRAC_PI_6, k: 1 }, 9).unwrap();
        let w = flat_warp();
        let f = solve_field(&chart, &w, 0).unwrap();
        assert!(!f.is_partial());
        for &t in &f.tau {
            assert!((t - 5.0 * PI / 12.0).abs() < 1e-12);
        }
        assert!(matches!(solve_field(&chart, &w, 1), Err(Error::NoSuchBranch { .. })));
    }

    #[test]
    fn torus_of_revolution_field_matches_radii() {
        let chart = builtin_hypersurface::<f64>(
            space(0, 2),
            Family::TorusOfRevolution { big_r: 2.0, r: 1.0 },
            11,
        )
        .unwrap();
        let w = flat_warp();
        let f = solve_field(&chart, &w, 0).unwrap();
        assert!(!f.is_partial(), "{:?}", f.failures);
        assert!(f.max_residual() <= 1e-9);
        // w = 1, c = 0: s is the mean of the two principal radii
        for i in 0..f.grid.len() {
            let v = f.grid.point(i)[1];
            let want = ((2.0 + v.cos()) / v.cos() + 1.0) / 2.0;
            assert!((f.tau[i].abs() - want).abs() < 1e-9, "{} vs {want}", f.tau[i]);
        }
    }

    #[test]
    fn umbilic_point_makes_field_partial() {
        let f = Family::Graph {
            f: Expression::parse_with_vars("0.5*(u1^2 + u2^2)", &["u1", "u2"]).unwrap(),
            domain: vec![(0.0, 1.0), (0.0, 1.0)],
        };
        let chart = builtin_hypersurface::<f64>(space(0, 2), f, 9).unwrap();
        let w = flat_warp();
        let field = solve_field(&chart, &w, 0).unwrap();
        assert!(field.is_partial());
        assert!(field.failures.iter().all(|e| e.u[0].abs() < 0.2 && e.u[1].abs() < 0.2));
        assert!(field.failures.iter().any(|e| e.u == vec![0.0, 0.0]));
    }

    #[test]
    fn slice_examples() {
        let sphere = builtin_hypersurface::<f64>(space(0, 2), Family::RoundSphere { r: 2.0 }, 9).unwrap();
        let w = WarpProfile::new("exp(t)", f64::NEG_INFINITY, f64::INFINITY, Some(0.0)).unwrap();
        let r = slice_check(&sphere, &w, -(2f64.ln())).unwrap();
        assert!(r.is_mt && r.max_defect < 1e-12);
        let r = slice_check(&sphere, &w, 0.0).unwrap();
        assert!(!r.is_mt && (r.max_defect - 0.5).abs() < 1e-12);

        let torus = builtin_hypersurface::<f64>(space(1, 2), Family::ProductTorus { a: FRAC_PI_4, k: 1 }, 9).unwrap();
        assert!(slice_check(&torus, &flat_warp(), 3.0).unwrap().is_mt);
        let torus = builtin_hypersurface::<f64>(space(1, 2), Family::ProductTorus { a: FRAC_PI_6, k: 1 }, 9).unwrap();
        assert!(!slice_check(&torus, &flat_warp(), 3.0).unwrap().is_mt);
    }

    #[test]
    fn curve_kappa_examples() {
        let e = WarpProfile::new("exp(t)", f64::NEG_INFINITY, f64::INFINITY, Some(0.4)).unwrap();
        let big_c = (-0.4f64).exp();
        for tau in [-2.0, -0.5, 0.0, 0.3, 2.0] {
            assert!((curve_kappa(&e, space(0, 1), tau).unwrap() - 1.0 / big_c).abs() < 1e-12);
        }
        assert_eq!(curve_kappa(&flat_warp(), space(0, 1), 0.7).unwrap(), 0.0);
        let k = curve_kappa(&flat_warp(), space(1, 1), FRAC_PI_4).unwrap();
        assert!((k + 1.0).abs() < 1e-15);
        assert!(curve_kappa(&flat_warp(), space(0, 2), 0.7).is_err());
    }

    #[test]
    fn exponential_curve_is_a_circle() {
        let w = WarpProfile::new("exp(t)", f64::NEG_INFINITY, f64::INFINITY, Some(0.0)).unwrap();
        let tau = Expression::parse_with_vars("0.3*sin(s)", &["s"]).unwrap();
        let curve = build_null_curve(&w, space(0, 1), &tau, 2.0 * PI, 1e-3).unwrap();
        let first = &curve.samples[0];
        let centre = crate::linalg::lincomb(1.0, &first.gamma, 1.0 / first.kappa, &first.normal);
        for s in &curve.samples {
            assert!((s.kappa - 1.0).abs() < 1e-12);
            let r = crate::linalg::norm(&crate::linalg::sub(&s.gamma, &centre));
            assert!((r - 1.0).abs() < 1e-10);
        }
        let last = curve.samples.last().unwrap();
        assert!(crate::linalg::norm(&last.gamma) < 1e-9);
    }

    #[test]
    fn spherical_curve_stays_on_sphere() {
        let tau = Expression::parse_with_vars("0.785398163397448", &["s"]).unwrap();
        let curve = build_null_curve(&flat_warp(), space(1, 1), &tau, 3.0, 1e-3).unwrap();
        for s in &curve.samples {
            assert!((crate::linalg::dot(&s.gamma, &s.gamma) - 1.0).abs() < 1e-10);
            assert!((s.kappa + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn null_2ff_recipes() {
        let s2 = space(0, 2);
        let e = WarpProfile::new("exp(t)", f64::NEG_INFINITY, f64::INFINITY, Some(0.0)).unwrap();
        match null_2ff_mode(&e, s2, None).unwrap() {
            Null2ffRecipe::Umbilic { c0, .. } => assert!((c0 - 1.0).abs() < 1e-12),
            r => panic!("{r:?}"),
        }
        match null_2ff_mode(&flat_warp(), s2, None).unwrap() {
            Null2ffRecipe::Umbilic { c0, .. } => assert_eq!(c0, 0.0),
            r => panic!("{r:?}"),
        }
        let r = null_2ff_mode(&flat_warp(), space(1, 2), Some(0.3)).unwrap();
        assert_eq!(r, Null2ffRecipe::Slice { t: 0.3, curvature: 0.0 });
        let chart: HypersurfaceChart<f64> = r.chart(space(1, 2), 5).unwrap();
        let k = chart.oracle_curvatures(&chart.grid().center()).unwrap();
        assert!(k.iter().all(|k| k.abs() < 1e-12));
    }

    #[test]
    fn single_precision_solve() {
        let w = WarpProfile::<f32>::constant(1.0).unwrap();
        let a = std::f32::consts::FRAC_PI_6;
        let clusters = vec![
            Cluster { kappa: -a.tan(), multiplicity: 1 },
            Cluster { kappa: 1.0 / a.tan(), multiplicity: 1 },
        ];
        let eq = MTEquation::new(&w, space(1, 2), clusters).unwrap();
        let sol = eq.solve_point(&eq.brackets().brackets[0]).unwrap();
        assert!((sol.s - 5.0 * std::f32::consts::PI / 12.0).abs() < 1e-5);
    }
}

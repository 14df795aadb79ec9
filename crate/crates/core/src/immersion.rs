//! The codimension-two immersion `u ↦ (co(θ(τ))φ + si(θ(τ))ν, τ)` of a
//! hypersurface chart into `Q^{n+1}_c ×_w I`, and its numerical verification.
//!
//! Warped vectors are stored as `[Q-components…, t-component]`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{d1, d2, unit, Stencil};
use crate::hypersurface::{multiplicities, HypersurfaceChart, FOCAL_TOL};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::mtsolve::{slice_check, solve_field, BranchTracker, HeightField, NullCurve};
use crate::real::Real;
use crate::spaceforms::SpaceForm;
use crate::warp::WarpProfile;

pub const REPORT_SCHEMA: u32 = 1;
pub const VERIFY_STEP: f64 = 1e-3;

pub type HeightFn<T> = Arc<dyn Fn(&[T]) -> Result<T> + Send + Sync>;

/// Height `τ(u)` of the immersion.
#[derive(Clone)]
pub enum HeightMap<T: Real> {
    Constant(T),
    Function(HeightFn<T>),
    /// Solved branch of the height equation, continued off-grid from the
    /// nearest solved node.
    Field(HeightField<T>),
}

impl<T: Real> fmt::Debug for HeightMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeightMap::Constant(t) => write!(f, "Constant({t})"),
            HeightMap::Function(_) => write!(f, "Function(..)"),
            HeightMap::Field(h) => write!(f, "Field(branch {}, {} nodes)", h.branch_id, h.tau.len()),
        }
    }
}

impl<T: Real> HeightMap<T> {
    pub fn function(f: impl Fn(&[T]) -> Result<T> + Send + Sync + 'static) -> Self {
        HeightMap::Function(Arc::new(f))
    }
}

#[derive(Clone, Debug)]
pub struct ImmersionPoint<T> {
    pub u: Vec<T>,
    pub phi: Vec<T>,
    pub nu: Vec<T>,
    pub tau: T,
    pub theta: T,
    pub co: T,
    pub si: T,
    pub w: T,
    pub dw: T,
    /// `co·φ + si·ν`.
    pub psi: Vec<T>,
    /// `−c·si·φ + co·ν`.
    pub chi: Vec<T>,
}

impl<T: Real> ImmersionPoint<T> {
    pub fn lift(&self) -> Vec<T> {
        let mut v = self.psi.clone();
        v.push(self.tau);
        v
    }

    /// Null normal `(χ, w)`.
    pub fn null_normal(&self) -> Vec<T> {
        let mut v = self.chi.clone();
        v.push(self.w);
        v
    }
}

/// `w²⟨a_Q, b_Q⟩ − a_t b_t`.
pub fn warped_inner<T: Real>(space: SpaceForm, w: T, a: &[T], b: &[T]) -> T {
    let k = a.len() - 1;
    w * w * space.inner(&a[..k], &b[..k]) - a[k] * b[k]
}

/// Levi-Civita derivative `∇̄_X Y` of the warped product at `(x, t)` for
/// fields with ambient coordinate derivative `∂_X Y = dxy`.
pub fn warped_connection<T: Real>(space: SpaceForm, w: T, dw: T, x: &[T], xv: &[T], yv: &[T], dxy: &[T]) -> Vec<T> {
    let k = x.len();
    let c = space.curvature.c::<T>();
    let q = space.inner(&xv[..k], &yv[..k]);
    let r = dw / w;
    let mut out: Vec<T> = (0..k)
        .map(|i| dxy[i] + c * q * x[i] + r * (xv[k] * yv[i] + yv[k] * xv[i]))
        .collect();
    out.push(dxy[k] + w * dw * q);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Mt,
    Slice,
    NullAcceleration,
    Null2ff,
}

impl VerifyMode {
    pub fn name(self) -> &'static str {
        match self {
            VerifyMode::Mt => "mt",
            VerifyMode::Slice => "slice",
            VerifyMode::NullAcceleration => "null_acceleration",
            VerifyMode::Null2ff => "null2ff",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub metric: f64,
    pub hnull: f64,
    pub hnu: f64,
    pub sff: f64,
    pub slice: f64,
    pub spacelike: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            metric: 1e-6,
            hnull: 1e-6,
            hnu: 1e-5,
            sff: 1e-7,
            slice: 1e-7,
            spacelike: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checks {
    pub metric: bool,
    pub hnull: bool,
    pub hnu: bool,
    pub sff: Option<bool>,
    pub slice: Option<bool>,
    pub spacelike: bool,
}

impl Checks {
    pub fn all(&self) -> bool {
        self.metric
            && self.hnull
            && self.hnu
            && self.spacelike
            && self.sff.unwrap_or(true)
            && self.slice.unwrap_or(true)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: u32,
    pub mode: VerifyMode,
    pub max_metric_defect: f64,
    #[serde(rename = "max_Hnull")]
    pub max_hnull: f64,
    #[serde(rename = "max_Hnu")]
    pub max_hnu: f64,
    pub max_2ff_defect: Option<f64>,
    /// Smallest eigenvalue of the induced metric relative to the chart metric.
    pub spacelike_min_eig: f64,
    pub focal_crossings: usize,
    pub slice_defect: Option<f64>,
    pub points_checked: usize,
    pub points_skipped: usize,
    pub tolerances: Tolerances,
    pub checks: Checks,
    pub passed: bool,
}

impl VerificationReport {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        mode: VerifyMode,
        tolerances: Tolerances,
        metric: f64,
        hnull: f64,
        hnu: f64,
        sff: Option<f64>,
        min_eig: f64,
        focal_crossings: usize,
        slice_defect: Option<f64>,
        points_checked: usize,
        points_skipped: usize,
    ) -> Self {
        let le = |v: f64, t: f64| v.is_finite() && v <= t;
        let checks = Checks {
            metric: le(metric, tolerances.metric),
            hnull: le(hnull, tolerances.hnull),
            hnu: le(hnu, tolerances.hnu),
            sff: sff.map(|d| le(d, tolerances.sff)),
            slice: slice_defect.map(|d| le(d, tolerances.slice)),
            spacelike: min_eig > tolerances.spacelike && focal_crossings == 0,
        };
        Self {
            schema: REPORT_SCHEMA,
            mode,
            max_metric_defect: metric,
            max_hnull: hnull,
            max_hnu: hnu,
            max_2ff_defect: sff,
            spacelike_min_eig: min_eig,
            focal_crossings,
            slice_defect,
            points_checked,
            points_skipped,
            tolerances,
            passed: checks.all() && points_checked > 0,
            checks,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions<T> {
    pub step: T,
    pub stencil: Stencil,
    pub tolerances: Tolerances,
}

impl<T: Real> Default for VerifyOptions<T> {
    fn default() -> Self {
        Self {
            step: T::lit(VERIFY_STEP),
            stencil: Stencil::Fourth,
            tolerances: Tolerances::default(),
        }
    }
}

/// Closed-form induced metric and null second fundamental form at a point.
#[derive(Clone, Debug)]
pub struct AnalyticPieces<T> {
    pub metric: Matrix<T>,
    /// `⟨II, (χ, w)⟩` in coordinates.
    pub null_sff: Matrix<T>,
    /// Principal curvatures paired with the jet directions.
    pub kappa: Vec<T>,
    pub min_eig: T,
}

#[derive(Clone, Debug)]
pub struct PointDiagnostics<T> {
    pub u: Vec<T>,
    pub metric_fd: Matrix<T>,
    pub metric_defect: T,
    /// `⟨H, (χ, w)⟩`.
    pub h_nu: T,
    /// `⟨H, ξ̄⟩` for the null normal with `⟨ξ̄, (χ, w)⟩ = −1`.
    pub h_xi: T,
    pub hnull: T,
    /// `⟨II, (χ, w)⟩` from finite differences.
    pub null_sff: Matrix<T>,
    pub sff_defect: T,
    pub min_eig: T,
}

pub struct MTImmersion<T: Real> {
    chart: HypersurfaceChart<T>,
    warp: WarpProfile<T>,
    height: HeightMap<T>,
    universe: (T, T),
}

impl<T: Real> MTImmersion<T> {
    pub fn new(chart: HypersurfaceChart<T>, warp: WarpProfile<T>, height: HeightMap<T>) -> Self {
        let universe = warp.theta_range();
        Self {
            chart,
            warp,
            height,
            universe,
        }
    }

    /// Marginally trapped immersion on the `branch`-th admissible root.
    pub fn from_branch(chart: HypersurfaceChart<T>, warp: WarpProfile<T>, branch: usize) -> Result<Self> {
        let field = solve_field(&chart, &warp, branch)?;
        Ok(Self::new(chart, warp, HeightMap::Field(field)))
    }

    /// The chart placed in the slice `t = t_slice`; the warp is rebased there
    /// so that `ψ = φ`.
    pub fn slice(chart: HypersurfaceChart<T>, warp: &WarpProfile<T>, t_slice: T) -> Result<Self> {
        let warp = warp.with_t0(t_slice)?;
        Ok(Self::new(chart, warp, HeightMap::Constant(t_slice)))
    }

    pub fn chart(&self) -> &HypersurfaceChart<T> {
        &self.chart
    }

    pub fn warp(&self) -> &WarpProfile<T> {
        &self.warp
    }

    pub fn height(&self) -> &HeightMap<T> {
        &self.height
    }

    pub fn space(&self) -> SpaceForm {
        self.chart.space()
    }

    pub fn field(&self) -> Option<&HeightField<T>> {
        match &self.height {
            HeightMap::Field(f) => Some(f),
            _ => None,
        }
    }

    pub fn tau(&self, u: &[T]) -> Result<T> {
        match &self.height {
            HeightMap::Constant(t) => Ok(*t),
            HeightMap::Function(f) => f(u),
            HeightMap::Field(field) => {
                let seed = field.seed_for(u).ok_or_else(|| {
                    Error::InvalidInput(format!(
                        "no solved height near u = {:?}",
                        u.iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>()
                    ))
                })?;
                let tracker = BranchTracker::new(
                    &self.chart,
                    &self.warp,
                    self.universe,
                    field.pattern.clone(),
                    field.pair,
                );
                Ok(tracker.solve_at(u, seed)?.tau)
            }
        }
    }

    pub fn evaluate(&self, u: &[T]) -> Result<ImmersionPoint<T>> {
        let phi = self.chart.point(u)?;
        let nu = self.chart.gauss_map(u)?;
        let tau = self.tau(u)?;
        let theta = self.warp.theta(tau)?;
        let (w, dw, _) = self.warp.jet(tau)?;
        let c = self.space().curvature;
        let (co, si) = (c.co(theta), c.si(theta));
        let psi = crate::linalg::lincomb(co, &phi, si, &nu);
        let chi = crate::linalg::lincomb(-c.c::<T>() * si, &phi, co, &nu);
        Ok(ImmersionPoint {
            u: u.to_vec(),
            phi,
            nu,
            tau,
            theta,
            co,
            si,
            w,
            dw,
            psi,
            chi,
        })
    }

    pub fn lift(&self, u: &[T]) -> Result<Vec<T>> {
        Ok(self.evaluate(u)?.lift())
    }

    /// Induced metric `w²(co − κ_k si)²` and null second fundamental form
    /// `w²(co − κ_k si)((κ_k co + c si) − w′(co − κ_k si))` on the principal
    /// directions, mapped to coordinates.
    pub fn analytic_pieces(&self, p: &ImmersionPoint<T>) -> Result<AnalyticPieces<T>> {
        let jet = self.chart.jet(&p.u, None)?;
        let flip = if self.space().inner(&jet.nu, &p.nu) < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        let c = self.space().curvature.c::<T>();
        let n = self.space().n;
        let w2 = p.w * p.w;
        let mut metric = Matrix::zeros(n, n);
        let mut sff = Matrix::zeros(n, n);
        let mut kappa = Vec::with_capacity(n);
        let mut min_eig = T::infinity();
        for (dir, &k) in jet.directions.iter().zip(&jet.shape) {
            let k = flip * k;
            let f = p.co - k * p.si;
            let dm = w2 * f * f;
            let ds = w2 * f * ((k * p.co + c * p.si) - p.dw * f);
            let gv = jet.metric.mul_vec(dir);
            for i in 0..n {
                for j in 0..n {
                    metric[(i, j)] = metric[(i, j)] + dm * gv[i] * gv[j];
                    sff[(i, j)] = sff[(i, j)] + ds * gv[i] * gv[j];
                }
            }
            kappa.push(k);
            min_eig = min_eig.min(dm);
        }
        Ok(AnalyticPieces {
            metric,
            null_sff: sff,
            kappa,
            min_eig,
        })
    }

    /// Finite-difference metric, mean curvature components and null second
    /// fundamental form at `u`.
    pub fn point_diagnostics(&self, u: &[T], opts: &VerifyOptions<T>) -> Result<PointDiagnostics<T>> {
        let space = self.space();
        let n = space.n;
        let p = self.evaluate(u)?;
        let an = self.analytic_pieces(&p)?;
        let mut f = |q: &[T]| self.lift(q);
        let e: Vec<Vec<T>> = (0..n)
            .map(|i| d1(&mut f, u, &unit(n, i), opts.step, opts.stencil))
            .collect::<Result<_>>()?;
        let mut conn = vec![vec![Vec::new(); n]; n];
        for i in 0..n {
            for j in i..n {
                let dd = d2(&mut f, u, &unit(n, i), &unit(n, j), opts.step, opts.stencil)?;
                let v = warped_connection(space, p.w, p.dw, &p.psi, &e[i], &e[j], &dd);
                conn[i][j] = v.clone();
                conn[j][i] = v;
            }
        }
        let ip = |a: &[T], b: &[T]| warped_inner(space, p.w, a, b);
        let metric_fd = Matrix::from_fn(n, n, |i, j| ip(&e[i], &e[j]));
        let metric_defect = metric_fd.max_abs_diff(&an.metric);

        let nubar = p.null_normal();
        let mut zeta = p.chi.clone();
        zeta.push(-p.w);
        let ginv_fd = metric_fd.inverse().ok_or_else(|| Error::NotSpacelike {
            u: u.iter().map(|v| v.to_f64_lossy()).collect(),
            min_eig: an.min_eig.to_f64_lossy(),
        })?;
        let proj: Vec<T> = e.iter().map(|ei| ip(&zeta, ei)).collect();
        let coef = ginv_fd.mul_vec(&proj);
        for (ci, ei) in coef.iter().zip(&e) {
            crate::linalg::axpy(-*ci, ei, &mut zeta);
        }
        let lambda = -ip(&zeta, &zeta) / (T::lit(2.0) * ip(&zeta, &nubar));
        crate::linalg::axpy(lambda, &nubar, &mut zeta);
        let s = -ip(&zeta, &nubar);
        let xi: Vec<T> = zeta.iter().map(|&v| v / s).collect();

        let null_sff = Matrix::from_fn(n, n, |i, j| ip(&conn[i][j], &nubar));
        let xi_sff = Matrix::from_fn(n, n, |i, j| ip(&conn[i][j], &xi));
        let ginv = an.metric.inverse().ok_or_else(|| Error::NotSpacelike {
            u: u.iter().map(|v| v.to_f64_lossy()).collect(),
            min_eig: an.min_eig.to_f64_lossy(),
        })?;
        let trace = |m: &Matrix<T>| {
            let prod = ginv.mul(m);
            (0..n).map(|i| prod[(i, i)]).sum::<T>() / T::lit(n as f64)
        };
        let h_nu = trace(&null_sff);
        let h_xi = trace(&xi_sff);
        let hnull = (T::lit(2.0) * h_nu * h_xi).abs();
        let sff_defect = match an.metric.cholesky() {
            Some(l) => {
                let li = l.lower_inverse();
                li.mul(&null_sff).mul(&li.transpose()).max_abs()
            }
            None => T::infinity(),
        };
        Ok(PointDiagnostics {
            u: u.to_vec(),
            metric_fd,
            metric_defect,
            h_nu,
            h_xi,
            hnull,
            null_sff,
            sff_defect,
            min_eig: an.min_eig,
        })
    }

    /// Grid-neighbour pairs across which some `co − κ_k si` changes sign, plus
    /// nodes where it vanishes.
    pub fn focal_crossings(&self) -> Result<usize> {
        let grid = self.chart.grid();
        let c = self.space().curvature;
        let factors: Vec<Option<Vec<T>>> = grid
            .points()
            .par_iter()
            .map(|u| -> Result<Option<Vec<T>>> {
                let tau = match self.tau(u) {
                    Ok(t) => t,
                    Err(_) if self.field().is_some() => return Ok(None),
                    Err(e) => return Err(e),
                };
                let s = self.warp.theta(tau)?;
                let k = self.chart.curvatures_at(u)?;
                Ok(Some(k.iter().map(|&k| c.co(s) - k * c.si(s)).collect()))
            })
            .collect::<Result<_>>()?;
        let mut count = 0;
        for (i, fi) in factors.iter().enumerate() {
            let Some(fi) = fi else { continue };
            if fi.iter().any(|v| v.abs() < T::lit(FOCAL_TOL)) {
                count += 1;
            }
            for j in grid.neighbors(i).into_iter().filter(|&j| j > i) {
                if let Some(fj) = &factors[j] {
                    if fi.iter().zip(fj).any(|(a, b)| *a * *b < T::zero()) {
                        count += 1;
                    }
                }
            }
        }
        Ok(count)
    }

    /// Checks the immersion on the interior grid nodes. Nodes where a field
    /// height cannot be continued are skipped and counted.
    pub fn verify(&self, mode: VerifyMode, opts: &VerifyOptions<T>) -> Result<VerificationReport> {
        if mode == VerifyMode::NullAcceleration {
            return Err(Error::InvalidInput(
                "null acceleration is verified on a null curve".into(),
            ));
        }
        let grid = self.chart.grid();
        let nodes: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_interior(i)).collect();
        let partial = self.field().is_some();
        let results: Vec<Option<PointDiagnostics<T>>> = nodes
            .par_iter()
            .map(|&i| match self.point_diagnostics(&grid.point(i), opts) {
                Ok(d) => Ok(Some(d)),
                Err(_) if partial => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_>>()?;
        let done: Vec<&PointDiagnostics<T>> = results.iter().flatten().collect();
        let max = |f: &dyn Fn(&PointDiagnostics<T>) -> T| {
            done.iter()
                .map(|d| f(d).to_f64_lossy())
                .fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v) })
        };
        let metric = max(&|d| d.metric_defect);
        let hnull = max(&|d| d.hnull);
        let hnu = max(&|d| d.h_nu.abs());
        let sff = (mode == VerifyMode::Null2ff).then(|| max(&|d| d.sff_defect));
        let min_eig = done
            .iter()
            .map(|d| d.min_eig.to_f64_lossy())
            .fold(f64::INFINITY, f64::min);
        let slice_defect = match (mode, &self.height) {
            (VerifyMode::Slice, HeightMap::Constant(t)) => {
                Some(slice_check(&self.chart, &self.warp, *t)?.max_defect)
            }
            (VerifyMode::Slice, _) => {
                return Err(Error::InvalidInput("slice mode needs a constant height".into()))
            }
            _ => None,
        };
        Ok(VerificationReport::assemble(
            mode,
            opts.tolerances,
            metric,
            hnull,
            hnu,
            sff,
            min_eig,
            self.focal_crossings()?,
            slice_defect,
            done.len(),
            nodes.len() - done.len(),
        ))
    }

    /// `max |dψ(∂_a) − (θ′∂_aτ χ + co ∂_aφ + si ∂_aν)|` at `u`.
    pub fn d_formula_defect(&self, u: &[T], h: T) -> Result<T> {
        let n = self.space().n;
        let p = self.evaluate(u)?;
        let mut psi = |q: &[T]| Ok(self.evaluate(q)?.psi);
        let mut phi = |q: &[T]| self.chart.point(q);
        let mut nu = |q: &[T]| self.chart.gauss_map(q);
        let mut tau = |q: &[T]| Ok(vec![self.tau(q)?]);
        let mut worst = T::zero();
        for a in 0..n {
            let e = unit(n, a);
            let dpsi = d1(&mut psi, u, &e, h, Stencil::Fourth)?;
            let dphi = d1(&mut phi, u, &e, h, Stencil::Fourth)?;
            let dnu = d1(&mut nu, u, &e, h, Stencil::Fourth)?;
            let dtau = d1(&mut tau, u, &e, h, Stencil::Fourth)?[0];
            let k = dtau / p.w;
            for i in 0..dpsi.len() {
                let want = k * p.chi[i] + p.co * dphi[i] + p.si * dnu[i];
                worst = worst.max((dpsi[i] - want).abs());
            }
        }
        Ok(worst)
    }

    /// `max |φ − (co ψ − si χ)|` and `max |ν − (c si ψ + co χ)|` at `u`.
    pub fn frame_inversion_defect(&self, u: &[T]) -> Result<T> {
        let p = self.evaluate(u)?;
        let c = self.space().curvature.c::<T>();
        let phi = crate::linalg::lincomb(p.co, &p.psi, -p.si, &p.chi);
        let nu = crate::linalg::lincomb(c * p.si, &p.psi, p.co, &p.chi);
        Ok(crate::linalg::max_abs_diff(&phi, &p.phi).max(crate::linalg::max_abs_diff(&nu, &p.nu)))
    }

    /// Lifted grid nodes; `None` where the height is unavailable.
    pub fn sample(&self) -> Result<Vec<Option<Vec<T>>>> {
        let partial = self.field().is_some();
        self.chart
            .grid()
            .points()
            .par_iter()
            .map(|u| match self.lift(u) {
                Ok(v) => Ok(Some(v)),
                Err(_) if partial => Ok(None),
                Err(e) => Err(e),
            })
            .collect()
    }

    /// CSV with columns `u1…un, x1…x_{n+2}` (or `x_{n+3}` for `c ≠ 0`), `t`.
    pub fn write_csv(&self, path: &Path) -> Result<usize> {
        let grid = self.chart.grid();
        let n = self.space().n;
        let amb = self.space().ambient_dim();
        let io = |e: csv::Error| Error::InvalidInput(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header: Vec<String> = (1..=n).map(|i| format!("u{i}")).collect();
        header.extend((1..=amb).map(|i| format!("x{i}")));
        header.push("t".into());
        w.write_record(&header).map_err(io)?;
        let mut rows = 0;
        for (i, lift) in self.sample()?.into_iter().enumerate() {
            let Some(lift) = lift else { continue };
            let row: Vec<String> = grid
                .point(i)
                .iter()
                .chain(&lift)
                .map(|v| format!("{:.17e}", v.to_f64_lossy()))
                .collect();
            w.write_record(&row).map_err(io)?;
            rows += 1;
        }
        w.flush().map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Ok(rows)
    }

    /// Indexed triangle mesh: `v` lines carry every coordinate of the lift,
    /// `f i j k` lines use 1-based vertex numbers. Faces only for `n = 2`.
    pub fn write_mesh(&self, path: &Path) -> Result<(usize, usize)> {
        let grid = self.chart.grid();
        let lifts = self.sample()?;
        let mut index = vec![0usize; lifts.len()];
        let mut out = String::new();
        out.push_str(&format!("# {} in warped product, c = {}\n", self.chart.describe(), self.space().curvature.sign()));
        let mut verts = 0;
        for (i, l) in lifts.iter().enumerate() {
            if let Some(l) = l {
                verts += 1;
                index[i] = verts;
                out.push('v');
                for v in l {
                    out.push_str(&format!(" {:.12e}", v.to_f64_lossy()));
                }
                out.push('\n');
            }
        }
        let mut faces = 0;
        if grid.dim() == 2 {
            let shape = grid.shape();
            for a in 0..shape[0].saturating_sub(1) {
                for b in 0..shape[1].saturating_sub(1) {
                    let q = [[a, b], [a + 1, b], [a + 1, b + 1], [a, b + 1]].map(|m| index[grid.flat_index(&m)]);
                    for tri in [[q[0], q[1], q[2]], [q[0], q[2], q[3]]] {
                        if tri.iter().all(|&v| v > 0) {
                            out.push_str(&format!("f {} {} {}\n", tri[0], tri[1], tri[2]));
                            faces += 1;
                        }
                    }
                }
            }
        }
        let mut file = std::fs::File::create(path)
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        file.write_all(out.as_bytes())
            .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        Ok((verts, faces))
    }

    /// Cluster pattern at the centre of the chart.
    pub fn pattern(&self) -> Result<Vec<usize>> {
        Ok(multiplicities(&self.chart.clusters_at(&self.chart.grid().center())?))
    }
}

/// Per-sample quantities of a lifted null curve.
#[derive(Clone, Debug)]
pub struct CurveDiagnostics<T> {
    pub sigma: T,
    /// `⟨X, X⟩` for the lift velocity `X`.
    pub speed: T,
    pub hnull: T,
    pub h_nu: T,
    /// `co − κ si`.
    pub focal_factor: T,
}

/// Semi-analytic acceleration of the lift `(co γ + si N, τ)` of a Frenet
/// curve: velocity and acceleration come from the integrated frame and the
/// derivatives of `τ` and `κ`.
pub fn curve_diagnostics<T: Real>(curve: &NullCurve<T>, warp: &WarpProfile<T>) -> Result<Vec<CurveDiagnostics<T>>> {
    let space = curve.space;
    let c = space.curvature;
    let cc = c.c::<T>();
    let amb = space.ambient_dim();
    curve
        .samples
        .iter()
        .map(|p| {
            let s = warp.theta(p.tau)?;
            let (w, dw, _) = warp.jet(p.tau)?;
            let (co, si) = (c.co(s), c.si(s));
            let ds = p.dtau / w;
            let dds = p.ddtau / w - p.dtau * p.dtau * dw / (w * w);
            let k = p.kappa;
            let (g, t, nn) = (&p.gamma, &p.tangent, &p.normal);
            let psi: Vec<T> = (0..amb).map(|i| co * g[i] + si * nn[i]).collect();
            let chi: Vec<T> = (0..amb).map(|i| -cc * si * g[i] + co * nn[i]).collect();
            let f = co - k * si;
            let dpsi: Vec<T> = (0..amb).map(|i| ds * chi[i] + f * t[i]).collect();
            let dchi: Vec<T> = (0..amb)
                .map(|i| -cc * ds * psi[i] - (cc * si + k * co) * t[i])
                .collect();
            let tcoef = ds * (-cc * si - k * co) - p.dkappa * si;
            let ddpsi: Vec<T> = (0..amb)
                .map(|i| dds * chi[i] + ds * dchi[i] + tcoef * t[i] + f * (-cc * g[i] + k * nn[i]))
                .collect();
            let mut x = dpsi.clone();
            x.push(p.dtau);
            let mut dxx = ddpsi;
            dxx.push(p.ddtau);
            let a = warped_connection(space, w, dw, &psi, &x, &x, &dxx);
            let ip = |u: &[T], v: &[T]| warped_inner(space, w, u, v);
            let speed = ip(&x, &x);
            let along = ip(&a, &x) / speed;
            let h: Vec<T> = a.iter().zip(&x).map(|(&ai, &xi)| (ai - along * xi) / speed).collect();
            let mut nubar = chi;
            nubar.push(w);
            Ok(CurveDiagnostics {
                sigma: p.sigma,
                speed,
                hnull: ip(&h, &h).abs(),
                h_nu: ip(&h, &nubar),
                focal_factor: f,
            })
        })
        .collect()
}

/// Verifies a lifted null curve: speed against `w²(co − κ si)²` (and against
/// finite differences of the lifted samples), `⟨H, H⟩` and `⟨H, (χ, w)⟩`.
pub fn verify_null_curve<T: Real>(curve: &NullCurve<T>, warp: &WarpProfile<T>, tolerances: Tolerances) -> Result<VerificationReport> {
    let diag = curve_diagnostics(curve, warp)?;
    let lifts: Vec<Vec<T>> = (0..curve.samples.len())
        .map(|i| curve.lift(warp, i))
        .collect::<Result<_>>()?;
    let space = curve.space;
    let h = curve.step;
    let mut metric = 0.0f64;
    for (i, d) in diag.iter().enumerate() {
        let (w, _, _) = warp.jet(curve.samples[i].tau)?;
        let want = w * w * d.focal_factor * d.focal_factor;
        metric = metric.max((d.speed - want).abs().to_f64_lossy());
        if i >= 2 && i + 2 < lifts.len() {
            let v: Vec<T> = (0..lifts[i].len())
                .map(|k| {
                    (lifts[i - 2][k] - T::lit(8.0) * lifts[i - 1][k] + T::lit(8.0) * lifts[i + 1][k] - lifts[i + 2][k])
                        / (T::lit(12.0) * h)
                })
                .collect();
            let fd = warped_inner(space, w, &v, &v);
            metric = metric.max((fd - want).abs().to_f64_lossy());
        }
    }
    let hnull = diag.iter().map(|d| d.hnull.to_f64_lossy()).fold(0.0, f64::max);
    let hnu = diag.iter().map(|d| d.h_nu.abs().to_f64_lossy()).fold(0.0, f64::max);
    let min_eig = diag.iter().map(|d| d.speed.to_f64_lossy()).fold(f64::INFINITY, f64::min);
    let crossings = diag
        .windows(2)
        .filter(|p| p[0].focal_factor * p[1].focal_factor < T::zero())
        .count()
        + diag.iter().filter(|d| d.focal_factor.abs() < T::lit(FOCAL_TOL)).count();
    Ok(VerificationReport::assemble(
        VerifyMode::NullAcceleration,
        tolerances,
        metric,
        hnull,
        hnu,
        None,
        min_eig,
        crossings,
        None,
        diag.len(),
        0,
    ))
}

/// Eigenvalues of the finite-difference induced metric relative to the chart
/// metric at `u`.
pub fn relative_eigenvalues<T: Real>(metric: &Matrix<T>, chart_metric: &Matrix<T>) -> Option<Vec<T>> {
    let l = chart_metric.cholesky()?;
    let li = l.lower_inverse();
    Some(symmetric_eigen(&li.mul(metric).mul(&li.transpose()).symmetrized()).values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;
    use crate::mtsolve::{build_null_curve, null_2ff_mode};
    use crate::spaceforms::{builtin_hypersurface, umbilic_hypersurface, Family};
    use std::f64::consts::FRAC_PI_6;

    fn space(c: i8, n: usize) -> SpaceForm {
        SpaceForm::from_sign(c, n).unwrap()
    }

    fn exp_warp(t0: f64) -> WarpProfile<f64> {
        WarpProfile::new("exp(t)", f64::NEG_INFINITY, f64::INFINITY, Some(t0)).unwrap()
    }

    fn sphere(r: f64, ppa: usize) -> HypersurfaceChart<f64> {
        builtin_hypersurface(space(0, 2), Family::RoundSphere { r }, ppa).unwrap()
    }

    #[test]
    fn connection_is_metric() {
        // d/dε ⟨p′, p′⟩ = 2⟨∇_{p′} p′, p′⟩ along a curve in S² ×_w I
        let sp = space(1, 2);
        let w = WarpProfile::new("2 + sin(t)", f64::NEG_INFINITY, f64::INFINITY, Some(0.0)).unwrap();
        let curve = |e: f64| {
            let (a, b) = (0.3 + e, 0.7 * e * e + 0.2);
            vec![a.cos() * b.cos(), a.sin() * b.cos(), b.sin(), 0.5 * e.sin()]
        };
        let mut f = |u: &[f64]| Ok(curve(u[0]));
        let h = 1e-3;
        for e in [-0.4, 0.1, 0.9] {
            let p = curve(e);
            let v = d1(&mut f, &[e], &[1.0], h, Stencil::Fourth).unwrap();
            let a = d2(&mut f, &[e], &[1.0], &[1.0], h, Stencil::Fourth).unwrap();
            let (ww, dw, _) = w.jet(p[3]).unwrap();
            let conn = warped_connection(sp, ww, dw, &p[..3], &v, &v, &a);
            let mut speed = |u: &[f64]| {
                let v = d1(&mut f, u, &[1.0], h, Stencil::Fourth)?;
                Ok(vec![warped_inner(sp, w.w(curve(u[0])[3]).unwrap(), &v, &v)])
            };
            let lhs = d1(&mut speed, &[e], &[1.0], 1e-2, Stencil::Fourth).unwrap()[0];
            let rhs = 2.0 * warped_inner(sp, ww, &conn, &v);
            assert!((lhs - rhs).abs() < 1e-6, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn clifford_immersion_verifies() {
        let chart = builtin_hypersurface::<f64>(space(1, 2), Family::ProductTorus { a: FRAC_PI_6, k: 1 }, 9).unwrap();
        let im = MTImmersion::from_branch(chart, WarpProfile::constant(1.0).unwrap(), 0).unwrap();
        let r = im.verify(VerifyMode::Mt, &VerifyOptions::default()).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.max_hnu < 1e-8);
        assert_eq!(r.points_checked, 49);
        assert!(r.max_2ff_defect.is_none());
    }

    #[test]
    fn torus_of_revolution_verifies() {
        let chart = builtin_hypersurface::<f64>(space(0, 2), Family::TorusOfRevolution { big_r: 2.0, r: 1.0 }, 9).unwrap();
        let im = MTImmersion::from_branch(chart, WarpProfile::constant(1.0).unwrap(), 0).unwrap();
        let r = im.verify(VerifyMode::Mt, &VerifyOptions::default()).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn null_sff_matches_closed_form() {
        let chart = sphere(1.5, 5);
        let im = MTImmersion::new(chart, exp_warp(0.0), HeightMap::Constant(0.4));
        let u = [0.3, 1.2];
        let p = im.evaluate(&u).unwrap();
        let an = im.analytic_pieces(&p).unwrap();
        let d = im.point_diagnostics(&u, &VerifyOptions::default()).unwrap();
        assert!(d.null_sff.max_abs_diff(&an.null_sff) < 1e-8, "{:?} vs {:?}", d.null_sff, an.null_sff);
        assert!(d.metric_defect < 1e-8);
        // ⟨H, (χ, w)⟩ = (1/n)Σ(κ co + c si)/(co − κ si) − w′ on a constant height
        let k = 1.0 / 1.5;
        let want = (k * p.co) / (p.co - k * p.si) - p.dw;
        assert!((d.h_nu - want).abs() < 1e-8, "{} vs {want}", d.h_nu);
    }

    #[test]
    fn sphere_slices() {
        let opts = VerifyOptions::default();
        let im = MTImmersion::slice(sphere(2.0, 9), &exp_warp(0.0), -(2f64.ln())).unwrap();
        let r = im.verify(VerifyMode::Slice, &opts).unwrap();
        assert!(r.passed, "{r:?}");
        let im = MTImmersion::slice(sphere(2.0, 9), &exp_warp(0.0), 0.0).unwrap();
        let r = im.verify(VerifyMode::Slice, &opts).unwrap();
        assert!(!r.passed);
        assert!((r.max_hnu - 0.5).abs() < 1e-6);
        assert!(!r.checks.hnu && r.checks.metric && r.checks.spacelike);
    }

    #[test]
    fn differential_and_frame_identities() {
        let chart = sphere(1.0, 5);
        let im = MTImmersion::new(
            chart,
            exp_warp(0.0),
            HeightMap::function(|u: &[f64]| Ok(0.2 + 0.1 * u[0] * u[1])),
        );
        for u in [[0.1, 1.0], [-1.0, 2.0]] {
            assert!(im.d_formula_defect(&u, 1e-3).unwrap() < 1e-9);
            assert!(im.frame_inversion_defect(&u).unwrap() < 1e-14);
        }
    }

    #[test]
    fn umbilic_null_sff_vanishes_for_any_height() {
        let sp = space(0, 2);
        let w = exp_warp(0.0);
        let recipe = null_2ff_mode(&w, sp, None).unwrap();
        let chart = recipe.chart(sp, 7).unwrap();
        let im = MTImmersion::new(
            chart,
            w,
            HeightMap::function(|u: &[f64]| Ok(-0.3 + 0.1 * u[0] + 0.05 * u[1] * u[1])),
        );
        let r = im.verify(VerifyMode::Null2ff, &VerifyOptions::default()).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.max_2ff_defect.unwrap() < 1e-7);
    }

    #[test]
    fn focal_crossing_breaks_spacelike() {
        let im = MTImmersion::new(
            sphere(1.0, 9),
            WarpProfile::constant(1.0).unwrap(),
            HeightMap::function(|u: &[f64]| Ok(1.0 + 0.3 * u[0])),
        );
        assert!(im.focal_crossings().unwrap() > 0);
    }

    #[test]
    fn null_curves_verify() {
        let tau = Expression::parse_with_vars("0.3*sin(s)", &["s"]).unwrap();
        let w = exp_warp(0.0);
        let curve = build_null_curve(&w, space(0, 1), &tau, 3.0, 1e-3).unwrap();
        let r = verify_null_curve(&curve, &w, Tolerances::default()).unwrap();
        assert!(r.passed, "{r:?}");

        let w = WarpProfile::new("2 + cos(t)", f64::NEG_INFINITY, f64::INFINITY, Some(0.0)).unwrap();
        let tau = Expression::parse_with_vars("0.2 + 0.1*s", &["s"]).unwrap();
        let curve = build_null_curve(&w, space(1, 1), &tau, 2.0, 1e-3).unwrap();
        let r = verify_null_curve(&curve, &w, Tolerances::default()).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn wrong_curvature_is_not_null() {
        let tau = Expression::parse_with_vars("0.3*sin(s)", &["s"]).unwrap();
        let w = exp_warp(0.0);
        let mut curve = build_null_curve(&w, space(0, 1), &tau, 3.0, 1e-3).unwrap();
        for s in &mut curve.samples {
            s.kappa = 0.5;
        }
        let r = verify_null_curve(&curve, &w, Tolerances::default()).unwrap();
        assert!(!r.checks.hnull || !r.checks.hnu);
    }

    #[test]
    fn mesh_and_csv_export() {
        let dir = tempfile::tempdir().unwrap();
        let chart = builtin_hypersurface::<f64>(space(1, 2), Family::ProductTorus { a: FRAC_PI_6, k: 1 }, 4).unwrap();
        let im = MTImmersion::from_branch(chart, WarpProfile::constant(1.0).unwrap(), 0).unwrap();
        let rows = im.write_csv(&dir.path().join("m.csv")).unwrap();
        assert_eq!(rows, 16);
        let (v, f) = im.write_mesh(&dir.path().join("m.obj")).unwrap();
        assert_eq!((v, f), (16, 18));
        let text = std::fs::read_to_string(dir.path().join("m.obj")).unwrap();
        let first = text.lines().find(|l| l.starts_with("v ")).unwrap();
        assert_eq!(first.split_whitespace().count(), 6);
        let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
        assert!(csv.starts_with("u1,u2,x1,x2,x3,x4,t"));
    }

    #[test]
    fn single_precision_slice() {
        let chart = builtin_hypersurface::<f32>(space(0, 2), Family::RoundSphere { r: 2.0 }, 5).unwrap();
        let w = WarpProfile::<f32>::new("exp(t)", f32::NEG_INFINITY, f32::INFINITY, Some(0.0)).unwrap();
        let im = MTImmersion::slice(chart, &w, -(2f32.ln())).unwrap();
        let p = im.evaluate(&[0.1, 1.0]).unwrap();
        assert!((p.dw - 0.5).abs() < 1e-6);
    }

    #[test]
    fn umbilic_chart_curvature() {
        let c: HypersurfaceChart<f64> = umbilic_hypersurface(space(0, 2), 0.5, 5).unwrap();
        assert_eq!(c.oracle_curvatures(&[0.0, 1.0]).unwrap(), vec![0.5, 0.5]);
    }
}

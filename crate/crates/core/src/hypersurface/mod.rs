//! Hypersurface charts `φ: U ⊂ R^n → Q^{n+1}_c` and their numerical jets:
//! first fundamental form, Gauss map, shape operator and clustered
//! principal curvatures.

mod grid;
mod sampled;

use std::sync::Arc;

use rayon::prelude::*;

pub use grid::Grid;
pub use sampled::{load_csv_chart, write_csv_chart, ChartMeta, SampledChart};

use crate::error::{Error, Result};
use crate::fd::{d1, unit, Stencil};
use crate::linalg::{generalized_cross, singular_values, symmetric_eigen, Matrix};
use crate::real::Real;
use crate::spaceforms::{Curvature, Family, SpaceForm};

/// Default finite-difference step in parameter units.
pub const DEFAULT_STEP: f64 = 1e-3;
pub const SYMMETRY_TOL: f64 = 1e-5;
pub const RANK_TOL: f64 = 1e-7;
pub const CLUSTER_TOL: f64 = 1e-6;
pub const FOCAL_TOL: f64 = 1e-8;
const STEP_RETRIES: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cluster<T> {
    pub kappa: T,
    pub multiplicity: usize,
}

/// Merges ascending eigenvalues closer than `1e-6·(1+|κ|)` into clusters.
pub fn cluster<T: Real>(sorted: &[T]) -> Vec<Cluster<T>> {
    let tol = T::lit(CLUSTER_TOL);
    let mut groups: Vec<Vec<T>> = Vec::new();
    for &k in sorted {
        match groups.last_mut() {
            Some(g) if (k - *g.last().unwrap()).abs() <= tol * (T::one() + k.abs()) => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    groups
        .into_iter()
        .map(|g| Cluster {
            kappa: g.iter().copied().sum::<T>() / T::lit(g.len() as f64),
            multiplicity: g.len(),
        })
        .collect()
}

pub fn multiplicities<T>(clusters: &[Cluster<T>]) -> Vec<usize> {
    clusters.iter().map(|c| c.multiplicity).collect()
}

#[derive(Clone, Debug)]
pub struct PointJet<T> {
    pub u: Vec<T>,
    pub x: Vec<T>,
    pub nu: Vec<T>,
    /// Coordinate tangent vectors `∂_iφ`.
    pub dphi: Vec<Vec<T>>,
    /// Coordinate derivatives `∂_iν`.
    pub dnu: Vec<Vec<T>>,
    /// First fundamental form in coordinates.
    pub metric: Matrix<T>,
    /// Parameter-space principal directions, orthonormal for the metric.
    pub directions: Vec<Vec<T>>,
    /// Ambient principal frame `dφ(e_k)`.
    pub frame: Vec<Vec<T>>,
    /// Principal curvature of each frame vector, ascending.
    pub shape: Vec<T>,
    pub clusters: Vec<Cluster<T>>,
    pub symmetry_defect: T,
    pub step: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankDiagnostic {
    pub full_rank: bool,
    /// Largest over smallest singular value of the stacked differential.
    pub condition: f64,
}

type PointFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

#[derive(Clone)]
pub enum ChartKind<T: Real> {
    Builtin {
        family: Family,
        /// Normal negated (and curvatures with it).
        flip: bool,
        /// First parameter negated to keep the frame positively oriented.
        reverse_first: bool,
    },
    Sampled(Arc<SampledChart<T>>),
    Equidistant {
        base: Arc<HypersurfaceChart<T>>,
        s: T,
    },
    Function(PointFn<T>),
}

#[derive(Clone)]
pub struct HypersurfaceChart<T: Real> {
    space: SpaceForm,
    grid: Grid<T>,
    kind: ChartKind<T>,
    step: T,
}

impl<T: Real> std::fmt::Debug for HypersurfaceChart<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HypersurfaceChart")
            .field("space", &self.space)
            .field("kind", &self.describe())
            .field("grid", &self.grid.shape())
            .finish()
    }
}

impl<T: Real> HypersurfaceChart<T> {
    pub(crate) fn builtin(
        space: SpaceForm,
        family: Family,
        flip: bool,
        points_per_axis: usize,
    ) -> Result<Self> {
        family.validate(&space)?;
        let n = space.n;
        let domain = family.default_domain(n);
        let bounds: Vec<(T, T)> = domain.iter().map(|&(a, b)| (T::lit(a), T::lit(b))).collect();
        let grid = Grid::uniform(&bounds, &vec![points_per_axis; n])?;
        let mut chart = Self {
            space,
            grid,
            kind: ChartKind::Builtin {
                family,
                flip,
                reverse_first: false,
            },
            step: T::lit(DEFAULT_STEP),
        };
        // orient the parametrization so the analytic normal is the positive one
        let u = chart.grid.center();
        let numeric = chart.numeric_normal(&u, &u, chart.step)?;
        let analytic = chart.gauss_map(&u)?;
        if space.inner(&numeric, &analytic) < T::zero() {
            if let ChartKind::Builtin { reverse_first, .. } = &mut chart.kind {
                *reverse_first = true;
            }
            let mut axes: Vec<Vec<T>> = (0..n).map(|k| chart.grid.axis(k).to_vec()).collect();
            axes[0] = axes[0].iter().rev().map(|&v| -v).collect();
            chart.grid = Grid::from_axes(axes)?;
        }
        Ok(chart)
    }

    /// Chart from an arbitrary point map; Gauss map and curvatures numeric.
    pub fn from_fn(
        space: SpaceForm,
        grid: Grid<T>,
        f: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Result<Self> {
        if grid.dim() != space.n {
            return Err(Error::InvalidInput(format!(
                "grid dimension {} does not match n = {}",
                grid.dim(),
                space.n
            )));
        }
        Ok(Self {
            space,
            grid,
            kind: ChartKind::Function(Arc::new(f)),
            step: T::lit(DEFAULT_STEP),
        })
    }

    pub fn from_sampled(sampled: SampledChart<T>) -> Result<Self> {
        let space = sampled.space();
        let grid = sampled.grid().clone();
        let step = grid.min_spacing().unwrap_or(T::one()) * T::lit(DEFAULT_STEP);
        Ok(Self {
            space,
            grid,
            kind: ChartKind::Sampled(Arc::new(sampled)),
            step,
        })
    }

    /// Same chart on another grid.
    pub fn with_grid(mut self, grid: Grid<T>) -> Result<Self> {
        if grid.dim() != self.space.n {
            return Err(Error::InvalidInput("grid dimension mismatch".into()));
        }
        self.grid = grid;
        Ok(self)
    }

    /// Same bounds, `count` nodes per axis.
    pub fn resampled(self, count: usize) -> Result<Self> {
        let g = self.grid.resampled(count)?;
        self.with_grid(g)
    }

    pub fn with_step(mut self, h: T) -> Self {
        self.step = h;
        self
    }

    pub fn space(&self) -> SpaceForm {
        self.space
    }

    pub fn dim(&self) -> usize {
        self.space.n
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn kind(&self) -> &ChartKind<T> {
        &self.kind
    }

    pub fn default_step(&self) -> T {
        self.step
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            ChartKind::Builtin { family, flip, .. } => {
                format!("{}{}", family.name(), if *flip { " (flipped)" } else { "" })
            }
            ChartKind::Sampled(_) => "sampled".into(),
            ChartKind::Equidistant { base, s } => format!("equidistant({}, {s})", base.describe()),
            ChartKind::Function(_) => "function".into(),
        }
    }

    fn family_u(reverse_first: bool, u: &[T]) -> Vec<T> {
        let mut v = u.to_vec();
        if reverse_first {
            v[0] = -v[0];
        }
        v
    }

    /// `φ(u)` evaluated with any local interpolation anchored at `anchor`.
    fn eval_point(&self, u: &[T], anchor: &[T]) -> Result<Vec<T>> {
        match &self.kind {
            ChartKind::Builtin {
                family,
                reverse_first,
                ..
            } => Ok(family.point(&Self::family_u(*reverse_first, u))),
            ChartKind::Sampled(s) => s.eval(u, anchor),
            ChartKind::Equidistant { base, s } => {
                let c = self.space.curvature;
                let x = base.eval_point(u, anchor)?;
                let nu = base.eval_normal(u, anchor)?;
                Ok(crate::linalg::lincomb(c.co(*s), &x, c.si(*s), &nu))
            }
            ChartKind::Function(f) => Ok(f(u)),
        }
    }

    fn eval_normal(&self, u: &[T], anchor: &[T]) -> Result<Vec<T>> {
        match &self.kind {
            ChartKind::Builtin {
                family,
                flip,
                reverse_first,
            } => {
                let nu = family.normal(&Self::family_u(*reverse_first, u));
                Ok(if *flip { nu.iter().map(|&v| -v).collect() } else { nu })
            }
            ChartKind::Equidistant { base, s } => {
                let c = self.space.curvature;
                let x = base.eval_point(u, anchor)?;
                let nu = base.eval_normal(u, anchor)?;
                Ok(crate::linalg::lincomb(-c.c::<T>() * c.si(*s), &x, c.co(*s), &nu))
            }
            ChartKind::Sampled(_) | ChartKind::Function(_) => self.numeric_normal(u, anchor, self.step),
        }
    }

    pub fn point(&self, u: &[T]) -> Result<Vec<T>> {
        self.eval_point(u, u)
    }

    /// Gauss map: closed form for builtin families, the displaced normal
    /// `−c·si(s)φ + co(s)ν` for equidistant charts, numeric otherwise.
    pub fn gauss_map(&self, u: &[T]) -> Result<Vec<T>> {
        self.eval_normal(u, u)
    }

    pub fn has_oracle(&self) -> bool {
        match &self.kind {
            ChartKind::Builtin { .. } => true,
            ChartKind::Equidistant { base, .. } => base.has_oracle(),
            _ => false,
        }
    }

    /// Closed-form principal curvatures (ascending) where available.
    pub fn oracle_curvatures(&self, u: &[T]) -> Option<Vec<T>> {
        match &self.kind {
            ChartKind::Builtin {
                family,
                flip,
                reverse_first,
            } => {
                let mut k = family.curvatures(&Self::family_u(*reverse_first, u), self.space.n);
                if *flip {
                    k = k.iter().rev().map(|&v| -v).collect();
                }
                Some(k)
            }
            ChartKind::Equidistant { base, s } => {
                let c = self.space.curvature;
                let mut k: Vec<T> = base
                    .oracle_curvatures(u)?
                    .into_iter()
                    .map(|k| displaced_curvature(c, k, *s))
                    .collect();
                k.sort_by(|a, b| a.partial_cmp(b).unwrap());
                Some(k)
            }
            _ => None,
        }
    }

    /// Tangent vectors `∂_iφ` by 5-point central differences.
    fn tangents(&self, u: &[T], anchor: &[T], h: T) -> Result<Vec<Vec<T>>> {
        let n = self.space.n;
        let mut f = |p: &[T]| self.eval_point(p, anchor);
        (0..n)
            .map(|i| d1(&mut f, u, &unit(n, i), h, Stencil::Fourth))
            .collect()
    }

    /// Unit normal from the orthogonal complement of the finite-difference
    /// tangents (and of the position vector when `c ≠ 0`).
    pub fn numeric_normal(&self, u: &[T], anchor: &[T], h: T) -> Result<Vec<T>> {
        let tangents = self.tangents(u, anchor, h)?;
        let mut rows = Vec::with_capacity(tangents.len() + 1);
        if self.space.curvature != Curvature::Flat {
            rows.push(self.eval_point(u, anchor)?);
        }
        rows.extend(tangents);
        let n = self.space.lower(&generalized_cross(&rows));
        let nn = self.space.norm_sq(&n);
        if !(nn > T::zero()) || !nn.is_finite() {
            return Err(Error::RankDeficient {
                u: to_f64(u),
                ratio: 0.0,
            });
        }
        let r = nn.sqrt();
        Ok(n.iter().map(|&v| v / r).collect())
    }

    fn jet_once(&self, u: &[T], h: T) -> Result<PointJet<T>> {
        let n = self.space.n;
        let x = self.eval_point(u, u)?;
        let dphi = self.tangents(u, u, h)?;
        let metric = Matrix::from_fn(n, n, |i, j| self.space.inner(&dphi[i], &dphi[j]));
        let sv = symmetric_eigen(&metric).values;
        let ratio = (sv[0].max(T::zero()) / sv[n - 1]).sqrt();
        if !(ratio >= T::lit(RANK_TOL)) {
            return Err(Error::RankDeficient {
                u: to_f64(u),
                ratio: ratio.to_f64_lossy(),
            });
        }
        let mut nu = self.numeric_normal(u, u, h)?;
        let mut sign = T::one();
        if matches!(self.kind, ChartKind::Equidistant { .. }) {
            // keep the displaced normal even where the displacement reverses orientation
            if self.space.inner(&nu, &self.gauss_map(u)?) < T::zero() {
                sign = -T::one();
                nu = nu.iter().map(|&v| -v).collect();
            }
        }
        let mut nf = |p: &[T]| {
            self.numeric_normal(p, u, h)
                .map(|v| v.iter().map(|&a| sign * a).collect())
        };
        let dnu: Vec<Vec<T>> = (0..n)
            .map(|j| d1(&mut nf, u, &unit(n, j), h, Stencil::Fourth))
            .collect::<Result<_>>()?;
        let b = Matrix::from_fn(n, n, |i, j| -self.space.inner(&dphi[i], &dnu[j]));
        let l = metric.cholesky().ok_or_else(|| Error::RankDeficient {
            u: to_f64(u),
            ratio: ratio.to_f64_lossy(),
        })?;
        let li = l.lower_inverse();
        let m = li.mul(&b).mul(&li.transpose());
        let defect = m.asymmetry();
        let eig = symmetric_eigen(&m.symmetrized());
        let lit = li.transpose();
        let directions: Vec<Vec<T>> = (0..n).map(|k| lit.mul_vec(&eig.vectors.column(k))).collect();
        let frame: Vec<Vec<T>> = directions
            .iter()
            .map(|e| {
                let mut v = vec![T::zero(); x.len()];
                for (i, &ei) in e.iter().enumerate() {
                    crate::linalg::axpy(ei, &dphi[i], &mut v);
                }
                v
            })
            .collect();
        let clusters = cluster(&eig.values);
        Ok(PointJet {
            u: u.to_vec(),
            x,
            nu,
            dphi,
            dnu,
            metric,
            directions,
            frame,
            shape: eig.values,
            clusters,
            symmetry_defect: defect,
            step: h,
        })
    }

    /// Numerical jet at `u`; halves the step when the shape operator is
    /// not symmetric to `1e-5`.
    pub fn jet(&self, u: &[T], h: Option<T>) -> Result<PointJet<T>> {
        let mut h = h.unwrap_or(self.step);
        let mut last = None;
        for _ in 0..=STEP_RETRIES {
            if h < T::epsilon().sqrt() * T::lit(1e-2) {
                return Err(Error::StepUnderflow { h: h.to_f64_lossy() });
            }
            let jet = self.jet_once(u, h)?;
            if jet.symmetry_defect <= symmetry_tol::<T>() {
                return Ok(jet);
            }
            last = Some(jet.symmetry_defect);
            h = h * T::lit(0.5);
        }
        Err(Error::AsymmetricShapeOperator {
            u: to_f64(u),
            defect: last.unwrap().to_f64_lossy(),
        })
    }

    /// Clusters from the closed form when available, else from the jet.
    pub fn clusters_at(&self, u: &[T]) -> Result<Vec<Cluster<T>>> {
        match self.oracle_curvatures(u) {
            Some(k) => Ok(cluster(&k)),
            None => Ok(self.jet(u, None)?.clusters),
        }
    }

    pub fn curvatures_at(&self, u: &[T]) -> Result<Vec<T>> {
        match self.oracle_curvatures(u) {
            Some(k) => Ok(k),
            None => Ok(self.jet(u, None)?.shape),
        }
    }

    /// Clusters at every grid node, checking that the multiplicity pattern
    /// never changes.
    pub fn cluster_field(&self) -> Result<Vec<Vec<Cluster<T>>>> {
        let pts = self.grid.points();
        let all: Vec<Vec<Cluster<T>>> = pts
            .par_iter()
            .map(|u| self.clusters_at(u))
            .collect::<Result<_>>()?;
        let reference = multiplicities(&all[self.grid.center_index()]);
        for (u, c) in pts.iter().zip(&all) {
            let m = multiplicities(c);
            if m != reference {
                return Err(Error::ClusterPatternChanged {
                    expected: reference,
                    found: m,
                    u: to_f64(u),
                });
            }
        }
        Ok(all)
    }

    /// Rank of the stacked differential `(dφ, dν)`.
    pub fn legendrian_rank_check(&self, u: &[T]) -> RankDiagnostic {
        let n = self.space.n;
        let h = self.step;
        let dphi = match self.tangents(u, u, h) {
            Ok(t) => t,
            Err(_) => return RankDiagnostic { full_rank: false, condition: f64::INFINITY },
        };
        let mut nf = |p: &[T]| self.numeric_normal(p, u, h);
        let dnu: Vec<Vec<T>> = (0..n)
            .map(|j| d1(&mut nf, u, &unit(n, j), h, Stencil::Fourth))
            .collect::<Result<_>>()
            .unwrap_or_else(|_| vec![vec![T::zero(); dphi[0].len()]; n]);
        let rows: Vec<Vec<T>> = (0..n)
            .map(|i| {
                let mut r = dphi[i].clone();
                r.extend(dnu[i].iter().copied());
                r
            })
            .collect();
        let sv = singular_values(&Matrix::from_rows(&rows));
        let (max, min) = (sv[0], sv[n - 1]);
        let condition = if min > T::zero() { (max / min).to_f64_lossy() } else { f64::INFINITY };
        RankDiagnostic {
            full_rank: min >= T::lit(RANK_TOL) * max && max > T::zero(),
            condition,
        }
    }

    /// The parallel hypersurface `co(s)φ + si(s)ν`.
    pub fn equidistant(&self, s: T) -> Result<Self> {
        let c = self.space.curvature;
        let (co, si) = (c.co(s), c.si(s));
        let pts = self.grid.points();
        let checks: Vec<Result<()>> = pts
            .par_iter()
            .map(|u| {
                for k in self.curvatures_at(u)? {
                    if (co - k * si).abs() < T::lit(FOCAL_TOL) {
                        return Err(Error::FocalDistance {
                            s: s.to_f64_lossy(),
                            kappa: k.to_f64_lossy(),
                            u: to_f64(u),
                        });
                    }
                }
                Ok(())
            })
            .collect();
        checks.into_iter().collect::<Result<Vec<()>>>()?;
        Ok(Self {
            space: self.space,
            grid: self.grid.clone(),
            kind: ChartKind::Equidistant {
                base: Arc::new(self.clone()),
                s,
            },
            step: self.step,
        })
    }

    /// Largest quadric defect over the grid.
    pub fn max_quadric_defect(&self) -> Result<T> {
        let mut m = T::zero();
        for u in self.grid.points() {
            m = m.max(self.space.quadric_defect(&self.point(&u)?).abs());
        }
        Ok(m)
    }
}

fn symmetry_tol<T: Real>() -> T {
    T::lit(SYMMETRY_TOL).max(T::epsilon().sqrt() * T::lit(10.0))
}

/// Principal curvature of the displaced hypersurface:
/// `(κ co(s) + c si(s))/(co(s) − κ si(s))`.
pub fn displaced_curvature<T: Real>(c: Curvature, kappa: T, s: T) -> T {
    let (co, si) = (c.co(s), c.si(s));
    (kappa * co + c.c::<T>() * si) / (co - kappa * si)
}

pub(crate) fn to_f64<T: Real>(u: &[T]) -> Vec<f64> {
    u.iter().map(|v| v.to_f64_lossy()).collect()
}

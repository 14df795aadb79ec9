//! User charts given as ambient points on a structured grid, evaluated
//! between nodes by tensor-product Lagrange interpolation of degree 4.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Grid, HypersurfaceChart};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::spaceforms::SpaceForm;

const DEGREE: usize = 4;
const QUADRIC_TOL: f64 = 1e-9;

/// Sidecar metadata for a CSV chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartMeta {
    pub c: i8,
    pub n: usize,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SampledChart<T> {
    space: SpaceForm,
    grid: Grid<T>,
    points: Vec<Vec<T>>,
}

fn data_err(msg: impl Into<String>) -> Error {
    Error::ChartData(msg.into())
}

impl<T: Real> SampledChart<T> {
    pub fn new(space: SpaceForm, grid: Grid<T>, points: Vec<Vec<T>>) -> Result<Self> {
        if grid.dim() != space.n {
            return Err(data_err(format!(
                "grid has {} axes but n = {}",
                grid.dim(),
                space.n
            )));
        }
        if points.len() != grid.len() {
            return Err(data_err(format!(
                "expected {} points, got {}",
                grid.len(),
                points.len()
            )));
        }
        if let Some(k) = grid.shape().iter().position(|&m| m <= DEGREE) {
            return Err(data_err(format!(
                "axis {} needs at least {} nodes for degree-{DEGREE} interpolation",
                k + 1,
                DEGREE + 1
            )));
        }
        let amb = space.ambient_dim();
        for (i, p) in points.iter().enumerate() {
            if p.len() != amb {
                return Err(data_err(format!("point {i} has {} coordinates, expected {amb}", p.len())));
            }
            let d = space.quadric_defect(p).abs();
            if !(d <= T::lit(QUADRIC_TOL)) {
                return Err(data_err(format!(
                    "point {i} misses the space-form quadric by {:e}", d.to_f64_lossy()
                )));
            }
        }
        Ok(Self { space, grid, points })
    }

    pub fn space(&self) -> SpaceForm {
        self.space
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    /// First node of the interpolation stencil along `axis` for `anchor`.
    fn stencil_start(&self, axis: usize, anchor: T) -> usize {
        let nodes = self.grid.axis(axis);
        let i = match nodes.binary_search_by(|v| v.partial_cmp(&anchor).unwrap()) {
            Ok(i) => i,
            Err(i) => {
                if i == 0 {
                    0
                } else if i >= nodes.len() || anchor - nodes[i - 1] < nodes[i] - anchor {
                    i - 1
                } else {
                    i
                }
            }
        };
        i.saturating_sub(DEGREE / 2).min(nodes.len() - DEGREE - 1)
    }

    fn weights(&self, axis: usize, start: usize, x: T) -> [T; DEGREE + 1] {
        let nodes = &self.grid.axis(axis)[start..start + DEGREE + 1];
        let mut w = [T::one(); DEGREE + 1];
        for j in 0..=DEGREE {
            for m in 0..=DEGREE {
                if m != j {
                    w[j] = w[j] * (x - nodes[m]) / (nodes[j] - nodes[m]);
                }
            }
        }
        w
    }

    /// Interpolant at `u` using the stencils selected by `anchor`, projected
    /// back onto the quadric.
    pub fn eval(&self, u: &[T], anchor: &[T]) -> Result<Vec<T>> {
        let n = self.grid.dim();
        let starts: Vec<usize> = (0..n).map(|k| self.stencil_start(k, anchor[k])).collect();
        let weights: Vec<[T; DEGREE + 1]> = (0..n).map(|k| self.weights(k, starts[k], u[k])).collect();
        let amb = self.space.ambient_dim();
        let mut out = vec![T::zero(); amb];
        let mut idx = vec![0usize; n];
        loop {
            let mut w = T::one();
            let mut node = Vec::with_capacity(n);
            for k in 0..n {
                w = w * weights[k][idx[k]];
                node.push(starts[k] + idx[k]);
            }
            let p = &self.points[self.grid.flat_index(&node)];
            crate::linalg::axpy(w, p, &mut out);
            let mut k = n;
            loop {
                if k == 0 {
                    return Ok(self.space.project_point(&out));
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] <= DEGREE {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// Default sidecar location: `<csv path>.meta`.
pub fn default_meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Reads a CSV chart (`u1..un, x1..x{amb}` header, row-major grid) and its
/// TOML sidecar.
pub fn load_csv_chart<T: Real>(csv_path: &Path, meta_path: Option<&Path>) -> Result<HypersurfaceChart<T>> {
    let meta_path = meta_path.map(Path::to_path_buf).unwrap_or_else(|| default_meta_path(csv_path));
    let meta_text = std::fs::read_to_string(&meta_path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", meta_path.display())))?;
    let meta: ChartMeta = toml::from_str(&meta_text)
        .map_err(|e| data_err(format!("bad metadata {}: {e}", meta_path.display())))?;
    let space = SpaceForm::from_sign(meta.c, meta.n)?;
    if meta.shape.len() != meta.n {
        return Err(data_err(format!(
            "shape has {} entries, expected n = {}",
            meta.shape.len(),
            meta.n
        )));
    }
    let n = meta.n;
    let amb = space.ambient_dim();
    let mut reader = csv::Reader::from_path(csv_path)
        .map_err(|e| data_err(format!("cannot read {}: {e}", csv_path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| data_err(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let want: Vec<String> = (1..=n)
        .map(|i| format!("u{i}"))
        .chain((1..=amb).map(|i| format!("x{i}")))
        .collect();
    if header != want {
        return Err(data_err(format!("header {header:?}, expected {want:?}")));
    }
    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut xs: Vec<Vec<T>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| data_err(e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| data_err(format!("row {}: {e}", line + 2)))?;
        if vals.len() != n + amb {
            return Err(data_err(format!("row {} has {} fields", line + 2, vals.len())));
        }
        us.push(vals[..n].to_vec());
        xs.push(vals[n..].iter().map(|&v| T::lit(v)).collect());
    }
    let total: usize = meta.shape.iter().product();
    if us.len() != total {
        return Err(data_err(format!("{} rows for grid shape {:?}", us.len(), meta.shape)));
    }
    // axis k nodes: rows where only index k moves
    let mut axes = Vec::with_capacity(n);
    for k in 0..n {
        let stride: usize = meta.shape[k + 1..].iter().product();
        axes.push((0..meta.shape[k]).map(|j| T::lit(us[j * stride][k])).collect::<Vec<T>>());
    }
    let grid = Grid::from_axes(axes)?;
    for (i, u) in us.iter().enumerate() {
        let g = grid.point(i);
        for (a, b) in u.iter().zip(&g) {
            if (a - b.to_f64_lossy()).abs() > 1e-9 * (1.0 + a.abs()) {
                return Err(data_err(format!("row {} is not on the structured grid", i + 2)));
            }
        }
    }
    HypersurfaceChart::from_sampled(SampledChart::new(space, grid, xs)?)
}

/// Samples `chart` on its grid and writes CSV plus sidecar.
pub fn write_csv_chart<T: Real>(chart: &HypersurfaceChart<T>, csv_path: &Path) -> Result<()> {
    let space = chart.space();
    let n = space.n;
    let amb = space.ambient_dim();
    let io = |e: std::io::Error| data_err(e.to_string());
    let mut w = csv::Writer::from_path(csv_path).map_err(|e| data_err(e.to_string()))?;
    let header: Vec<String> = (1..=n)
        .map(|i| format!("u{i}"))
        .chain((1..=amb).map(|i| format!("x{i}")))
        .collect();
    w.write_record(&header).map_err(|e| data_err(e.to_string()))?;
    for u in chart.grid().points() {
        let x = chart.point(&u)?;
        let row: Vec<String> = u.iter().chain(&x).map(|v| format!("{:?}", v.to_f64_lossy())).collect();
        w.write_record(&row).map_err(|e| data_err(e.to_string()))?;
    }
    w.flush().map_err(io)?;
    let meta = ChartMeta {
        c: space.curvature.sign(),
        n,
        shape: chart.grid().shape(),
    };
    let text = toml::to_string(&meta).map_err(|e| data_err(e.to_string()))?;
    std::fs::write(default_meta_path(csv_path), text).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaceforms::{builtin_hypersurface, Family};

    #[test]
    fn interpolation_reproduces_quartics_exactly() {
        let space = SpaceForm::from_sign(0, 2).unwrap();
        let grid = Grid::uniform(&[(0.0, 1.0), (0.0, 2.0)], &[7, 9]).unwrap();
        let f = |u: &[f64]| vec![u[0], u[1], u[0].powi(4) - 2.0 * u[0] * u[1].powi(3) + 0.5];
        let pts = grid.points().iter().map(|u| f(u)).collect();
        let s = SampledChart::new(space, grid, pts).unwrap();
        let u = [0.37, 1.21];
        let x = s.eval(&u, &u).unwrap();
        assert!((x[2] - f(&u)[2]).abs() < 1e-13);
    }

    #[test]
    fn csv_round_trip_preserves_curvatures() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("torus.csv");
        let space = SpaceForm::from_sign(1, 2).unwrap();
        let chart = builtin_hypersurface::<f64>(space, Family::ProductTorus { a: 0.5, k: 1 }, 41).unwrap();
        write_csv_chart(&chart, &path).unwrap();
        let loaded = load_csv_chart::<f64>(&path, None).unwrap();
        assert_eq!(loaded.grid().shape(), vec![41, 41]);
        let u = loaded.grid().point(loaded.grid().center_index() + 3);
        let j = loaded.jet(&u, None).unwrap();
        let want = chart.oracle_curvatures(&u).unwrap();
        for (a, b) in j.shape.iter().zip(&want) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "u1,u2,x1,x2,x3\n0,0,1,0,0\n").unwrap();
        std::fs::write(default_meta_path(&path), "c = 1\nn = 2\nshape = [1, 1]\n").unwrap();
        assert!(matches!(load_csv_chart::<f64>(&path, None), Err(Error::ChartData(_))));
        std::fs::write(default_meta_path(&path), "c = 1\nn = 2\nshape = [5, 5]\n").unwrap();
        assert!(matches!(load_csv_chart::<f64>(&path, None), Err(Error::ChartData(_))));
    }
}

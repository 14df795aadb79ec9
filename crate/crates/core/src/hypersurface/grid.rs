use crate::error::{Error, Result};
use crate::real::Real;

/// Structured tensor-product grid over a box in `R^n`. Flat indices are
/// row-major: the last axis varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    axes: Vec<Vec<T>>,
}

impl<T: Real> Grid<T> {
    /// `counts[k]` equally spaced nodes on `[lo_k, hi_k]`, endpoints included.
    pub fn uniform(bounds: &[(T, T)], counts: &[usize]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() != counts.len() {
            return Err(Error::InvalidInput(format!(
                "grid needs one count per axis ({} bounds, {} counts)",
                bounds.len(),
                counts.len()
            )));
        }
        let mut axes = Vec::with_capacity(bounds.len());
        for (&(lo, hi), &m) in bounds.iter().zip(counts) {
            if m < 1 || !(lo <= hi) || (m > 1 && lo == hi) {
                return Err(Error::InvalidInput(format!(
                    "bad grid axis [{lo}, {hi}] with {m} nodes"
                )));
            }
            let axis = if m == 1 {
                vec![(lo + hi) * T::lit(0.5)]
            } else {
                (0..m)
                    .map(|j| lo + (hi - lo) * T::lit(j as f64 / (m - 1) as f64))
                    .collect()
            };
            axes.push(axis);
        }
        Ok(Self { axes })
    }

    pub fn from_axes(axes: Vec<Vec<T>>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
            return Err(Error::InvalidInput("grid axes must be nonempty".into()));
        }
        for a in &axes {
            if a.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidInput("grid axis nodes must increase".into()));
            }
        }
        Ok(Self { axes })
    }

    /// Same bounds, `count` nodes per axis.
    pub fn resampled(&self, count: usize) -> Result<Self> {
        let bounds: Vec<(T, T)> = (0..self.dim()).map(|k| self.bounds(k)).collect();
        Self::uniform(&bounds, &vec![count; self.dim()])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> &[T] {
        &self.axes[k]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self, k: usize) -> (T, T) {
        (self.axes[k][0], *self.axes[k].last().unwrap())
    }

    /// Smallest node spacing along any axis with more than one node.
    pub fn min_spacing(&self) -> Option<T> {
        self.axes
            .iter()
            .flat_map(|a| a.windows(2).map(|w| w[1] - w[0]))
            .fold(None, |m: Option<T>, d| Some(m.map_or(d, |m| m.min(d))))
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        let mut rem = flat;
        for k in (0..self.dim()).rev() {
            let m = self.axes[k].len();
            idx[k] = rem % m;
            rem /= m;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    pub fn point(&self, flat: usize) -> Vec<T> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a[i])
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn center_index(&self) -> usize {
        let idx: Vec<usize> = self.axes.iter().map(|a| a.len() / 2).collect();
        self.flat_index(&idx)
    }

    pub fn center(&self) -> Vec<T> {
        self.point(self.center_index())
    }

    /// Node closest to `u`, axis by axis.
    pub fn nearest(&self, u: &[T]) -> usize {
        let idx: Vec<usize> = self
            .axes
            .iter()
            .zip(u)
            .map(|(a, &x)| {
                let mut best = 0;
                for (j, &v) in a.iter().enumerate() {
                    if (v - x).abs() < (a[best] - x).abs() {
                        best = j;
                    }
                }
                best
            })
            .collect();
        self.flat_index(&idx)
    }

    /// Axis neighbours (`±1` along each axis).
    pub fn neighbors(&self, flat: usize) -> Vec<usize> {
        let idx = self.multi_index(flat);
        let mut out = Vec::with_capacity(2 * self.dim());
        for k in 0..self.dim() {
            if idx[k] > 0 {
                let mut j = idx.clone();
                j[k] -= 1;
                out.push(self.flat_index(&j));
            }
            if idx[k] + 1 < self.axes[k].len() {
                let mut j = idx.clone();
                j[k] += 1;
                out.push(self.flat_index(&j));
            }
        }
        out
    }

    /// Not on the boundary of any axis that has at least three nodes.
    pub fn is_interior(&self, flat: usize) -> bool {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .all(|(&i, a)| a.len() < 3 || (i > 0 && i + 1 < a.len()))
    }

    /// Breadth-first rings of flat indices starting at `seed`.
    pub fn rings(&self, seed: usize) -> Vec<Vec<usize>> {
        let mut dist = vec![usize::MAX; self.len()];
        dist[seed] = 0;
        let mut rings = vec![vec![seed]];
        loop {
            let mut next = Vec::new();
            for &i in rings.last().unwrap() {
                for j in self.neighbors(i) {
                    if dist[j] == usize::MAX {
                        dist[j] = rings.len();
                        next.push(j);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            next.sort_unstable();
            rings.push(next);
        }
        rings
    }

    /// Grid axes converted to `f64`.
    pub fn axes_f64(&self) -> Vec<Vec<f64>> {
        self.axes
            .iter()
            .map(|a| a.iter().map(|v| v.to_f64_lossy()).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let g = Grid::<f64>::uniform(&[(0.0, 1.0), (-1.0, 1.0), (2.0, 3.0)], &[3, 4, 5]).unwrap();
        assert_eq!(g.len(), 60);
        for f in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(f)), f);
        }
        assert_eq!(g.point(1), vec![0.0, -1.0, 2.25]);
        assert_eq!(g.neighbors(0).len(), 3);
    }

    #[test]
    fn rings_cover_grid_once() {
        let g = Grid::<f64>::uniform(&[(0.0, 1.0), (0.0, 1.0)], &[7, 5]).unwrap();
        let rings = g.rings(g.center_index());
        let mut all: Vec<usize> = rings.concat();
        all.sort_unstable();
        assert_eq!(all, (0..g.len()).collect::<Vec<_>>());
        assert_eq!(rings[1].len(), 4);
    }

    #[test]
    fn interior_excludes_boundary() {
        let g = Grid::<f64>::uniform(&[(0.0, 1.0), (0.0, 1.0)], &[4, 4]).unwrap();
        let n = (0..g.len()).filter(|&i| g.is_interior(i)).count();
        assert_eq!(n, 4);
    }
}

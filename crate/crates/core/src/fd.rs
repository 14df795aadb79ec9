//! Central finite differences of vector-valued maps on parameter space.

use crate::error::Result;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stencil {
    /// 3-point, error O(h²).
    Second,
    /// 5-point, error O(h⁴).
    Fourth,
}

fn offset<T: Real>(u: &[T], dirs: &[(&[T], T)]) -> Vec<T> {
    let mut p = u.to_vec();
    for (d, s) in dirs {
        for (pi, &di) in p.iter_mut().zip(d.iter()) {
            *pi = *pi + *s * di;
        }
    }
    p
}

fn accumulate<T: Real>(acc: &mut Option<Vec<T>>, w: T, v: &[T]) {
    match acc {
        None => *acc = Some(v.iter().map(|&x| w * x).collect()),
        Some(a) => {
            for (ai, &vi) in a.iter_mut().zip(v) {
                *ai = *ai + w * vi;
            }
        }
    }
}

const FIRST4: [(f64, f64); 4] = [
    (-2.0, 1.0 / 12.0),
    (-1.0, -8.0 / 12.0),
    (1.0, 8.0 / 12.0),
    (2.0, -1.0 / 12.0),
];
const FIRST2: [(f64, f64); 2] = [(-1.0, -0.5), (1.0, 0.5)];

fn first_weights(st: Stencil) -> &'static [(f64, f64)] {
    match st {
        Stencil::Second => &FIRST2,
        Stencil::Fourth => &FIRST4,
    }
}

/// Directional derivative `d/dε f(u + ε·dir)` at `ε = 0`.
pub fn d1<T, F>(f: &mut F, u: &[T], dir: &[T], h: T, st: Stencil) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let mut acc = None;
    for &(k, w) in first_weights(st) {
        let v = f(&offset(u, &[(dir, T::lit(k) * h)]))?;
        accumulate(&mut acc, T::lit(w) / h, &v);
    }
    Ok(acc.unwrap())
}

/// Second directional derivative `∂²/∂ε∂δ f(u + ε·a + δ·b)` at zero.
pub fn d2<T, F>(f: &mut F, u: &[T], a: &[T], b: &[T], h: T, st: Stencil) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    let mut acc = None;
    let h2 = h * h;
    if a == b {
        let w: &[(f64, f64)] = match st {
            Stencil::Second => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
            Stencil::Fourth => &[
                (-2.0, -1.0 / 12.0),
                (-1.0, 16.0 / 12.0),
                (0.0, -30.0 / 12.0),
                (1.0, 16.0 / 12.0),
                (2.0, -1.0 / 12.0),
            ],
        };
        for &(k, wk) in w {
            let v = f(&offset(u, &[(a, T::lit(k) * h)]))?;
            accumulate(&mut acc, T::lit(wk) / h2, &v);
        }
    } else {
        let w = first_weights(st);
        for &(ka, wa) in w {
            for &(kb, wb) in w {
                let v = f(&offset(u, &[(a, T::lit(ka) * h), (b, T::lit(kb) * h)]))?;
                accumulate(&mut acc, T::lit(wa * wb) / h2, &v);
            }
        }
    }
    Ok(acc.unwrap())
}

/// Unit coordinate vector `e_i` of `R^n`.
pub fn unit<T: Real>(n: usize, i: usize) -> Vec<T> {
    let mut e = vec![T::zero(); n];
    e[i] = T::one();
    e
}

//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.

use crate::real::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
/// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum QuadError {
    #[error("integrand not finite at {x}")]
    NotFinite { x: f64 },
    #[error("quadrature did not reach tolerance {tol:e} on [{a}, {b}] (estimated error {err:e})")]
    NoConvergence { a: f64, b: f64, tol: f64, err: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

/// One Gauss–Kronrod 15-point panel: returns (Kronrod value, |K − G|).
pub fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> Result<Estimate<T>, QuadError> {
    let half = (b - a) * T::lit(0.5);
    let centre = (a + b) * T::lit(0.5);
    let fc = f(centre);
    if !fc.is_finite() {
        return Err(QuadError::NotFinite {
            x: centre.to_f64_lossy(),
        });
    }
    let mut kron = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let (x1, x2) = (centre - dx, centre + dx);
        let (f1, f2) = (f(x1), f(x2));
        if !f1.is_finite() {
            return Err(QuadError::NotFinite { x: x1.to_f64_lossy() });
        }
        if !f2.is_finite() {
            return Err(QuadError::NotFinite { x: x2.to_f64_lossy() });
        }
        kron = kron + T::lit(WGK[j]) * (f1 + f2);
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    Ok(Estimate {
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    })
}

/// Integrates `f` over `[a, b]` (either orientation) to absolute
/// tolerance `tol`, bisecting the worst panel until the summed error
/// estimate falls below `tol` or `max_panels` is reached.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    tol: T,
    max_panels: usize,
) -> Result<Estimate<T>, QuadError> {
    if a == b {
        return Ok(Estimate {
            value: T::zero(),
            error: T::zero(),
        });
    }
    let first = gk15(&mut f, a, b)?;
    let mut panels: Vec<(T, T, Estimate<T>)> = vec![(a, b, first)];
    loop {
        let total_err: T = panels.iter().map(|p| p.2.error).sum();
        if total_err <= tol {
            break;
        }
        if panels.len() >= max_panels {
            return Err(QuadError::NoConvergence {
                a: a.to_f64_lossy(),
                b: b.to_f64_lossy(),
                tol: tol.to_f64_lossy(),
                err: total_err.to_f64_lossy(),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| {
                x.1 .2
                    .error
                    .partial_cmp(&y.1 .2.error)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .unwrap();
        let (pa, pb, _) = panels.swap_remove(worst);
        let mid = (pa + pb) * T::lit(0.5);
        let left = gk15(&mut f, pa, mid)?;
        let right = gk15(&mut f, mid, pb)?;
        panels.push((pa, mid, left));
        panels.push((mid, pb, right));
    }
    // sum in position order so the result does not depend on refinement order
    panels.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    Ok(Estimate {
        value: panels.iter().map(|p| p.2.value).sum(),
        error: panels.iter().map(|p| p.2.error).sum(),
    })
}

/// Composite Gauss–Legendre 5-point rule on `panels` equal subintervals.
/// Fixed and non-adaptive; used as an independent cross-check.
pub fn gauss_legendre5<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, panels: usize) -> T {
    const X: [f64; 5] = [
        0.0,
        0.538_469_310_105_683_1,
        -0.538_469_310_105_683_1,
        0.906_179_845_938_664,
        -0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let h = (b - a) / T::lit(panels as f64);
    let mut total = T::zero();
    for k in 0..panels {
        let lo = a + h * T::lit(k as f64);
        let c = lo + h * T::lit(0.5);
        let s: T = X
            .iter()
            .zip(W)
            .map(|(&x, w)| T::lit(w) * f(c + h * T::lit(0.5 * x)))
            .sum();
        total = total + s * h * T::lit(0.5);
    }
    total
}

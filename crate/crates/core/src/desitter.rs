//! Flat slicing of de Sitter space: `R^{n+1} ×_{e^t} R` is isometric to the
//! part of the hyperboloid `x₁² + ⋯ + x_{n+2}² − x_{n+3}² = 1` in `R^{n+3}_1`
//! where `x_{n+2} + x_{n+3} > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd::{d1, unit, Stencil};
use crate::immersion::{HeightMap, MTImmersion, VerificationReport, VerifyMode, VerifyOptions};
use crate::linalg::max_abs_diff;
use crate::real::Real;
use crate::spaceforms::{builtin_hypersurface, Family, SpaceForm};
use crate::warp::WarpProfile;

const ROUND_TRIP_TOL: f64 = 1e-10;

/// `(e^t y, cosh t − e^t|y|²/2, sinh t + e^t|y|²/2)`.
pub fn embed<T: Real>(y: &[T], t: T) -> Vec<T> {
    let et = t.exp();
    let half = et * y.iter().map(|&v| v * v).sum::<T>() * T::lit(0.5);
    let mut x: Vec<T> = y.iter().map(|&v| et * v).collect();
    x.push(t.cosh() - half);
    x.push(t.sinh() + half);
    x
}

/// `x₁² + ⋯ + x_{n+2}² − x_{n+3}²`.
pub fn lorentz_inner<T: Real>(a: &[T], b: &[T]) -> T {
    let k = a.len() - 1;
    a[..k].iter().zip(&b[..k]).map(|(&p, &q)| p * q).sum::<T>() - a[k] * b[k]
}

pub fn hyperboloid_defect<T: Real>(x: &[T]) -> T {
    (lorentz_inner(x, x) - T::one()).abs()
}

/// Inverse of [`embed`]: `t = ln(x_{n+2} + x_{n+3})`, `y = e^{−t}x_{1…n+1}`,
/// confirmed by re-embedding.
pub fn inverse_embed<T: Real>(x: &[T]) -> Result<(Vec<T>, T)> {
    if x.len() < 3 {
        return Err(Error::InvalidInput("de Sitter points need at least 3 coordinates".into()));
    }
    let k = x.len() - 2;
    let sum = x[k] + x[k + 1];
    if !(sum > T::zero()) {
        return Err(Error::OutsideDeSitterChart { sum: sum.to_f64_lossy() });
    }
    let t = sum.ln();
    let y: Vec<T> = x[..k].iter().map(|&v| v / sum).collect();
    let back = embed(&y, t);
    let scale = x.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let d = max_abs_diff(&back, x);
    if !(d <= T::tol(ROUND_TRIP_TOL) * scale) {
        return Err(Error::InvalidInput(format!(
            "point is off the hyperboloid: re-embedding misses it by {:e}",
            d.to_f64_lossy()
        )));
    }
    Ok((y, t))
}

/// Largest entry of `J^T η J − diag(e^{2t}, …, e^{2t}, −1)` over `points`,
/// with `J` the central-difference Jacobian of [`embed`] at step `h`.
pub fn pullback_check<T: Real>(points: &[(Vec<T>, T)], h: T) -> Result<T> {
    let mut worst = T::zero();
    for (y, t) in points {
        let m = y.len() + 1;
        let mut u = y.clone();
        u.push(*t);
        let mut f = |p: &[T]| Ok(embed(&p[..m - 1], p[m - 1]));
        let cols: Vec<Vec<T>> = (0..m)
            .map(|i| d1(&mut f, &u, &unit(m, i), h, Stencil::Second))
            .collect::<Result<_>>()?;
        let e2t = (T::lit(2.0) * *t).exp();
        for i in 0..m {
            for j in 0..m {
                let want = match (i == j, i == m - 1) {
                    (false, _) => T::zero(),
                    (true, true) => -T::one(),
                    (true, false) => e2t,
                };
                worst = worst.max((lorentz_inner(&cols[i], &cols[j]) - want).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosscheckReport {
    pub n: usize,
    pub points: usize,
    /// Largest hyperboloid defect of `φ̄₁`.
    pub hyperboloid_defect: f64,
    /// `max |embed⁻¹(φ̄₁) − (e^{−τ₂}x, τ₂)|`.
    pub isometry_defect: f64,
    /// `max |embed⁻¹(φ̄₁) − φ̄|` for the normal-form immersion over the unit sphere.
    pub immersion_defect: f64,
    /// `max |ψ − θχ − Cx|`.
    pub reconstruction_defect: f64,
    /// `C = 1/w(t₀)·…`: the constant with `θ = C − e^{−t}`.
    pub c_const: f64,
    pub verification: VerificationReport,
}

/// Null-2ff cross-check through de Sitter space: the codimension-two
/// submanifold `φ̄₁ = (x, τ₁, τ₁)` of the hyperboloid, for `x` on the unit
/// sphere `Sⁿ`, pulled back to `R^{n+1} ×_{e^t} R` must be the normal-form
/// immersion over the unit sphere with height `τ₂ = ln(2τ₁)` and `t₀ = 0`.
pub fn crosscheck_null2ff<T, F>(n: usize, tau1: F, points_per_axis: usize, opts: &VerifyOptions<T>) -> Result<CrosscheckReport>
where
    T: Real,
    F: Fn(&[T]) -> T + Send + Sync + Clone + 'static,
{
    let space = SpaceForm::from_sign(0, n)?;
    let chart = builtin_hypersurface::<T>(space, Family::RoundSphere { r: 1.0 }, points_per_axis)?;
    let warp = WarpProfile::<T>::new("exp(t)", T::neg_infinity(), T::infinity(), Some(T::zero()))?;
    // θ(t) = 1 − e^{−t}
    let c_const = T::one();
    let t1 = tau1.clone();
    let sphere = chart.clone();
    let height = HeightMap::function(move |u: &[T]| {
        let x = sphere.point(u)?;
        let v = t1(&x);
        if !(v > T::zero()) {
            return Err(Error::NonPositiveTau {
                value: v.to_f64_lossy(),
                x: x.iter().map(|a| a.to_f64_lossy()).collect(),
            });
        }
        Ok((T::lit(2.0) * v).ln())
    });
    let im = MTImmersion::new(chart.clone(), warp, height);
    let mut hyper = T::zero();
    let mut iso = T::zero();
    let mut imm = T::zero();
    let mut recon = T::zero();
    let grid = chart.grid();
    for i in 0..grid.len() {
        let u = grid.point(i);
        let x = chart.point(&u)?;
        let v = tau1(&x);
        if !(v > T::zero()) {
            return Err(Error::NonPositiveTau {
                value: v.to_f64_lossy(),
                x: x.iter().map(|a| a.to_f64_lossy()).collect(),
            });
        }
        let mut phi1 = x.clone();
        phi1.push(v);
        phi1.push(v);
        hyper = hyper.max(hyperboloid_defect(&phi1));
        let (y, t) = inverse_embed(&phi1)?;
        let tau2 = (T::lit(2.0) * v).ln();
        let mut pulled = y;
        pulled.push(t);
        let mut phi2: Vec<T> = x.iter().map(|&a| (-tau2).exp() * a).collect();
        phi2.push(tau2);
        iso = iso.max(max_abs_diff(&pulled, &phi2));
        let p = im.evaluate(&u)?;
        imm = imm.max(max_abs_diff(&pulled, &p.lift()));
        let rebuilt = crate::linalg::lincomb(T::one(), &p.psi, -p.theta, &p.chi);
        let cx: Vec<T> = x.iter().map(|&a| c_const * a).collect();
        recon = recon.max(max_abs_diff(&rebuilt, &cx));
    }
    let verification = im.verify(VerifyMode::Null2ff, opts)?;
    Ok(CrosscheckReport {
        n,
        points: grid.len(),
        hyperboloid_defect: hyper.to_f64_lossy(),
        isometry_defect: iso.to_f64_lossy(),
        immersion_defect: imm.to_f64_lossy(),
        reconstruction_defect: recon.to_f64_lossy(),
        c_const: c_const.to_f64_lossy(),
        verification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn embed_examples() {
        let x = embed(&[0.0, 0.0, 0.0], 0.0f64);
        assert_eq!(x, vec![0.0, 0.0, 0.0, 1.0, 0.0]);
        let x = embed(&[0.0, 0.0], 0.7f64);
        assert!((x[2] - 0.7f64.cosh()).abs() < 1e-15 && (x[3] - 0.7f64.sinh()).abs() < 1e-15);
    }

    #[test]
    fn random_points_on_hyperboloid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = rng.random_range(-1.0..1.0);
            let x = embed(&y, t);
            assert!(hyperboloid_defect(&x) <= 1e-12);
            let (yb, tb) = inverse_embed(&x).unwrap();
            assert!((tb - t).abs() < 1e-10 && max_abs_diff(&yb, &y) < 1e-10);
        }
    }

    #[test]
    fn inverse_rejects_outside_chart() {
        assert!(matches!(
            inverse_embed(&[0.0, 0.0, -1.0, 0.0f64]),
            Err(Error::OutsideDeSitterChart { .. })
        ));
        assert!(inverse_embed(&[0.5, 0.0, 1.0, 0.0f64]).is_err());
    }

    #[test]
    fn pullback_is_warped_metric() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(Vec<f64>, f64)> = (0..200)
            .map(|_| ((0..3).map(|_| rng.random_range(-1.0..1.0)).collect(), rng.random_range(-1.0..1.0)))
            .collect();
        assert!(pullback_check(&pts, 1e-5).unwrap() <= 1e-8);
        // second order in h
        let p = vec![(vec![0.4, -0.3, 0.8], 0.6)];
        let a: f64 = pullback_check(&p, 1e-2).unwrap();
        let b = pullback_check(&p, 5e-3).unwrap();
        assert!((a / b).log2() > 1.9);
    }

    #[test]
    fn crosscheck_profiles() {
        let opts = VerifyOptions::default();
        let r = crosscheck_null2ff(2, |_: &[f64]| 0.5, 7, &opts).unwrap();
        assert!(r.isometry_defect < 1e-12 && r.verification.passed);
        assert!(r.verification.max_2ff_defect.unwrap() <= 1e-8);
        let r = crosscheck_null2ff(2, |x: &[f64]| (1.0 + x[0] / 4.0) / 2.0, 9, &opts).unwrap();
        assert!(r.isometry_defect < 1e-8, "{r:?}");
        assert!(r.immersion_defect < 1e-8, "{r:?}");
        assert!(r.reconstruction_defect < 1e-8, "{r:?}");
        assert!(r.verification.max_2ff_defect.unwrap() <= 1e-7, "{r:?}");
        assert!(r.hyperboloid_defect <= 1e-10);
    }

    #[test]
    fn non_positive_tau_is_rejected() {
        let r = crosscheck_null2ff(2, |x: &[f64]| x[0], 5, &VerifyOptions::default());
        assert!(matches!(r, Err(Error::NonPositiveTau { .. })));
    }
}

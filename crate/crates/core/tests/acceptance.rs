//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::f64::consts::{FRAC_PI_6, PI};
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trapped::desitter::{crosscheck_null2ff, embed, hyperboloid_defect, inverse_embed, pullback_check};
use trapped::expr::Expression;
use trapped::fd::Stencil;
use trapped::hypersurface::Cluster;
use trapped::immersion::verify_null_curve;
use trapped::mtsolve::{build_null_curve, slice_check, Admissibility};
use trapped::spaceforms::builtin_hypersurface;
use trapped::{
    Curvature, Family, HeightMap, HypersurfaceChart, MTEquation, MTImmersion, SpaceForm, Tolerances, VerifyMode,
    VerifyOptions, WarpProfile,
};

type Outcome = Result<(bool, String), String>;

fn space(c: i8, n: usize) -> SpaceForm {
    SpaceForm::from_sign(c, n).unwrap()
}

fn warp(src: &str, t0: f64) -> WarpProfile<f64> {
    WarpProfile::new(src, f64::NEG_INFINITY, f64::INFINITY, Some(t0)).unwrap()
}

fn chart_for(c: i8, ppa: usize) -> HypersurfaceChart<f64> {
    let family = match c {
        1 => Family::ProductTorus { a: FRAC_PI_6, k: 1 },
        0 => Family::RoundSphere { r: 1.5 },
        _ => Family::GeodesicSphere { r: 1.0 },
    };
    builtin_hypersurface(space(c, 2), family, ppa).unwrap()
}

fn random_u(chart: &HypersurfaceChart<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let g = chart.grid();
    (0..g.dim())
        .map(|k| {
            let (a, b) = g.bounds(k);
            let m = 0.05 * (b - a);
            rng.random_range(a + m..b - m)
        })
        .collect()
}

fn identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let warps = ["1", "exp(t)", "2+cosh(t)^2"];
    let mut worst = 0.0f64;
    for c in [-1i8, 0, 1] {
        let cv = Curvature::try_from(c).unwrap();
        for _ in 0..1000 {
            let s: f64 = rng.random_range(-3.0..3.0);
            let co = cv.co(s);
            let si = cv.si(s);
            worst = worst.max((co * co + c as f64 * si * si - 1.0).abs() / (1.0 + co * co));
        }
        for src in warps {
            let w = warp(src, 0.0);
            let mut checked = 0;
            while checked < 1000 {
                let t = rng.random_range(-0.9..0.9);
                let (d1, _) = w.theta_derivatives(t).map_err(|e| e.to_string())?;
                worst = worst.max((d1 * w.w(t).unwrap() - 1.0).abs());
                match (w.omega(cv, t), w.omega_theta_form(cv, t)) {
                    (Ok(a), Ok(b)) => worst = worst.max((a - b).abs() / (1.0 + a.abs())),
                    _ => continue,
                }
                checked += 1;
            }
        }
        let chart = chart_for(c, 5);
        let im = MTImmersion::new(
            chart.clone(),
            warp("2+cosh(t)^2", 0.0),
            HeightMap::function(|u: &[f64]| Ok(0.1 + 0.05 * u[0].sin() * u[1].cos())),
        );
        for k in 0..1000 {
            let u = random_u(&chart, &mut rng);
            worst = worst.max(im.frame_inversion_defect(&u).map_err(|e| e.to_string())?);
            if k % 4 == 0 {
                worst = worst.max(im.d_formula_defect(&u, 1e-3).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok((worst <= 1e-8, format!("max identity defect {worst:.2e}")))
}

fn analytic_vs_fd() -> Outcome {
    let cases: [(i8, &str); 5] = [(1, "1"), (0, "exp(t)"), (-1, "2+cosh(t)^2"), (1, "2+cosh(t)^2"), (-1, "1")];
    let mut worst_order = f64::INFINITY;
    let mut detail = Vec::new();
    for (c, src) in cases {
        let chart = chart_for(c, 5);
        let im = MTImmersion::new(
            chart.clone(),
            warp(src, 0.0),
            HeightMap::function(|u: &[f64]| Ok(0.15 + 0.05 * u[0].cos() + 0.03 * u[1])),
        );
        let u = chart.grid().center();
        let err = |h: f64| -> Result<f64, String> {
            let opts = VerifyOptions {
                step: h,
                stencil: Stencil::Second,
                tolerances: Tolerances::default(),
            };
            let p = im.evaluate(&u).map_err(|e| e.to_string())?;
            let an = im.analytic_pieces(&p).map_err(|e| e.to_string())?;
            let d = im.point_diagnostics(&u, &opts).map_err(|e| e.to_string())?;
            Ok(d.metric_defect.max(d.null_sff.max_abs_diff(&an.null_sff)))
        };
        let (e1, e2) = (err(1e-2)?, err(5e-3)?);
        let order = (e1 / e2).log2();
        worst_order = worst_order.min(order);
        detail.push(format!("c={c} w={src}: {e1:.1e}->{e2:.1e} order {order:.2}"));
    }
    Ok((worst_order >= 1.9, detail.join("; ")))
}

fn clifford() -> Outcome {
    let w = WarpProfile::constant(1.0).unwrap();
    let a = FRAC_PI_6;
    let eq = MTEquation::new(
        &w,
        space(1, 2),
        vec![
            Cluster { kappa: -a.tan(), multiplicity: 1 },
            Cluster { kappa: 1.0 / a.tan(), multiplicity: 1 },
        ],
    )
    .map_err(|e| e.to_string())?;
    let set = eq.brackets();
    let sol = eq.solve_point(set.branch(0).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let ct_err = (1.0 / sol.s.tan() - (2.0 - 3f64.sqrt())).abs();

    let chart = chart_for(1, 9);
    let im = MTImmersion::from_branch(chart.clone(), w.clone(), 0).map_err(|e| e.to_string())?;
    let r = im.verify(VerifyMode::Mt, &VerifyOptions::default()).map_err(|e| e.to_string())?;
    let tau = sol.tau;
    let bad = MTImmersion::new(chart, w, HeightMap::function(move |u: &[f64]| Ok(tau + 0.05 * (1.0 + 0.2 * u[0].sin()))));
    let rb = bad.verify(VerifyMode::Mt, &VerifyOptions::default()).map_err(|e| e.to_string())?;
    let ok = ct_err <= 1e-9 && r.max_hnull <= 1e-6 && r.max_hnu <= 1e-5 && rb.max_hnull > 1e-3;
    Ok((
        ok,
        format!(
            "ct error {ct_err:.1e}, max <H,H> {:.1e}, max <H,nu> {:.1e}, perturbed <H,H> {:.1e}",
            r.max_hnull, r.max_hnu, rb.max_hnull
        ),
    ))
}

fn sphere_slice() -> Outcome {
    let chart: HypersurfaceChart<f64> = builtin_hypersurface(space(0, 2), Family::RoundSphere { r: 2.0 }, 9).unwrap();
    let w = warp("exp(t)", 0.0);
    let good = slice_check(&chart, &w, -(2f64.ln())).map_err(|e| e.to_string())?;
    let wrong = slice_check(&chart, &w, 0.0).map_err(|e| e.to_string())?;
    let im = MTImmersion::slice(chart.clone(), &w, -(2f64.ln())).map_err(|e| e.to_string())?;
    let r = im.verify(VerifyMode::Slice, &VerifyOptions::default()).map_err(|e| e.to_string())?;
    let im0 = MTImmersion::slice(chart, &w, 0.0).map_err(|e| e.to_string())?;
    let r0 = im0.verify(VerifyMode::Slice, &VerifyOptions::default()).map_err(|e| e.to_string())?;
    let ok = good.is_mt
        && good.max_defect <= 1e-7
        && r.passed
        && !wrong.is_mt
        && (wrong.max_defect - 0.5).abs() <= 1e-6
        && !r0.passed
        && (r0.max_hnu - 0.5).abs() <= 1e-6;
    Ok((
        ok,
        format!(
            "T=-ln2 defect {:.1e}; T=0 defect {:.9}, verifier <H,nu> {:.9}",
            good.max_defect, wrong.max_defect, r0.max_hnu
        ),
    ))
}

fn exponential_curve() -> Outcome {
    let t0 = 0.4;
    let w = warp("exp(t)", t0);
    let big_c = (-t0).exp();
    let tau = Expression::parse_with_vars("0.3*sin(s) - 0.1*s", &["s"]).map_err(|e| e.to_string())?;
    let curve = build_null_curve(&w, space(0, 1), &tau, 3.0, 1e-3).map_err(|e| e.to_string())?;
    let kappa_err = curve
        .samples
        .iter()
        .map(|s| (s.kappa - 1.0 / big_c).abs())
        .fold(0.0, f64::max);
    let r = verify_null_curve(&curve, &w, Tolerances::default()).map_err(|e| e.to_string())?;
    let ok = curve.samples.len() >= 1000 && kappa_err <= 1e-9 && r.max_hnull <= 1e-6;
    Ok((
        ok,
        format!(
            "{} samples, kappa - 1/C {kappa_err:.1e}, max |<H,H>| {:.1e}",
            curve.samples.len(),
            r.max_hnull
        ),
    ))
}

fn expected_admissible(c: i8, k: &[f64]) -> usize {
    k.windows(2)
        .filter(|p| match c {
            1 => true,
            0 => p[0] != 0.0 && p[1] != 0.0 && (p[0] > 0.0) == (p[1] > 0.0),
            _ => (p[0] > 1.0 && p[1] > 1.0) || (p[0] < -1.0 && p[1] < -1.0),
        })
        .count()
}

fn random_set(c: i8, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let p = rng.random_range(2..6);
        let mut k: Vec<f64> = (0..p)
            .map(|_| match c {
                0 if rng.random_bool(0.15) => 0.0,
                _ => rng.random_range(-5.0..5.0),
            })
            .collect();
        k.sort_by(|a, b| a.partial_cmp(b).unwrap());
        k.dedup();
        let spaced = k.windows(2).all(|w| w[1] - w[0] > 0.05);
        let edge = k.iter().any(|v| (v.abs() - 1.0).abs() < 0.05);
        if k.len() >= 2 && spaced && !edge && expected_admissible(c, &k) > 0 {
            return k;
        }
    }
}

fn bracketing() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let warps = [WarpProfile::constant(1.0).unwrap(), warp("1+0.5*sin(t)", 0.0)];
    let mut lines = Vec::new();
    let mut ok = true;
    for c in [1i8, 0, -1] {
        let mut brackets = 0;
        for trial in 0..10 {
            let w = &warps[trial % 2];
            let k = random_set(c, &mut rng);
            let clusters: Vec<Cluster<f64>> = k
                .iter()
                .map(|&kappa| Cluster { kappa, multiplicity: rng.random_range(1..3) })
                .collect();
            let n = clusters.iter().map(|c| c.multiplicity).sum();
            let eq = MTEquation::new(w, space(c, n), clusters).map_err(|e| e.to_string())?;
            let set = eq.brackets();
            if set.admissible_count() != expected_admissible(c, &k) {
                ok = false;
            }
            let formula_q = match c {
                1 => k.len() as i64 - 1,
                0 => k.iter().filter(|v| **v != 0.0).count() as i64 - 1,
                _ => k.iter().filter(|v| v.abs() > 1.0).count() as i64 - 2,
            };
            // for c = -1 the formula and the count are both reported, not compared
            if set.q != formula_q {
                ok = false;
            }
            for b in set.admissible() {
                brackets += 1;
                let sol = eq.solve_point(b).map_err(|e| format!("c={c} {k:?}: {e}"))?;
                if !(b.g_lo * b.g_hi < 0.0 && sol.s > b.s_lo && sol.s < b.s_hi && sol.residual <= 1e-9) {
                    ok = false;
                }
            }
            for (b, pair) in set.brackets.iter().zip(k.windows(2)) {
                if b.is_admissible() != (expected_admissible(c, pair) == 1) {
                    ok = false;
                }
                if c == 0 && pair.contains(&0.0) && b.admissibility != Admissibility::ZeroCurvature {
                    ok = false;
                }
            }
        }
        lines.push(format!("c={c}: {brackets} brackets"));
    }
    Ok((ok, lines.join(", ")))
}

fn de_sitter() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut hyper = 0.0f64;
    let mut trip = 0.0f64;
    let mut pts = Vec::new();
    for _ in 0..1000 {
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = rng.random_range(-1.0..1.0);
        let x = embed(&y, t);
        hyper = hyper.max(hyperboloid_defect(&x));
        let (yb, tb) = inverse_embed(&x).map_err(|e| e.to_string())?;
        trip = trip.max((tb - t).abs()).max(trapped::linalg::max_abs_diff(&yb, &y));
        pts.push((y, t));
    }
    let pullback = pullback_check(&pts, 1e-5).map_err(|e| e.to_string())?;
    let profiles: [(&str, fn(&[f64]) -> f64); 3] = [
        ("1/2", |_| 0.5),
        ("(1+x1/4)/2", |x| (1.0 + x[0] / 4.0) / 2.0),
        ("(1.2+0.3x2x3)/2", |x| (1.2 + 0.3 * x[1] * x[2]) / 2.0),
    ];
    let mut ok = hyper <= 1e-10 && pullback <= 1e-8 && trip <= 1e-10;
    let mut detail = vec![format!("hyperboloid {hyper:.1e}, pullback {pullback:.1e}")];
    for (name, f) in profiles {
        let r = crosscheck_null2ff(2, f, 9, &VerifyOptions::default()).map_err(|e| e.to_string())?;
        let sff = r.verification.max_2ff_defect.unwrap_or(f64::INFINITY);
        ok &= r.isometry_defect <= 1e-8
            && r.immersion_defect <= 1e-8
            && sff <= 1e-7
            && r.reconstruction_defect <= 1e-8
            && r.hyperboloid_defect <= 1e-10;
        detail.push(format!(
            "tau1={name}: isometry {:.1e}, 2ff {sff:.1e}, phi2-Cx {:.1e}",
            r.isometry_defect, r.reconstruction_defect
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn spacelike_guard() -> Outcome {
    let w = WarpProfile::constant(1.0).unwrap();
    let accepted = [
        chart_for(1, 9),
        builtin_hypersurface(space(0, 2), Family::TorusOfRevolution { big_r: 2.0, r: 1.0 }, 9).unwrap(),
        builtin_hypersurface(space(1, 2), Family::ProductTorus { a: PI / 5.0, k: 1 }, 9).unwrap(),
    ];
    let mut ok = true;
    let mut min_eig = f64::INFINITY;
    for chart in accepted {
        let im = MTImmersion::from_branch(chart, w.clone(), 0).map_err(|e| e.to_string())?;
        let r = im.verify(VerifyMode::Mt, &VerifyOptions::default()).map_err(|e| e.to_string())?;
        ok &= r.passed && r.spacelike_min_eig > 0.0 && r.checks.spacelike;
        min_eig = min_eig.min(r.spacelike_min_eig);
    }
    let sphere: HypersurfaceChart<f64> = builtin_hypersurface(space(0, 2), Family::RoundSphere { r: 1.0 }, 9).unwrap();
    let focal = MTImmersion::new(sphere, w, HeightMap::function(|u: &[f64]| Ok(1.0 + 0.3 * u[0])));
    let r = focal.verify(VerifyMode::Mt, &VerifyOptions::default()).map_err(|e| e.to_string())?;
    ok &= !r.checks.spacelike && !r.passed;
    Ok((
        ok,
        format!(
            "accepted min eig {min_eig:.3}; focal instance: {} crossings, rejected = {}",
            r.focal_crossings, !r.passed
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("identity suite", identities),
        ("analytic metric and 2ff vs finite differences", analytic_vs_fd),
        ("Clifford torus end-to-end", clifford),
        ("sphere slice", sphere_slice),
        ("exponential warp null curve", exponential_curve),
        ("bracketing and counts", bracketing),
        ("de Sitter cross-check", de_sitter),
        ("spacelike guard", spacelike_guard),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} [{:.1}s] {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Config to scene: builds the warp, the chart and the immersion, then
//! verifies and exports.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use trapped::desitter::crosscheck_null2ff;
use trapped::expr::Expression;
use trapped::hypersurface::load_csv_chart;
use trapped::immersion::verify_null_curve;
use trapped::mtsolve::{build_null_curve, null_2ff_mode, Null2ffRecipe, NullCurve};
use trapped::spaceforms::builtin_hypersurface;
use trapped::{
    Family, HeightMap, HypersurfaceChart64, MTEquation, MTImmersion64, SpaceForm, VerificationReport, VerifyMode,
    VerifyOptions64, WarpProfile64,
};

use crate::config::{ModeKind, SceneConfig};
use crate::CliError;

const DEFAULT_POINTS: usize = 17;
const DEFAULT_CURVE_LENGTH: f64 = 2.0;
const DEFAULT_CURVE_STEP: f64 = 1e-2;
/// Agreement required between a saved immersion CSV and a rebuild.
pub const REPLAY_TOL: f64 = 1e-9;

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub branch: Option<usize>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut SceneConfig) -> Result<(), CliError> {
        if let Some(b) = self.branch {
            if cfg.mode.kind != ModeKind::Mt {
                return Err(CliError::config("--branch only applies to mt mode"));
            }
            cfg.mode.branch = Some(b);
        }
        if let Some(g) = self.grid {
            if g < 3 {
                return Err(CliError::config("--grid needs at least 3 points per axis"));
            }
            cfg.chart.points_per_axis = Some(g);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(())
    }
}

pub fn space(cfg: &SceneConfig) -> Result<SpaceForm, CliError> {
    Ok(SpaceForm::from_sign(cfg.spaceform.c, cfg.spaceform.n)?)
}

pub fn warp(cfg: &SceneConfig) -> Result<WarpProfile64, CliError> {
    let [lo, hi] = &cfg.warp.interval;
    let t0 = cfg.warp.t0.as_ref().map(|t| t.value()).transpose()?;
    Ok(WarpProfile64::new(&cfg.warp.w, lo.value()?, hi.value()?, t0)?)
}

fn points_per_axis(cfg: &SceneConfig) -> usize {
    cfg.chart.points_per_axis.unwrap_or(DEFAULT_POINTS)
}

pub fn chart(cfg: &SceneConfig) -> Result<HypersurfaceChart64, CliError> {
    let space = space(cfg)?;
    let c = &cfg.chart;
    if let Some(csv) = &c.csv {
        let chart: HypersurfaceChart64 = load_csv_chart(csv, c.meta.as_deref())?;
        if chart.space() != space {
            return Err(CliError::config(format!(
                "chart file describes c = {}, n = {} but the spaceform section says c = {}, n = {}",
                chart.space().curvature.sign(),
                chart.space().n,
                space.curvature.sign(),
                space.n
            )));
        }
        return Ok(match c.points_per_axis {
            Some(k) => chart.resampled(k)?,
            None => chart,
        });
    }
    let name = c
        .family
        .as_deref()
        .ok_or_else(|| CliError::config("chart.family or chart.csv is required"))?;
    let params: BTreeMap<String, f64> = c
        .params
        .iter()
        .map(|(k, v)| Ok((k.clone(), v.value()?)))
        .collect::<Result<_, CliError>>()?;
    let family = Family::from_name(name, &params, c.expression.as_deref(), space.n)?;
    Ok(builtin_hypersurface(space, family, points_per_axis(cfg))?)
}

fn verify_options(cfg: &SceneConfig) -> VerifyOptions64 {
    VerifyOptions64 {
        step: cfg.verify.step,
        stencil: cfg.verify.stencil,
        tolerances: cfg.tolerances,
    }
}

fn coordinate_names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

fn parse_in(src: &str, vars: &[String]) -> Result<Expression, CliError> {
    let refs: Vec<&str> = vars.iter().map(String::as_str).collect();
    Expression::parse_with_vars(src, &refs).map_err(|e| CliError::config(format!("bad expression `{src}`: {e}")))
}

/// What a scene produces.
pub enum Built {
    Surface(MTImmersion64),
    Curve(NullCurve<f64>, WarpProfile64),
    /// The de Sitter check builds its own immersion internally.
    DeSitter,
}

/// Builds the geometric object of the scene along with descriptive details.
pub fn build(cfg: &SceneConfig) -> Result<(Built, Value), CliError> {
    let space = space(cfg)?;
    let warp = warp(cfg)?;
    match cfg.mode.kind {
        ModeKind::Mt => {
            let chart = chart(cfg)?;
            let branch = cfg.mode.branch.unwrap_or(0);
            let details = json!({ "chart": chart.describe(), "branch": branch });
            let im = MTImmersion64::from_branch(chart, warp, branch)?;
            let field = im.field().expect("branch immersions carry a field");
            let details = merge(
                details,
                json!({
                    "max_residual": field.max_residual(),
                    "unsolved_nodes": field.failures.len(),
                    "pattern": field.pattern,
                }),
            );
            Ok((Built::Surface(im), details))
        }
        ModeKind::Slice => {
            let chart = chart(cfg)?;
            let t = cfg.mode.t.as_ref().expect("validated").value()?;
            let details = json!({ "chart": chart.describe(), "t": t });
            Ok((Built::Surface(MTImmersion64::slice(chart, &warp, t)?), details))
        }
        ModeKind::Null2ff => {
            let t = cfg.mode.t.as_ref().map(|t| t.value()).transpose()?;
            let recipe = null_2ff_mode(&warp, space, t)?;
            let chart = recipe.chart(space, points_per_axis(cfg))?;
            let details = json!({ "chart": chart.describe(), "recipe": recipe });
            let im = match recipe {
                Null2ffRecipe::Slice { .. } if cfg.mode.tau.is_some() => {
                    return Err(CliError::config(
                        "mode.tau needs a constant Omega; this warp only admits a slice (set mode.t instead)",
                    ))
                }
                Null2ffRecipe::Slice { t, .. } => MTImmersion64::slice(chart, &warp, t)?,
                Null2ffRecipe::Umbilic { .. } => {
                    let height = match &cfg.mode.tau {
                        Some(src) => {
                            let e = parse_in(src, &coordinate_names("u", space.n))?;
                            HeightMap::function(move |u: &[f64]| Ok(e.eval(u)))
                        }
                        None => HeightMap::Constant(warp.t0()),
                    };
                    MTImmersion64::new(chart, warp, height)
                }
            };
            Ok((Built::Surface(im), details))
        }
        ModeKind::Curve => {
            let src = cfg.mode.tau.as_deref().expect("validated");
            let tau = parse_in(src, &["s".to_string()])?;
            let length = cfg.mode.length.as_ref().map(|v| v.value()).transpose()?.unwrap_or(DEFAULT_CURVE_LENGTH);
            let step = cfg.mode.step.as_ref().map(|v| v.value()).transpose()?.unwrap_or(DEFAULT_CURVE_STEP);
            let curve = build_null_curve(&warp, space, &tau, length, step)?;
            let details = json!({ "samples": curve.samples.len(), "length": length, "step": curve.step });
            Ok((Built::Curve(curve, warp), details))
        }
        ModeKind::DesitterCheck => Ok((Built::DeSitter, json!({}))),
    }
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut a, b) {
        a.extend(b);
    }
    a
}

/// Report printed by `run` and `verify`: the verification report with the
/// scene kind and mode-specific details.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub kind: ModeKind,
    #[serde(flatten)]
    pub verification: VerificationReport,
    pub details: Value,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verification.passed
    }
}

pub fn verify_built(cfg: &SceneConfig, built: &Built, details: Value) -> Result<RunReport, CliError> {
    let opts = verify_options(cfg);
    let (verification, details) = match built {
        Built::Surface(im) => {
            let mode = match cfg.mode.kind {
                ModeKind::Mt => VerifyMode::Mt,
                ModeKind::Slice => VerifyMode::Slice,
                _ => VerifyMode::Null2ff,
            };
            (im.verify(mode, &opts)?, details)
        }
        Built::Curve(curve, warp) => (verify_null_curve(curve, warp, cfg.tolerances)?, details),
        Built::DeSitter => {
            let n = cfg.spaceform.n;
            let src = cfg.mode.tau.as_deref().expect("validated");
            let e = parse_in(src, &coordinate_names("x", n + 1))?;
            let tau1 = move |x: &[f64]| e.eval(x);
            let r = crosscheck_null2ff(n, tau1, points_per_axis(cfg), &opts)?;
            let mut v = r.verification.clone();
            let tol = cfg.tolerances.metric;
            let defects = [r.hyperboloid_defect, r.isometry_defect, r.immersion_defect, r.reconstruction_defect];
            v.passed = v.passed && defects.iter().all(|d| d.is_finite() && *d <= tol);
            let details = json!({
                "points": r.points,
                "hyperboloid_defect": r.hyperboloid_defect,
                "isometry_defect": r.isometry_defect,
                "immersion_defect": r.immersion_defect,
                "reconstruction_defect": r.reconstruction_defect,
                "c_const": r.c_const,
                "defect_tolerance": tol,
            });
            (v, details)
        }
    };
    Ok(RunReport {
        kind: cfg.mode.kind,
        verification,
        details,
    })
}

pub fn run(cfg: &SceneConfig) -> Result<(Built, RunReport), CliError> {
    let (built, details) = build(cfg)?;
    let report = verify_built(cfg, &built, details)?;
    Ok((built, report))
}

/// Writes the immersion (or curve) as CSV and, for surfaces, an OBJ mesh.
pub fn export(built: &Built, csv: Option<&Path>, mesh: Option<&Path>) -> Result<Value, CliError> {
    let mut out = serde_json::Map::new();
    match built {
        Built::Surface(im) => {
            if let Some(p) = csv {
                let rows = im.write_csv(p)?;
                out.insert("csv".into(), json!({ "path": p, "rows": rows }));
            }
            if let Some(p) = mesh {
                let (v, f) = im.write_mesh(p)?;
                out.insert("mesh".into(), json!({ "path": p, "vertices": v, "faces": f }));
            }
        }
        Built::Curve(curve, warp) => {
            if let Some(p) = csv {
                let rows = write_curve_csv(curve, warp, p)?;
                out.insert("csv".into(), json!({ "path": p, "rows": rows }));
            }
        }
        Built::DeSitter => {
            return Err(CliError::config("the de Sitter check has nothing to export"));
        }
    }
    Ok(Value::Object(out))
}

fn write_curve_csv(curve: &NullCurve<f64>, warp: &WarpProfile64, path: &Path) -> Result<usize, CliError> {
    let amb = curve.space.ambient_dim();
    let mut text = String::from("sigma");
    for i in 1..=amb {
        text.push_str(&format!(",x{i}"));
    }
    text.push_str(",t\n");
    for (i, s) in curve.samples.iter().enumerate() {
        text.push_str(&format!("{:.17e}", s.sigma));
        for v in curve.lift(warp, i)? {
            text.push_str(&format!(",{v:.17e}"));
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    Ok(curve.samples.len())
}

/// Off-grid spot checks at seeded random parameters.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub seed: u64,
    pub probes: usize,
    pub skipped: usize,
    pub max_metric_defect: f64,
    #[serde(rename = "max_Hnull")]
    pub max_hnull: f64,
    #[serde(rename = "max_Hnu")]
    pub max_hnu: f64,
    pub passed: bool,
}

pub fn probe(cfg: &SceneConfig, im: &MTImmersion64, count: usize) -> Result<ProbeReport, CliError> {
    let opts = verify_options(cfg);
    let grid = im.chart().grid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = ProbeReport {
        seed: cfg.seed,
        probes: 0,
        skipped: 0,
        max_metric_defect: 0.0,
        max_hnull: 0.0,
        max_hnu: 0.0,
        passed: true,
    };
    for _ in 0..count {
        // keep the stencil inside the chart
        let u: Vec<f64> = (0..grid.dim())
            .map(|k| {
                let (lo, hi) = grid.bounds(k);
                let pad = (hi - lo) * 0.05;
                rng.random_range(lo + pad..hi - pad)
            })
            .collect();
        match im.point_diagnostics(&u, &opts) {
            Ok(d) => {
                report.probes += 1;
                report.max_metric_defect = report.max_metric_defect.max(d.metric_defect);
                report.max_hnull = report.max_hnull.max(d.hnull);
                report.max_hnu = report.max_hnu.max(d.h_nu.abs());
            }
            Err(_) if im.field().is_some() => report.skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    let t = &cfg.tolerances;
    let hnu_ok = cfg.mode.kind != ModeKind::Mt || report.max_hnu <= t.hnu;
    report.passed =
        report.probes > 0 && report.max_metric_defect <= t.metric && report.max_hnull <= t.hnull && hnu_ok;
    Ok(report)
}

/// Largest difference between a saved immersion CSV and the rebuilt lift.
pub fn replay(im: &MTImmersion64, path: &Path) -> Result<(usize, f64), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let n = im.space().n;
    let mut worst = 0.0f64;
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        if vals.len() != n + im.space().ambient_dim() + 1 {
            return Err(CliError::input(format!(
                "{}: expected {} columns, found {}",
                path.display(),
                n + im.space().ambient_dim() + 1,
                vals.len()
            )));
        }
        let lift = im.lift(&vals[..n])?;
        for (a, b) in lift.iter().zip(&vals[n..]) {
            worst = worst.max((a - b).abs());
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(CliError::input(format!("{}: no rows", path.display())));
    }
    Ok((rows, worst))
}

/// Bracket table at the chart centre.
#[derive(Clone, Debug, Serialize)]
pub struct BracketRow {
    pub index: usize,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    pub admissible: bool,
    pub reason: &'static str,
    pub g_lo: f64,
    pub g_hi: f64,
    /// Branch number of admissible brackets.
    pub branch: Option<usize>,
    pub tau: Option<f64>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BracketTable {
    pub schema: u32,
    pub chart: String,
    pub u: Vec<f64>,
    pub curvatures: Vec<(f64, usize)>,
    pub q: i64,
    pub admissible: usize,
    pub brackets: Vec<BracketRow>,
}

pub fn brackets(cfg: &SceneConfig) -> Result<BracketTable, CliError> {
    if !matches!(cfg.mode.kind, ModeKind::Mt | ModeKind::Slice) {
        return Err(CliError::config("brackets needs a chart scene (mt or slice mode)"));
    }
    let space = space(cfg)?;
    let warp = warp(cfg)?;
    let chart = chart(cfg)?;
    let u = chart.grid().center();
    let clusters = chart.clusters_at(&u)?;
    let eq = MTEquation::new(&warp, space, clusters.clone())?;
    let set = eq.brackets();
    let mut next = 0;
    let rows = set
        .brackets
        .iter()
        .map(|b| {
            let branch = b.is_admissible().then(|| {
                next += 1;
                next - 1
            });
            let (tau, residual, error) = match branch.map(|_| eq.solve_point(b)) {
                Some(Ok(s)) => (Some(s.tau), Some(s.residual), None),
                Some(Err(e)) => (None, None, Some(e.to_string())),
                None => (None, None, None),
            };
            BracketRow {
                index: b.index,
                kappa_lo: b.kappa_lo,
                kappa_hi: b.kappa_hi,
                s_lo: b.s_lo,
                s_hi: b.s_hi,
                admissible: b.is_admissible(),
                reason: b.admissibility.reason(),
                g_lo: b.g_lo,
                g_hi: b.g_hi,
                branch,
                tau,
                residual,
                error,
            }
        })
        .collect();
    Ok(BracketTable {
        schema: trapped::immersion::REPORT_SCHEMA,
        chart: chart.describe(),
        u,
        curvatures: clusters.iter().map(|c| (c.kappa, c.multiplicity)).collect(),
        q: set.q,
        admissible: set.admissible_count(),
        brackets: rows,
    })
}

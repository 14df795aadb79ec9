//! `trapped`: build and verify marginally trapped submanifolds of warped
//! products from a TOML scene file.
//!
//! Exit codes: 0 when every check passed, 2 when a verification failed,
//! 1 on input or configuration errors (reported as JSON on stderr).

mod config;
mod pipeline;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::SceneConfig;
use pipeline::{Built, Overrides};

#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: "config",
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self {
            kind: "input",
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self {
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<trapped::Error> for CliError {
    fn from(e: trapped::Error) -> Self {
        let kind = match e {
            trapped::Error::ChartData(_) => "chart_data",
            trapped::Error::Expr(_) | trapped::Error::UnknownFamily(_) | trapped::Error::InvalidParameter { .. } => {
                "config"
            }
            _ => "geometry",
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "trapped", version, about = "Marginally trapped submanifolds of warped products")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scene file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Admissible root to follow (mt mode).
    #[arg(long)]
    branch: Option<usize>,
    /// Points per chart axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Seed for randomised probes.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON on stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Build the scene, verify it and write the report.
    Run(Common),
    /// Show the root brackets of the height equation at the chart centre.
    Brackets(Common),
    /// Rebuild and verify, with off-grid probes and an optional replay of a saved immersion.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Saved immersion CSV (from `export`) to compare against the rebuild.
        #[arg(long)]
        immersion: Option<PathBuf>,
        /// Number of random off-grid probes.
        #[arg(long, default_value_t = 32)]
        probes: usize,
    },
    /// Write the immersion as CSV and OBJ.
    Export(Common),
}

enum Outcome {
    Passed,
    Failed,
}

fn load(common: &Common) -> Result<SceneConfig, CliError> {
    let mut cfg = SceneConfig::load(&common.config)?;
    Overrides {
        branch: common.branch,
        grid: common.grid,
        seed: common.seed,
    }
    .apply(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common) -> Result<Option<&Path>, CliError> {
    if let Some(d) = &common.out {
        std::fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
    }
    Ok(common.out.as_deref())
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::input(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn emit(common: &Common, v: &impl serde::Serialize, human: impl FnOnce() -> String) {
    let mut stdout = std::io::stdout().lock();
    let text = if common.json {
        serde_json::to_string_pretty(v).expect("report serializes")
    } else {
        human()
    };
    let _ = writeln!(stdout, "{text}");
}

fn summary(r: &pipeline::RunReport) -> String {
    let v = &r.verification;
    let mut s = format!(
        "mode {} ({} points, {} skipped)\n  max metric defect {:.3e}\n  max <H,H>         {:.3e}\n  max |<H,nu>|      {:.3e}\n",
        v.mode.name(),
        v.points_checked,
        v.points_skipped,
        v.max_metric_defect,
        v.max_hnull,
        v.max_hnu
    );
    if let Some(d) = v.max_2ff_defect {
        s += &format!("  max 2ff defect    {d:.3e}\n");
    }
    if let Some(d) = v.slice_defect {
        s += &format!("  slice defect      {d:.3e}\n");
    }
    s += &format!(
        "  spacelike min eig {:.3e} ({} focal crossings)\n{}",
        v.spacelike_min_eig,
        v.focal_crossings,
        if r.passed() { "PASSED" } else { "FAILED" }
    );
    s
}

fn cmd_run(common: &Common) -> Result<Outcome, CliError> {
    let cfg = load(common)?;
    let (built, report) = pipeline::run(&cfg)?;
    let out = out_dir(common)?;
    let report_path = out.map(|d| d.join("report.json")).or_else(|| cfg.outputs.report.clone());
    if let Some(p) = &report_path {
        write_json(p, &report)?;
    }
    if let Some(d) = out {
        let p = d.join("config.toml");
        std::fs::write(&p, cfg.canonical()?).map_err(|e| CliError::io(&p, e))?;
    }
    if !matches!(built, Built::DeSitter) {
        pipeline::export(&built, cfg.outputs.csv.as_deref(), cfg.outputs.mesh.as_deref())?;
    }
    emit(common, &report, || summary(&report));
    Ok(if report.passed() { Outcome::Passed } else { Outcome::Failed })
}

fn cmd_brackets(common: &Common) -> Result<Outcome, CliError> {
    let cfg = load(common)?;
    let table = pipeline::brackets(&cfg)?;
    if let Some(d) = out_dir(common)? {
        write_json(&d.join("brackets.json"), &table)?;
    }
    emit(common, &table, || {
        let mut s = format!(
            "{} at u = {:?}\ncurvatures (kappa, multiplicity): {:?}\nq = {}, admissible = {}\n",
            table.chart, table.u, table.curvatures, table.q, table.admissible
        );
        for b in &table.brackets {
            s += &format!(
                "  [{}] kappa ({:.6}, {:.6})  s ({:.6}, {:.6})  {}",
                b.index, b.kappa_lo, b.kappa_hi, b.s_lo, b.s_hi, b.reason
            );
            if b.admissible {
                s += &format!("  G ({:+.3e}, {:+.3e})", b.g_lo, b.g_hi);
            }
            match (b.branch, b.tau, &b.error) {
                (Some(k), Some(t), _) => s += &format!("  branch {k}: tau = {t:.12}"),
                (Some(k), None, Some(e)) => s += &format!("  branch {k}: {e}"),
                _ => {}
            }
            s.push('\n');
        }
        s.trim_end().to_string()
    });
    Ok(Outcome::Passed)
}

fn cmd_verify(common: &Common, immersion: Option<&Path>, probes: usize) -> Result<Outcome, CliError> {
    let cfg = load(common)?;
    let (built, report) = pipeline::run(&cfg)?;
    let mut passed = report.passed();
    let mut doc = serde_json::to_value(&report).expect("report serializes");
    if let Built::Surface(im) = &built {
        let p = pipeline::probe(&cfg, im, probes)?;
        passed &= p.passed;
        doc["probes"] = serde_json::to_value(&p).expect("probes serialize");
        if let Some(path) = immersion {
            let (rows, worst) = pipeline::replay(im, path)?;
            let ok = worst <= pipeline::REPLAY_TOL;
            passed &= ok;
            doc["replay"] = json!({ "rows": rows, "max_difference": worst, "tolerance": pipeline::REPLAY_TOL, "passed": ok });
        }
    } else if immersion.is_some() {
        return Err(CliError::config("--immersion needs a surface scene"));
    }
    doc["passed"] = json!(passed);
    if let Some(d) = out_dir(common)? {
        write_json(&d.join("verify.json"), &doc)?;
    }
    emit(common, &doc, || {
        let mut s = summary(&report);
        if let Some(p) = doc.get("probes") {
            s += &format!("\nprobes: {p}");
        }
        if let Some(r) = doc.get("replay") {
            s += &format!("\nreplay: {r}");
        }
        s += if passed { "\nverify PASSED" } else { "\nverify FAILED" };
        s
    });
    Ok(if passed { Outcome::Passed } else { Outcome::Failed })
}

fn cmd_export(common: &Common) -> Result<Outcome, CliError> {
    let cfg = load(common)?;
    let (built, _) = pipeline::build(&cfg)?;
    let dir = out_dir(common)?.ok_or_else(|| CliError::config("export needs --out DIR"))?;
    let csv = dir.join("immersion.csv");
    let mesh = matches!(built, Built::Surface(_)).then(|| dir.join("immersion.obj"));
    let written = pipeline::export(&built, Some(&csv), mesh.as_deref())?;
    emit(common, &written, || written.to_string());
    Ok(Outcome::Passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let doc = json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } });
            eprintln!("{doc}");
            return ExitCode::from(1);
        }
    };
    let result = match &cli.verb {
        Verb::Run(c) => cmd_run(c),
        Verb::Brackets(c) => cmd_brackets(c),
        Verb::Verify { common, immersion, probes } => cmd_verify(common, immersion.as_deref(), *probes),
        Verb::Export(c) => cmd_export(c),
    };
    match result {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(2),
        Err(e) => {
            let doc = json!({ "error": { "kind": e.kind, "message": e.message } });
            eprintln!("{doc}");
            ExitCode::from(1)
        }
    }
}

//! Scene configuration: a sectioned TOML file.
//!
//! ```toml
//! [spaceform]
//! c = 1
//! n = 2
//!
//! [warp]
//! w = "1"
//! interval = [-inf, inf]
//! t0 = 0.0
//!
//! [chart]
//! family = "clifford_torus"
//! params = { a = "pi/6" }
//! points_per_axis = 17
//!
//! [mode]
//! kind = "mt"
//! branch = 0
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trapped::expr::Expression;
use trapped::fd::Stencil;
use trapped::Tolerances;

use crate::CliError;

/// A number written either as a literal or as a constant expression
/// such as `"pi/6"` or `"-ln(2)"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Expr(String),
}

impl Number {
    pub fn value(&self) -> Result<f64, CliError> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Expr(s) => Expression::constant(s)
                .map_err(|e| CliError::config(format!("bad constant `{s}`: {e}"))),
        }
    }
}

impl From<f64> for Number {
    fn from(v: f64) -> Self {
        Number::Value(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceformSection {
    pub c: i8,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpSection {
    pub w: String,
    #[serde(default = "whole_line")]
    pub interval: [Number; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<Number>,
}

fn whole_line() -> [Number; 2] {
    [Number::Value(f64::NEG_INFINITY), Number::Value(f64::INFINITY)]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Number>,
    /// Graph function `f(u1, …, un)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expression: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_axis: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Mt,
    Slice,
    Curve,
    Null2ff,
    DesitterCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    pub kind: ModeKind,
    /// Admissible root index (mt).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<usize>,
    /// Slice height (slice; optional for null2ff).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Number>,
    /// Height profile: `τ(s)` for curves, `τ(u1, …, un)` for null2ff,
    /// `τ₁(x1, …, x_{n+1})` for the de Sitter check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Number>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_stencil")]
    pub stencil: Stencil,
}

fn default_step() -> f64 {
    trapped::immersion::VERIFY_STEP
}

fn default_stencil() -> Stencil {
    Stencil::Fourth
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            step: default_step(),
            stencil: default_stencil(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub spaceform: SpaceformSection,
    pub warp: WarpSection,
    #[serde(default)]
    pub chart: ChartSection,
    pub mode: ModeSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub outputs: OutputsSection,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl SceneConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: SceneConfig = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Chart files are relative to the config file.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.chart.csv, &mut self.chart.meta].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn canonical(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::config(m));
        if !matches!(self.spaceform.c, -1..=1) {
            return err(format!("spaceform.c must be -1, 0 or 1, got {}", self.spaceform.c));
        }
        if self.spaceform.n == 0 {
            return err("spaceform.n must be at least 1".into());
        }
        let m = &self.mode;
        if m.branch.is_some() && m.kind != ModeKind::Mt {
            return err("mode.branch is only meaningful in mt mode".into());
        }
        match m.kind {
            ModeKind::Slice if m.t.is_none() => return err("slice mode needs mode.t".into()),
            ModeKind::Curve if m.tau.is_none() => return err("curve mode needs mode.tau".into()),
            ModeKind::Curve if self.spaceform.n != 1 => {
                return err(format!("curve mode needs n = 1, got n = {}", self.spaceform.n))
            }
            ModeKind::DesitterCheck if self.spaceform.c != 0 => {
                return err("the de Sitter check lives in c = 0".into())
            }
            ModeKind::DesitterCheck if m.tau.is_none() => {
                return err("the de Sitter check needs mode.tau (tau_1 on the sphere)".into())
            }
            _ => {}
        }
        let needs_chart = matches!(m.kind, ModeKind::Mt | ModeKind::Slice);
        let c = &self.chart;
        if needs_chart && c.family.is_none() && c.csv.is_none() {
            return err("chart.family or chart.csv is required".into());
        }
        if c.family.is_some() && c.csv.is_some() {
            return err("give chart.family or chart.csv, not both".into());
        }
        for v in [&m.t, &m.length, &m.step].into_iter().flatten() {
            v.value()?;
        }
        for v in c.params.values() {
            v.value()?;
        }
        for v in self.warp.interval.iter().chain(&self.warp.t0) {
            v.value()?;
        }
        if self.verify.step.is_nan() || self.verify.step <= 0.0 {
            return err("verify.step must be positive".into());
        }
        Ok(())
    }
}

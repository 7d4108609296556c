//! Run configuration: one JSON document, validated before any computation.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelFunctions, ModelTable, Offset, Pressure, SINGULAR_MARGIN};
use crate::profile::{ShapeConfig, TimeGrid, DEFAULT_THETA};
use crate::scenario::Scenario;
use crate::spectral::Grid;
use crate::subsolution::ScheduleMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub shapes: ShapesConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check1d: Option<Check1dConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub n_t: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `p = 0`
    #[default]
    Zero,
    /// `p = rho^gamma`
    Power,
    /// `p = (1/rho - 1/rho_bar)^(-gamma)`
    Singular,
    /// Tabulated `p`, `p'` and `h` columns.
    Table,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OffsetConfig {
    #[default]
    Zero,
    Constant {
        value: Vec<f64>,
    },
    Linear {
        coef: Vec<f64>,
    },
    /// `h` columns of the model table.
    Table,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_bar: Option<f64>,
    /// Fraction of `rho_bar` kept free near the singularity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub h: OffsetConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_end: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_end: Option<PathBuf>,
}

/// Where the initial and terminal data come from.
pub enum DataSource<'a> {
    Scenario(Scenario),
    Files {
        rho0: &'a Path,
        u0: &'a Path,
        rho_end: &'a Path,
        u_end: &'a Path,
    },
}

impl DataConfig {
    pub fn source(&self) -> Result<DataSource<'_>> {
        let files = [&self.rho0, &self.u0, &self.rho_end, &self.u_end];
        match (self.scenario, files.iter().filter(|f| f.is_some()).count()) {
            (Some(s), 0) => Ok(DataSource::Scenario(s)),
            (None, 4) => Ok(DataSource::Files {
                rho0: self.rho0.as_deref().expect("counted"),
                u0: self.u0.as_deref().expect("counted"),
                rho_end: self.rho_end.as_deref().expect("counted"),
                u_end: self.u_end.as_deref().expect("counted"),
            }),
            _ => Err(Error::Config(
                "data needs either a scenario or all four files rho0, u0, rho_end, u_end".into(),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", rename = "sT")]
    pub s_t: Option<f64>,
    /// Largest relative loss of the density infimum along the profile.
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

impl Default for ShapesConfig {
    fn default() -> Self {
        Self {
            delta0: None,
            s0: None,
            s_t: None,
            theta: DEFAULT_THETA,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default = "default_mode")]
    pub mode: ScheduleMode,
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Initial level for the admissible schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    /// RK4 steps per node interval for the admissible schedule.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Membership is checked on nodes with `t > tau`; `tau = 0` checks all nodes.
    #[serde(default)]
    pub tau: f64,
}

fn default_mode() -> ScheduleMode {
    ScheduleMode::Minimal
}
fn default_eta() -> f64 {
    1.0
}
fn default_substeps() -> usize {
    64
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            eta: default_eta(),
            lambda0: None,
            substeps: default_substeps(),
            tau: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative mass defect.
    pub mass: f64,
    /// Momentum compatibility and endpoint identity, relative to `1 + max |momentum|`.
    pub momentum: f64,
    /// Strong continuity residual, relative to `1 + max |d_t rho|`.
    pub continuity: f64,
    /// Weak residuals, relative to the residual scale.
    pub weak: f64,
    /// Forward residual of the elliptic solves, relative to `1 + max |rhs|`.
    pub elliptic: f64,
    /// Energy monotonicity, relative to `1 + |E(0)|`.
    pub energy: f64,
    /// Admissible certificate, relative to `1 + BOUND(Lambda(0))`.
    pub certificate: f64,
    /// Stored fields against their regenerated values.
    pub consistency: f64,
    /// Pointwise algebraic identities (trace of the trace-free dyad, solenoidality).
    pub algebraic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mass: 1e-10,
            momentum: 1e-8,
            continuity: 1e-10,
            weak: 1e-9,
            elliptic: 1e-9,
            energy: 1e-10,
            certificate: 1e-10,
            consistency: 1e-12,
            algebraic: 1e-12,
        }
    }
}

impl Tolerances {
    fn named(&self) -> [(&'static str, f64); 9] {
        [
            ("mass", self.mass),
            ("momentum", self.momentum),
            ("continuity", self.continuity),
            ("weak", self.weak),
            ("elliptic", self.elliptic),
            ("energy", self.energy),
            ("certificate", self.certificate),
            ("consistency", self.consistency),
            ("algebraic", self.algebraic),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Sub-intervals per node interval for the weak residuals (4 Gauss points each).
    pub refine: usize,
    /// Spatial test modes `max |m_a| <= k_max`; `None` selects `n/4`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Simpson sub-panels per node interval for the mean drift.
    pub drift_refine: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            refine: 2,
            k_max: None,
            drift_refine: crate::drift::DEFAULT_REFINE,
        }
    }
}

/// Manufactured one-dimensional state for the equivalence check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Check1dConfig {
    pub n: usize,
    /// `mu(rho) = coef rho^alpha`.
    pub coef: f64,
    pub alpha: f64,
    /// Amplitude of `sin(2 pi x)` added to `d_t rho`.
    pub defect: f64,
    /// Largest continuity residual accepted before the comparison.
    pub continuity_tol: f64,
    /// Largest discrepancy for a PASS verdict.
    pub tol: f64,
}

impl Default for Check1dConfig {
    fn default() -> Self {
        Self {
            n: 256,
            coef: 0.5,
            alpha: 1.5,
            defect: 0.0,
            continuity_tol: 1e-8,
            tol: 1e-8,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read, resolve relative paths against the file's directory, validate.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut self.model.table);
        fix(&mut self.data.rho0);
        fix(&mut self.data.u0);
        fix(&mut self.data.rho_end);
        fix(&mut self.data.u_end);
        fix(&mut self.output);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.grid()?;
        self.time_grid()?;
        self.data.source()?;
        if !(0.0..1.0).contains(&self.shapes.theta) || self.shapes.theta == 0.0 {
            return bad(format!("shapes.theta must lie in (0, 1), got {}", self.shapes.theta));
        }
        for (name, v) in [("delta0", self.shapes.delta0), ("s0", self.shapes.s0), ("sT", self.shapes.s_t)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return bad(format!("shapes.{name} must be positive, got {v}"));
                }
            }
        }
        let s = &self.schedule;
        if !(s.eta > 0.0) {
            return bad(format!("schedule.eta must be positive, got {}", s.eta));
        }
        if !(s.tau >= 0.0 && s.tau < self.time.t_final) {
            return bad(format!("schedule.tau must lie in [0, T), got {}", s.tau));
        }
        if s.substeps == 0 {
            return bad("schedule.substeps must be positive".into());
        }
        if s.mode == ScheduleMode::Admissible && !s.lambda0.is_some_and(|l| l > 0.0) {
            return bad("the admissible schedule needs a positive schedule.lambda0".into());
        }
        for (name, v) in self.tolerances.named() {
            if !(v > 0.0) {
                return bad(format!("tolerances.{name} must be positive, got {v}"));
            }
        }
        if self.verify.refine == 0 || self.verify.drift_refine == 0 {
            return bad("verify.refine and verify.drift_refine must be positive".into());
        }
        if let Some(c) = &self.check1d {
            if !(c.n.is_power_of_two() && c.n >= 8) {
                return bad(format!("check1d.n must be a power of two >= 8, got {}", c.n));
            }
            if !(c.coef >= 0.0 && c.continuity_tol > 0.0 && c.tol > 0.0) {
                return bad("check1d needs coef >= 0 and positive tolerances".into());
            }
        }
        self.model()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        if !matches!(self.grid.d, 2 | 3) {
            return Err(Error::Config(format!("grid.d must be 2 or 3, got {}", self.grid.d)));
        }
        Grid::new(self.grid.d, self.grid.n)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.time.t_final, self.time.n_t)
    }

    pub fn shape_config(&self) -> ShapeConfig {
        ShapeConfig {
            delta0: self.shapes.delta0,
            s0: self.shapes.s0,
            s_t: self.shapes.s_t,
            theta: self.shapes.theta,
        }
    }

    pub fn model(&self) -> Result<ModelFunctions> {
        let m = &self.model;
        let d = self.grid.d;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Config(format!("model.{name} is required for this family")));
        let table = match (&m.table, m.family == Family::Table || m.h == OffsetConfig::Table) {
            (Some(p), true) => Some(Arc::new(ModelTable::read_csv(p, d)?)),
            (None, true) => return Err(Error::Config("model.table is required for tabulated functions".into())),
            (_, false) => None,
        };
        let pressure = match m.family {
            Family::Zero => Pressure::Zero,
            Family::Power => Pressure::Power { gamma: need(m.gamma, "gamma")? },
            Family::Singular => Pressure::Singular {
                gamma: need(m.gamma, "gamma")?,
                rho_max: need(m.rho_bar, "rho_bar")?,
                margin: m.margin.unwrap_or(SINGULAR_MARGIN),
            },
            Family::Table => Pressure::Table(table.clone().expect("loaded above")),
        };
        let offset = match &m.h {
            OffsetConfig::Zero => Offset::Zero,
            OffsetConfig::Constant { value } => Offset::Constant(value.clone()),
            OffsetConfig::Linear { coef } => Offset::Linear(coef.clone()),
            OffsetConfig::Table => Offset::Table(table.expect("loaded above")),
        };
        ModelFunctions::new(d, pressure, offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"d": 2, "n": 16},
        "time": {"T": 1.0, "n_t": 9},
        "data": {"scenario": "two-mode-transfer"}
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.schedule.mode, ScheduleMode::Minimal);
        assert_eq!(c.schedule.eta, 1.0);
        assert_eq!(c.tolerances, Tolerances::default());
        assert!(matches!(c.model().unwrap().pressure(), Pressure::Zero));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("\"n_t\": 9", "\"n_t\": 9, \"dt\": 0.1");
        assert!(matches!(RunConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn non_positive_tolerance_is_rejected() {
        let text = MINIMAL.replace("\"data\"", "\"tolerances\": {\"weak\": 0.0}, \"data\"");
        let err = RunConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("tolerances.weak"));
    }

    #[test]
    fn admissible_needs_initial_level() {
        let text = MINIMAL.replace("\"data\"", "\"schedule\": {\"mode\": \"admissible\"}, \"data\"");
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn mixed_data_sources_are_rejected() {
        let text = MINIMAL.replace("\"scenario\": \"two-mode-transfer\"", "\"scenario\": \"two-mode-transfer\", \"rho0\": \"a.fld\"");
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn roundtrip_through_json() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        let back = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, back);
    }
}

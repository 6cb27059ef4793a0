use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Mode;
use crate::hamiltonian::{AffineFamily, CoupledGainLoss, HamiltonianFamily, Region, SheetGrid, C64};
use crate::metrics::DEFAULT_PURITY_GRID;
use crate::optimizer::{ConstraintSet, GaConfig, Scenario};
use crate::path::{build_loop, Direction, LoopSpec, ParameterLoop};
use crate::scheduler::SchedulerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Uniform,
    Stable,
    Optimize,
    Compare,
    Sheets,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Uniform => "uniform",
            Method::Stable => "stable",
            Method::Optimize => "optimize",
            Method::Compare => "compare",
            Method::Sheets => "sheets",
        }
    }
}

/// Complex matrix entries are written as `[re, im]`.
pub type MatrixTable = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    #[default]
    Builtin,
    /// `H(x, y) = h0 + x·hx + y·hy`.
    Affine {
        h0: MatrixTable,
        hx: MatrixTable,
        hy: MatrixTable,
    },
}

fn to_matrix(table: &MatrixTable, field: &str) -> Result<DMatrix<C64>> {
    let n = table.len();
    if n == 0 || table.iter().any(|row| row.len() != n) {
        return Err(Error::config(format!("family.{field}"), "matrix table must be square and non-empty"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| C64::new(table[i][j][0], table[i][j][1])))
}

impl FamilySpec {
    pub fn build(&self) -> Result<Box<dyn HamiltonianFamily>> {
        match self {
            FamilySpec::Builtin => Ok(Box::new(CoupledGainLoss)),
            FamilySpec::Affine { h0, hx, hy } => {
                let family = AffineFamily::new(to_matrix(h0, "h0")?, to_matrix(hx, "hx")?, to_matrix(hy, "hy")?)
                    .map_err(|e| Error::config("family", e.to_string()))?;
                Ok(Box::new(family))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPreset {
    BimodalChiral,
    NonChiral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub direction: Direction,
    pub input: Mode,
    pub target: Mode,
    /// Falls back to the top-level `purity`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Targets {
    Preset(TargetPreset),
    Custom(Vec<TargetSpec>),
}

impl Default for Targets {
    fn default() -> Self {
        Targets::Preset(TargetPreset::BimodalChiral)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub family: FamilySpec,
    #[serde(rename = "loop")]
    pub loop_spec: LoopSpec,
    pub method: Method,
    pub directions: Vec<Direction>,
    pub modes: Vec<Mode>,
    pub p0: f64,
    pub dwell_cap: f64,
    pub purity: f64,
    pub targets: Targets,
    /// Total time for the uniform method.
    pub total_time: f64,
    pub ga: GaConfig,
    pub purity_grid: Vec<f64>,
    pub sheet_grid: SheetGrid,
    /// Search region for `locate-eps`; defaults to the loop's bounding box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: FamilySpec::Builtin,
            loop_spec: LoopSpec::default(),
            method: Method::Stable,
            directions: vec![Direction::Ccw, Direction::Cw],
            modes: vec![Mode::A],
            p0: 0.9,
            dwell_cap: SchedulerConfig::default().dwell_cap,
            purity: 0.9,
            targets: Targets::default(),
            total_time: 10.0,
            ga: GaConfig::default(),
            purity_grid: DEFAULT_PURITY_GRID.to_vec(),
            sheet_grid: SheetGrid::default(),
            region: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub method: Option<Method>,
    pub direction: Option<Direction>,
    pub mode: Option<Mode>,
    pub p0: Option<f64>,
    pub purity: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = o.method {
            self.method = m;
        }
        if let Some(d) = o.direction {
            self.directions = vec![d];
        }
        if let Some(m) = o.mode {
            self.modes = vec![m];
        }
        if let Some(p) = o.p0 {
            self.p0 = p;
        }
        if let Some(p) = o.purity {
            self.purity = p;
        }
        if let Some(s) = o.seed {
            self.ga.seed = s;
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
    }

    pub fn scheduler(&self) -> SchedulerConfig {
        SchedulerConfig {
            p0: self.p0,
            dwell_cap: self.dwell_cap,
            ..SchedulerConfig::default()
        }
    }

    pub fn build_loop(&self) -> Result<ParameterLoop> {
        build_loop(&self.loop_spec).map_err(|e| Error::config("loop", e.to_string()))
    }

    pub fn constraints(&self) -> Result<ConstraintSet> {
        let set = match &self.targets {
            Targets::Preset(TargetPreset::BimodalChiral) => ConstraintSet::bimodal_chiral(self.purity),
            Targets::Preset(TargetPreset::NonChiral) => ConstraintSet::non_chiral(self.purity),
            Targets::Custom(list) => ConstraintSet::new(
                list.iter()
                    .map(|t| Scenario::new(t.direction, t.input, t.target, t.purity.unwrap_or(self.purity)))
                    .collect(),
            ),
        };
        set.map_err(|e| Error::config("targets", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 < 1.0) {
            return Err(Error::config("p0", format!("{} is out of range: P₀ must be less than 1", self.p0)));
        }
        if !(self.dwell_cap > 0.0) || !self.dwell_cap.is_finite() {
            return Err(Error::config("dwell_cap", "dwell_cap must be positive and finite"));
        }
        self.scheduler().validate().map_err(|e| Error::config("p0", e.to_string()))?;
        if !(self.purity > 0.0 && self.purity < 1.0) {
            return Err(Error::config("purity", "purity must lie in (0, 1)"));
        }
        if !(self.total_time > 0.0) || !self.total_time.is_finite() {
            return Err(Error::config("total_time", "total_time must be positive and finite"));
        }
        if self.directions.is_empty() {
            return Err(Error::config("directions", "at least one direction is required"));
        }
        if self.modes.is_empty() {
            return Err(Error::config("modes", "at least one input mode is required"));
        }
        if let Some(i) = self.purity_grid.iter().position(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::config(format!("purity_grid[{i}]"), "purity levels must lie in (0, 1)"));
        }
        self.ga.validate().map_err(|e| Error::config("ga", e.to_string()))?;
        if let Some(r) = &self.region {
            r.validate().map_err(|e| Error::config("region", e.to_string()))?;
        }
        self.family.build()?;
        self.build_loop()?;
        self.constraints()?;
        Ok(())
    }
}

/// Reads `path` (if given), applies `overrides` and validates.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::config(p.display().to_string(), format!("cannot read config: {e}")))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.apply(overrides);
    cfg.validate()?;
    Ok(cfg)
}

//! Browser bindings for the epsteer demo page.
//!
//! Every export has a plain Rust twin returning `Result<_, String>` so the
//! logic can be tested natively.

use epsteer::evolution::{Mode, PathPair};
use epsteer::hamiltonian::{sheet_sample, Axis, CoupledGainLoss, EigenOptions, SheetGrid};
use epsteer::optimizer::{optimize, ConstraintSet, GaConfig, OptimizationProblem};
use epsteer::path::{build_loop, Direction, LoopSpec, ParameterLoop};
use epsteer::scheduler::{stable_schedule_on, uniform_schedule, Schedule, SchedulerConfig};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    match s {
        "ccw" => Ok(Direction::Ccw),
        "cw" => Ok(Direction::Cw),
        _ => Err(format!("unknown direction `{s}`")),
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "A" | "a" => Ok(Mode::A),
        "B" | "b" => Ok(Mode::B),
        _ => Err(format!("unknown mode `{s}`")),
    }
}

/// Flat `[x, y, Re ω₀, Im ω₀, Re ω₁, Im ω₁, …]` per grid node, row-major in y.
pub fn sheet_values(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Vec<f64>, String> {
    let grid = SheetGrid {
        x: Axis::new(x.0, x.1, nx),
        y: Axis::new(y.0, y.1, ny),
    };
    let nodes = sheet_sample(&CoupledGainLoss, &grid, &EigenOptions::default()).map_err(err)?;
    let mut out = Vec::with_capacity(nodes.len() * 6);
    for n in nodes {
        out.extend([n.point.x, n.point.y]);
        for w in n.eigenvalues {
            out.extend([w.re, w.im]);
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn sheet_surface(nx: usize, ny: usize, x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Vec<f64>, JsError> {
    sheet_values(nx, ny, (x_min, x_max), (y_min, y_max)).map_err(|e| JsError::new(&e))
}

/// Circular loop about `(0, 1)` of the given radius, starting at its lowest point.
pub struct Session {
    lp: ParameterLoop,
    paths: PathPair,
}

impl Session {
    pub fn build(radius: f64, n_intervals: usize) -> Result<Self, String> {
        let spec = LoopSpec {
            radii: (radius, radius),
            n_intervals,
            ..LoopSpec::default()
        };
        let lp = build_loop(&spec).map_err(err)?;
        let paths = PathPair::compute(&CoupledGainLoss, &lp, &EigenOptions::default()).map_err(err)?;
        Ok(Self { lp, paths })
    }

    pub fn loop_xy(&self) -> Vec<f64> {
        self.lp.points().iter().flat_map(|p| [p.x, p.y]).collect()
    }

    /// `method` is `uniform` (`value` = total time) or `stable` (`value` = P₀).
    pub fn simulate(&self, method: &str, value: f64, direction: &str, mode: &str) -> Result<Value, String> {
        let direction = parse_direction(direction)?;
        let mode = parse_mode(mode)?;
        let schedule = match method {
            "uniform" => uniform_schedule(self.paths.n_intervals(), value).map_err(err)?,
            "stable" => {
                let cfg = SchedulerConfig::with_p0(value);
                stable_schedule_on(self.paths.get(direction), mode, &cfg).map_err(err)?.schedule
            }
            _ => return Err(format!("unknown method `{method}`")),
        };
        self.trace_json(&schedule, direction, mode)
    }

    fn trace_json(&self, schedule: &Schedule, direction: Direction, mode: Mode) -> Result<Value, String> {
        let trace = self.paths.get(direction).trace(schedule, mode).map_err(err)?;
        let samples: Vec<Value> = trace
            .samples
            .iter()
            .map(|s| {
                json!({
                    "j": s.j,
                    "x": s.point.x,
                    "y": s.point.y,
                    "t": s.t_cum,
                    "dt": s.dt,
                    "p1": s.proportions[0],
                    "omega": [s.omega_bar.re, s.omega_bar.im],
                    "zeta_A": s.zeta_a,
                    "zeta_B": s.zeta_b,
                })
            })
            .collect();
        Ok(json!({
            "method": schedule.method().as_str(),
            "direction": direction.as_str(),
            "mode": mode.to_string(),
            "total_time": schedule.total_time(),
            "dwells": schedule.dwells(),
            "samples": samples,
        }))
    }

    /// `targets` is `bimodal_chiral` or `non_chiral`.
    pub fn optimize(&self, targets: &str, purity: f64, generations: usize, seed: u64) -> Result<Value, String> {
        let constraints = match targets {
            "bimodal_chiral" => ConstraintSet::bimodal_chiral(purity),
            "non_chiral" => ConstraintSet::non_chiral(purity),
            _ => return Err(format!("unknown targets `{targets}`")),
        }
        .map_err(err)?;
        let problem = OptimizationProblem::with_paths(self.paths.clone(), constraints);
        let cfg = GaConfig {
            generations,
            seed,
            ..GaConfig::default()
        };
        let out = optimize(&problem, &cfg).map_err(err)?;
        let mut traces = Vec::new();
        for s in &out.scenarios {
            let mut t = self.trace_json(&out.schedule, s.direction, s.input)?;
            t["label"] = json!(s.label());
            traces.push(t);
        }
        Ok(json!({
            "feasible": out.feasible,
            "total_time": out.total_time(),
            "dwells": out.schedule.dwells(),
            "achieved": out.report.achieved,
            "history": out.report.history,
            "traces": traces,
        }))
    }
}

#[wasm_bindgen]
pub struct Demo {
    inner: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(radius: f64, n_intervals: usize) -> Result<Demo, JsError> {
        Session::build(radius, n_intervals)
            .map(|inner| Demo { inner })
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(js_name = loopPoints)]
    pub fn loop_points(&self) -> Vec<f64> {
        self.inner.loop_xy()
    }

    /// JSON trace of one traversal.
    pub fn simulate(&self, method: &str, value: f64, direction: &str, mode: &str) -> Result<String, JsError> {
        self.inner
            .simulate(method, value, direction, mode)
            .map(|v| v.to_string())
            .map_err(|e| JsError::new(&e))
    }

    /// JSON report with one trace per target scenario.
    pub fn optimize(&self, targets: &str, purity: f64, generations: usize, seed: u32) -> Result<String, JsError> {
        self.inner
            .optimize(targets, purity, generations, u64::from(seed))
            .map(|v| v.to_string())
            .map_err(|e| JsError::new(&e))
    }
}

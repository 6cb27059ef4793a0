//! Chiral index, time-to-purity curves and cross-method comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionTrace, Mode, PathPair};
use crate::optimizer::{optimize, ConstraintSet, GaConfig, OptimizationProblem, Scenario};
use crate::path::Direction;
use crate::scheduler::{stable_schedule_on, uniform_schedule, Schedule, ScheduleMethod, SchedulerConfig};

pub const DEFAULT_PURITY_GRID: [f64; 5] = [0.80, 0.85, 0.90, 0.95, 0.99];

/// `½·max(ζ_A, ζ_B)|ccw + ½·max(ζ_A, ζ_B)|cw` from end values.
pub fn chiral_index_from_ends(ccw: (f64, f64), cw: (f64, f64)) -> f64 {
    0.5 * ccw.0.max(ccw.1) + 0.5 * cw.0.max(cw.1)
}

pub fn chiral_index(trace_ccw: &EvolutionTrace, trace_cw: &EvolutionTrace) -> Result<f64> {
    if trace_ccw.direction != Direction::Ccw || trace_cw.direction != Direction::Cw {
        return Err(Error::invalid("chiral index needs one ccw and one cw trace"));
    }
    if trace_ccw.mode != trace_cw.mode {
        return Err(Error::invalid("chiral index needs traces with the same input mode"));
    }
    for t in [trace_ccw, trace_cw] {
        if t.samples.len() != t.schedule.len() + 1 {
            return Err(Error::invalid(format!("{} trace is incomplete", t.direction)));
        }
    }
    Ok(chiral_index_from_ends(trace_ccw.end_zeta()?, trace_cw.end_zeta()?))
}

fn ser_time<S: Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if t.is_finite() {
        s.serialize_some(t)
    } else {
        s.serialize_none()
    }
}

fn de_time<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// Shortest total time found for a purity level; `+∞` (serialized as `null`)
/// when the level was not reached within the search budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityTime {
    pub purity: f64,
    #[serde(serialize_with = "ser_time", deserialize_with = "de_time")]
    pub time: f64,
}

pub trait MethodRunner {
    fn method(&self) -> ScheduleMethod;
    /// Schedule meeting `purity`, or `None` if none was found.
    fn schedule_for(&self, purity: f64) -> Result<Option<Schedule>>;
}

pub fn time_to_purity(runner: &dyn MethodRunner, levels: &[f64]) -> Result<Vec<PurityTime>> {
    levels
        .iter()
        .map(|&purity| {
            if !(purity > 0.0 && purity < 1.0) {
                return Err(Error::invalid(format!("purity level {purity} must lie in (0, 1)")));
            }
            let time = runner.schedule_for(purity)?.map_or(f64::INFINITY, |s| s.total_time());
            Ok(PurityTime { purity, time })
        })
        .collect()
}

fn end_purity(paths: &PathPair, schedule: &Schedule, scenario: &Scenario) -> Result<f64> {
    let path = paths.get(scenario.direction);
    let (za, zb) = path.end_projection(&schedule.dwells_for(scenario.direction), scenario.input)?;
    Ok(match scenario.target {
        Mode::A => za,
        Mode::B => zb,
    })
}

fn meets(paths: &PathPair, schedule: &Schedule, scenarios: &[Scenario], purity: f64) -> Result<bool> {
    for s in scenarios {
        if end_purity(paths, schedule, s)? < purity {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Uniform schedules: the first total time on a geometric scan at which every
/// scenario reaches the level, refined by bisection against the previous
/// scan point.
#[derive(Debug, Clone)]
pub struct UniformRunner {
    pub paths: PathPair,
    pub scenarios: Vec<Scenario>,
    pub t_min: f64,
    pub t_max: f64,
    pub growth: f64,
    pub tolerance: f64,
}

impl UniformRunner {
    pub fn new(paths: PathPair, scenarios: Vec<Scenario>) -> Self {
        Self {
            paths,
            scenarios,
            t_min: 0.05,
            t_max: 500.0,
            growth: 1.1,
            tolerance: 1e-6,
        }
    }
}

impl MethodRunner for UniformRunner {
    fn method(&self) -> ScheduleMethod {
        ScheduleMethod::Uniform
    }

    fn schedule_for(&self, purity: f64) -> Result<Option<Schedule>> {
        let n = self.paths.n_intervals();
        let ok = |t: f64| -> Result<bool> { meets(&self.paths, &uniform_schedule(n, t)?, &self.scenarios, purity) };
        let mut lo = 0.0;
        let mut t = self.t_min;
        while t <= self.t_max {
            if ok(t)? {
                let mut hi = t;
                while hi - lo > self.tolerance * hi {
                    let mid = 0.5 * (lo + hi);
                    if mid > 0.0 && ok(mid)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(Some(uniform_schedule(n, hi)?));
            }
            lo = t;
            t *= self.growth;
        }
        Ok(None)
    }
}

/// Stable-conversion schedules computed for one scenario: the smallest `P₀`
/// on a scan whose schedule reaches the level, refined by bisection.
#[derive(Debug, Clone)]
pub struct StableRunner {
    pub paths: PathPair,
    pub scenario: Scenario,
    pub p0_min: f64,
    pub p0_max: f64,
    pub p0_step: f64,
}

impl StableRunner {
    pub fn new(paths: PathPair, scenario: Scenario) -> Self {
        Self {
            paths,
            scenario,
            p0_min: 0.5,
            p0_max: 0.999,
            p0_step: 0.005,
        }
    }

    fn attempt(&self, p0: f64, purity: f64) -> Result<Option<Schedule>> {
        let path = self.paths.get(self.scenario.direction);
        let out = stable_schedule_on(path, self.scenario.input, &SchedulerConfig::with_p0(p0))?;
        Ok(meets(&self.paths, &out.schedule, &[self.scenario], purity)?.then_some(out.schedule))
    }
}

impl MethodRunner for StableRunner {
    fn method(&self) -> ScheduleMethod {
        ScheduleMethod::Stable
    }

    fn schedule_for(&self, purity: f64) -> Result<Option<Schedule>> {
        let steps = ((self.p0_max - self.p0_min) / self.p0_step).floor() as usize;
        let mut prev = self.p0_min;
        for i in 0..=steps {
            let p0 = (self.p0_min + i as f64 * self.p0_step).min(self.p0_max);
            if let Some(found) = self.attempt(p0, purity)? {
                if i == 0 {
                    return Ok(Some(found));
                }
                let (mut lo, mut hi, mut best) = (prev, p0, found);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    match self.attempt(mid, purity)? {
                        Some(s) => {
                            hi = mid;
                            if s.total_time() < best.total_time() {
                                best = s;
                            }
                        }
                        None => lo = mid,
                    }
                }
                return Ok(Some(best));
            }
            prev = p0;
        }
        Ok(None)
    }
}

/// Optimized schedules with every scenario's purity set to the level.
#[derive(Debug, Clone)]
pub struct OptimizedRunner {
    pub paths: PathPair,
    pub constraints: ConstraintSet,
    pub config: GaConfig,
}

impl MethodRunner for OptimizedRunner {
    fn method(&self) -> ScheduleMethod {
        ScheduleMethod::Optimized
    }

    fn schedule_for(&self, purity: f64) -> Result<Option<Schedule>> {
        let problem = OptimizationProblem::with_paths(self.paths.clone(), self.constraints.with_purity(purity)?);
        let out = optimize(&problem, &self.config)?;
        Ok(out.feasible.then_some(out.schedule))
    }
}

/// End state of one traversal under one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: ScheduleMethod,
    pub input_mode: Mode,
    pub direction: Direction,
    #[serde(rename = "zeta_A_end")]
    pub zeta_a_end: f64,
    #[serde(rename = "zeta_B_end")]
    pub zeta_b_end: f64,
    pub total_time: f64,
    #[serde(rename = "CI")]
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: ScheduleMethod,
    pub rows: Vec<ComparisonRow>,
    /// Chiral index per input mode.
    pub ci: BTreeMap<Mode, f64>,
    pub time_to_purity: Vec<PurityTime>,
}

impl MethodReport {
    pub fn ci_for(&self, mode: Mode) -> Option<f64> {
        self.ci.get(&mode).copied()
    }
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub methods: Vec<ScheduleMethod>,
    pub modes: Vec<Mode>,
    pub p0: f64,
    pub ga: GaConfig,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            methods: vec![ScheduleMethod::Uniform, ScheduleMethod::Stable, ScheduleMethod::Optimized],
            modes: vec![Mode::A, Mode::B],
            p0: 0.9,
            ga: GaConfig::default(),
        }
    }
}

fn report_for(
    method: ScheduleMethod,
    paths: &PathPair,
    modes: &[Mode],
    schedule_for_mode: impl Fn(Mode) -> Result<Schedule>,
) -> Result<MethodReport> {
    let mut rows = Vec::new();
    let mut ci = BTreeMap::new();
    for &mode in modes {
        let schedule = schedule_for_mode(mode)?;
        let ccw = paths.ccw.end_projection(&schedule.dwells_for(Direction::Ccw), mode)?;
        let cw = paths.cw.end_projection(&schedule.dwells_for(Direction::Cw), mode)?;
        let index = chiral_index_from_ends(ccw, cw);
        ci.insert(mode, index);
        for (direction, (za, zb)) in [(Direction::Ccw, ccw), (Direction::Cw, cw)] {
            rows.push(ComparisonRow {
                method,
                input_mode: mode,
                direction,
                zeta_a_end: za,
                zeta_b_end: zb,
                total_time: schedule.total_time(),
                ci: index,
            });
        }
    }
    Ok(MethodReport {
        method,
        rows,
        ci,
        time_to_purity: Vec::new(),
    })
}

/// One report per method. Each method contributes a single schedule that is
/// replayed for every input mode and direction: the optimized one solves
/// `problem`, the stable one is computed counter-clockwise for the first
/// requested mode, and the uniform one gets the optimized total time (or the
/// stable one when no optimized run was requested).
pub fn compare_methods(problem: &OptimizationProblem, opts: &CompareOptions) -> Result<Vec<MethodReport>> {
    if opts.modes.is_empty() {
        return Err(Error::invalid("compare needs at least one input mode"));
    }
    let paths = problem.paths();
    let cfg = SchedulerConfig::with_p0(opts.p0);
    cfg.validate()?;
    let optimized = if opts.methods.contains(&ScheduleMethod::Optimized) {
        Some(optimize(problem, &opts.ga)?)
    } else {
        None
    };
    let stable = stable_schedule_on(&paths.ccw, opts.modes[0], &cfg)?.schedule;
    let budget = match &optimized {
        Some(o) => o.total_time(),
        None => stable.total_time(),
    };
    let mut reports = Vec::new();
    for &method in &opts.methods {
        let report = match method {
            ScheduleMethod::Uniform => report_for(method, paths, &opts.modes, |_| uniform_schedule(paths.n_intervals(), budget))?,
            ScheduleMethod::Stable => report_for(method, paths, &opts.modes, |_| Ok(stable.clone()))?,
            ScheduleMethod::Optimized => {
                let s = optimized.as_ref().expect("computed above").schedule.clone();
                report_for(method, paths, &opts.modes, |_| Ok(s.clone()))?
            }
        };
        reports.push(report);
    }
    Ok(reports)
}

pub const COMPARISON_HEADER: [&str; 7] =
    ["method", "input_mode", "direction", "zeta_A_end", "zeta_B_end", "total_time", "CI"];

pub fn write_comparison_csv<W: std::io::Write>(reports: &[MethodReport], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COMPARISON_HEADER)?;
    for r in reports {
        for row in &r.rows {
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

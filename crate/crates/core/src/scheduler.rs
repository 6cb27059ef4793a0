//! Dwell-time schedules.
//!
//! A [`Schedule`] stores one dwell per loop interval in counter-clockwise
//! order; clockwise traversals consume it reversed. The stable-conversion
//! schedule dwells at each point exactly long enough for the dominant
//! proportion `P_1` to recover to `P₀`, and jumps over points where `P_1` is
//! already at or above it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SchedulerFailure};
use crate::evolution::{step_normalized, EigenPath, EvolutionState, EvolutionTrace, Mode};
use crate::hamiltonian::{EigenOptions, Eigensystem, HamiltonianFamily};
use crate::path::{Direction, OrientedLoop};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMethod {
    Uniform,
    Stable,
    Optimized,
}

impl ScheduleMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleMethod::Uniform => "uniform",
            ScheduleMethod::Stable => "stable",
            ScheduleMethod::Optimized => "optimized",
        }
    }
}

impl std::fmt::Display for ScheduleMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr")]
pub struct Schedule {
    method: ScheduleMethod,
    dwells: Vec<f64>,
    total_time: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleRepr {
    method: ScheduleMethod,
    dwells: Vec<f64>,
    #[allow(dead_code)]
    total_time: Option<f64>,
}

impl TryFrom<ScheduleRepr> for Schedule {
    type Error = Error;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        Schedule::new(r.method, r.dwells)
    }
}

impl Schedule {
    /// Dwells are given in counter-clockwise interval order.
    pub fn new(method: ScheduleMethod, dwells: Vec<f64>) -> Result<Self> {
        if let Some((j, d)) = dwells.iter().enumerate().find(|(_, d)| !d.is_finite() || **d < 0.0) {
            return Err(Error::invalid(format!("dwell {j} is {d}; dwells must be finite and >= 0")));
        }
        let total_time = dwells.iter().sum();
        Ok(Self {
            method,
            dwells,
            total_time,
        })
    }

    pub fn method(&self) -> ScheduleMethod {
        self.method
    }

    pub fn dwells(&self) -> &[f64] {
        &self.dwells
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn len(&self) -> usize {
        self.dwells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dwells.is_empty()
    }

    /// Dwells in the order a traversal in `direction` consumes them.
    pub fn dwells_for(&self, direction: Direction) -> Vec<f64> {
        match direction {
            Direction::Ccw => self.dwells.clone(),
            Direction::Cw => self.dwells.iter().rev().copied().collect(),
        }
    }

    /// Number of intervals with a positive dwell.
    pub fn support(&self) -> usize {
        self.dwells.iter().filter(|d| **d > 0.0).count()
    }
}

pub fn uniform_schedule(n_intervals: usize, total_time: f64) -> Result<Schedule> {
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(Error::invalid("total time must be positive and finite"));
    }
    if n_intervals == 0 {
        return Err(Error::invalid("schedule needs at least one interval"));
    }
    Schedule::new(ScheduleMethod::Uniform, vec![total_time / n_intervals as f64; n_intervals])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerConfig {
    /// Dominant state proportion `P₀`.
    pub p0: f64,
    /// Longest dwell emitted at a single point.
    pub dwell_cap: f64,
    /// Tolerance on `P_1` for the iterative solver.
    pub tolerance: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            p0: 0.9,
            dwell_cap: 50.0,
            tolerance: 1e-9,
        }
    }
}

impl SchedulerConfig {
    pub fn with_p0(p0: f64) -> Self {
        Self {
            p0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::invalid(format!(
                "p0 = {} is out of range: P0 must be greater than 0 and less than 1",
                self.p0
            )));
        }
        if !(self.dwell_cap > 0.0) || !self.dwell_cap.is_finite() {
            return Err(Error::invalid("dwell_cap must be positive and finite"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::invalid("tolerance must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Shortest dwell at `next` that brings `P_1` to `cfg.p0`, or 0 when the jump
/// alone already reaches it. Capped at `cfg.dwell_cap`.
pub fn dwell_for_target(state: &EvolutionState, next: &Eigensystem, cfg: &SchedulerConfig) -> Result<f64> {
    cfg.validate()?;
    let a = next.project(&state.psi);
    let weights: Vec<f64> = a.iter().map(|c| c.norm_sqr()).collect();
    let growth: Vec<f64> = next.eigenvalues().iter().map(|w| w.im).collect();
    solve_dwell(&weights, &growth, cfg).map_err(|failure| Error::Scheduler {
        index: state.step_index + 1,
        failure,
    })
}

/// Dwell solver on raw data: `weights[n] = |⟨θ_n|Ψ⟩|²`, `growth[n] = Im ω_n`
/// (sorted, dominant first).
pub fn solve_dwell(weights: &[f64], growth: &[f64], cfg: &SchedulerConfig) -> std::result::Result<f64, SchedulerFailure> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights[0] == 0.0 {
        return Err(SchedulerFailure::DominantUnreachable);
    }
    if weights[0] / total >= cfg.p0 {
        return Ok(0.0);
    }
    let rest = growth[1..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = growth.iter().map(|g| g.abs()).fold(1.0_f64, f64::max);
    let gap = growth[0] - rest;
    if gap <= 1e-12 * scale {
        return Err(SchedulerFailure::DegenerateGap);
    }
    if weights.len() == 2 {
        let p0 = cfg.p0;
        let dt = ((p0 / (1.0 - p0)).ln() - (weights[0] / weights[1]).ln()) / (2.0 * gap);
        Ok(dt.clamp(0.0, cfg.dwell_cap))
    } else {
        Ok(dwell_by_bisection(weights, growth, cfg))
    }
}

/// `P_1` after dwelling `dt`, evaluated in log space.
pub fn dominant_proportion_after(weights: &[f64], growth: &[f64], dt: f64) -> f64 {
    let l0 = weights[0].ln() + 2.0 * growth[0] * dt;
    let others: f64 = weights[1..]
        .iter()
        .zip(&growth[1..])
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, g)| (w.ln() + 2.0 * g * dt - l0).exp())
        .sum();
    1.0 / (1.0 + others)
}

/// Bisection on `P_1(dt) = p0` over `[0, dwell_cap]`. `P_1` is non-decreasing
/// in `dt` whenever the dominant growth rate is the unique maximum.
pub fn dwell_by_bisection(weights: &[f64], growth: &[f64], cfg: &SchedulerConfig) -> f64 {
    let f = |dt: f64| dominant_proportion_after(weights, growth, dt) - cfg.p0;
    if f(0.0) >= 0.0 {
        return 0.0;
    }
    if f(cfg.dwell_cap) < 0.0 {
        return cfg.dwell_cap;
    }
    let (mut lo, mut hi) = (0.0_f64, cfg.dwell_cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if (v.abs() <= cfg.tolerance * 1e-6 && v >= 0.0) || hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    hi
}

#[derive(Debug, Clone)]
pub struct StableOutcome {
    pub schedule: Schedule,
    /// Trace of the traversal the schedule was computed on.
    pub trace: EvolutionTrace,
    /// Traversal indices whose dwell hit the cap.
    pub capped: Vec<usize>,
    /// Traversal indices where the dominant growth rate is degenerate; the
    /// state passes through with zero dwell.
    pub passthrough: Vec<usize>,
}

impl StableOutcome {
    /// First traversal index at which a positive dwell was spent.
    pub fn engaged_from(&self) -> Option<usize> {
        self.trace.samples.iter().position(|s| s.dt > 0.0)
    }

    /// Engaged traversal indices where `P_1` is neither pinned to `p0` within
    /// `tol` nor skipped with `P_1 ≥ p0`. Capped and pass-through points are
    /// exempt.
    pub fn pinning_violations(&self, p0: f64, tol: f64) -> Vec<usize> {
        let Some(start) = self.engaged_from() else {
            return Vec::new();
        };
        self.trace.samples[start..]
            .iter()
            .filter(|s| !self.capped.contains(&s.j) && !self.passthrough.contains(&s.j))
            .filter(|s| {
                let p1 = s.proportions[0];
                let pinned = (p1 - p0).abs() <= tol;
                let skipped = s.dt == 0.0 && p1 >= p0 - tol;
                !(pinned || skipped)
            })
            .map(|s| s.j)
            .collect()
    }
}

/// Stable-conversion schedule computed on `path` for input `mode`.
pub fn stable_schedule_on(path: &EigenPath, mode: Mode, cfg: &SchedulerConfig) -> Result<StableOutcome> {
    cfg.validate()?;
    let mut state = path.initial_state(mode)?;
    let mut dwells = Vec::with_capacity(path.n_intervals());
    let mut capped = Vec::new();
    let mut passthrough = Vec::new();
    for j in 0..path.n_intervals() {
        let next: &Arc<Eigensystem> = &path.eigensystems()[j + 1];
        let dt = match dwell_for_target(&state, next, cfg) {
            Ok(dt) => dt,
            Err(Error::Scheduler {
                failure: SchedulerFailure::DegenerateGap,
                index,
            }) => {
                passthrough.push(index);
                0.0
            }
            Err(e) => return Err(e),
        };
        if dt >= cfg.dwell_cap {
            capped.push(j + 1);
        }
        state = step_normalized(&state, next, dt)?.0;
        dwells.push(dt);
    }
    if path.direction() == Direction::Cw {
        dwells.reverse();
    }
    let schedule = Schedule::new(ScheduleMethod::Stable, dwells)?;
    let trace = path.trace(&schedule, mode)?;
    Ok(StableOutcome {
        schedule,
        trace,
        capped,
        passthrough,
    })
}

pub fn stable_schedule(
    family: &dyn HamiltonianFamily,
    oriented: &OrientedLoop,
    mode: Mode,
    cfg: &SchedulerConfig,
    opts: &EigenOptions,
) -> Result<StableOutcome> {
    let path = EigenPath::compute(family, oriented, opts)?;
    stable_schedule_on(&path, mode, cfg)
}

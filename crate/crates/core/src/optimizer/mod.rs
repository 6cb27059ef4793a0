//! Minimum-time schedule synthesis under end-purity constraints.
//!
//! One dwell vector is shared by every scenario: counter-clockwise scenarios
//! read it forward, clockwise scenarios read it reversed. A genetic search
//! picks the support, then an SQP pass tunes the dwells on that support.

mod ga;
mod sqp;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use ga::{ga_search, GaConfig, GaResult};
pub use sqp::{sqp_refine, SqpOptions, SqpResult};

use crate::error::{Error, Result};
use crate::evolution::{Mode, PathPair};
use crate::hamiltonian::{EigenOptions, HamiltonianFamily};
use crate::path::{Direction, ParameterLoop};
use crate::scheduler::{Schedule, ScheduleMethod};

pub const DEFAULT_PENALTY_WEIGHT: f64 = 1e4;

/// One conversion requirement: start in `input`, traverse in `direction`, end
/// with at least `purity` of `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub direction: Direction,
    pub input: Mode,
    pub target: Mode,
    pub purity: f64,
}

impl Scenario {
    pub fn new(direction: Direction, input: Mode, target: Mode, purity: f64) -> Self {
        Self {
            direction,
            input,
            target,
            purity,
        }
    }

    pub fn label(&self) -> String {
        format!("{}_{}_to_{}", self.direction, self.input, self.target)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{} {} (π = {})", self.input, self.target, self.direction, self.purity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintSet {
    scenarios: Vec<Scenario>,
}

impl ConstraintSet {
    /// Requires one scenario for every (direction, input) pair drawn from the
    /// directions and inputs that appear at all.
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::invalid("constraint set needs at least one scenario"));
        }
        for s in &scenarios {
            if !(s.purity > 0.0 && s.purity < 1.0) {
                return Err(Error::invalid(format!("purity for {} must lie in (0, 1)", s.label())));
            }
        }
        let mut directions: Vec<Direction> = scenarios.iter().map(|s| s.direction).collect();
        directions.sort_by_key(|d| d.as_str());
        directions.dedup();
        let mut inputs: Vec<Mode> = scenarios.iter().map(|s| s.input).collect();
        inputs.sort_by_key(|m| m.index());
        inputs.dedup();
        for d in &directions {
            for m in &inputs {
                let n = scenarios.iter().filter(|s| s.direction == *d && s.input == *m).count();
                if n != 1 {
                    return Err(Error::invalid(format!(
                        "direction {d} with input {m} has {n} targets; exactly one is required"
                    )));
                }
            }
        }
        Ok(Self { scenarios })
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    /// A→B counter-clockwise, A→A clockwise, B→B counter-clockwise, B→A
    /// clockwise: the end mode depends on direction only.
    pub fn bimodal_chiral(purity: f64) -> Result<Self> {
        Self::new(vec![
            Scenario::new(Direction::Ccw, Mode::A, Mode::B, purity),
            Scenario::new(Direction::Cw, Mode::A, Mode::A, purity),
            Scenario::new(Direction::Ccw, Mode::B, Mode::B, purity),
            Scenario::new(Direction::Cw, Mode::B, Mode::A, purity),
        ])
    }

    /// A→B in both directions.
    pub fn non_chiral(purity: f64) -> Result<Self> {
        Self::new(vec![
            Scenario::new(Direction::Ccw, Mode::A, Mode::B, purity),
            Scenario::new(Direction::Cw, Mode::A, Mode::B, purity),
        ])
    }

    pub fn with_purity(&self, purity: f64) -> Result<Self> {
        Self::new(self.scenarios.iter().map(|s| Scenario { purity, ..*s }).collect())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationProblem {
    paths: PathPair,
    constraints: ConstraintSet,
}

impl OptimizationProblem {
    pub fn new(
        family: &dyn HamiltonianFamily,
        lp: &ParameterLoop,
        constraints: ConstraintSet,
        opts: &EigenOptions,
    ) -> Result<Self> {
        Ok(Self::with_paths(PathPair::compute(family, lp, opts)?, constraints))
    }

    pub fn with_paths(paths: PathPair, constraints: ConstraintSet) -> Self {
        Self { paths, constraints }
    }

    pub fn paths(&self) -> &PathPair {
        &self.paths
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn dimension(&self) -> usize {
        self.paths.n_intervals()
    }

    fn check_dwells(&self, dwells: &[f64]) -> Result<()> {
        if dwells.len() != self.dimension() {
            return Err(Error::invalid(format!(
                "dwell vector has length {}, problem has {} intervals",
                dwells.len(),
                self.dimension()
            )));
        }
        if dwells.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("dwells must be finite and non-negative"));
        }
        Ok(())
    }

    /// End purity `ζ_target` of every scenario for a counter-clockwise-ordered
    /// dwell vector.
    pub fn purities(&self, dwells: &[f64]) -> Result<Vec<f64>> {
        self.check_dwells(dwells)?;
        let reversed: Vec<f64> = dwells.iter().rev().copied().collect();
        self.constraints
            .scenarios
            .iter()
            .map(|s| {
                let order = match s.direction {
                    Direction::Ccw => dwells,
                    Direction::Cw => &reversed[..],
                };
                let (za, zb) = self.paths.get(s.direction).end_projection(order, s.input)?;
                Ok(match s.target {
                    Mode::A => za,
                    Mode::B => zb,
                })
            })
            .collect()
    }

    /// Sum of squared purity shortfalls.
    pub fn shortfall(&self, purities: &[f64]) -> f64 {
        self.constraints
            .scenarios
            .iter()
            .zip(purities)
            .map(|(s, z)| (s.purity - z).max(0.0).powi(2))
            .sum()
    }

    pub fn is_feasible(&self, purities: &[f64]) -> bool {
        self.constraints.scenarios.iter().zip(purities).all(|(s, z)| *z >= s.purity)
    }
}

/// Total time plus weighted squared purity shortfall; `+∞` when a trace fails.
pub fn fitness(dwells: &[f64], problem: &OptimizationProblem, penalty_weight: f64) -> f64 {
    match problem.purities(dwells) {
        Ok(z) => dwells.iter().sum::<f64>() + penalty_weight * problem.shortfall(&z),
        Err(_) => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub feasible: bool,
    pub achieved: BTreeMap<String, f64>,
    pub total_time: f64,
    /// Best GA objective per generation, starting with the initial population.
    pub history: Vec<f64>,
    pub seed: u64,
    pub generations: usize,
    pub refinement_iterations: usize,
    pub refinement_warning: bool,
}

#[derive(Debug, Clone)]
pub struct OptimizedSchedule {
    pub schedule: Schedule,
    pub scenarios: Vec<Scenario>,
    /// `ζ_target` at the end of each scenario, in scenario order.
    pub achieved: Vec<f64>,
    pub feasible: bool,
    pub report: OptimizationReport,
}

impl OptimizedSchedule {
    pub fn total_time(&self) -> f64 {
        self.schedule.total_time()
    }
}

pub fn optimize(problem: &OptimizationProblem, config: &GaConfig) -> Result<OptimizedSchedule> {
    optimize_with(problem, config, &SqpOptions::default())
}

pub fn optimize_with(problem: &OptimizationProblem, config: &GaConfig, sqp: &SqpOptions) -> Result<OptimizedSchedule> {
    config.validate()?;
    let ga = ga_search(problem, config)?;
    let refined = sqp_refine(problem, &ga.best, config.penalty_weight, sqp);
    let schedule = Schedule::new(ScheduleMethod::Optimized, refined.dwells)?;
    let achieved = problem.purities(schedule.dwells())?;
    let feasible = problem.is_feasible(&achieved);
    let scenarios = problem.constraints().scenarios().to_vec();
    let report = OptimizationReport {
        feasible,
        achieved: scenarios.iter().map(|s| s.label()).zip(achieved.iter().copied()).collect(),
        total_time: schedule.total_time(),
        history: ga.history,
        seed: config.seed,
        generations: ga.generations,
        refinement_iterations: refined.iterations,
        refinement_warning: refined.warning,
    };
    Ok(OptimizedSchedule {
        schedule,
        scenarios,
        achieved,
        feasible,
        report,
    })
}

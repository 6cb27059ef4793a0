use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::config::{Method, RunConfig};
use super::output::{loop_csv, schedule_csv, sheets_csv, trace_csv, Artifacts, PLOT_SCRIPT};
use crate::error::Result;
use crate::evolution::{EvolutionTrace, Mode, PathPair};
use crate::hamiltonian::{locate_eps, sheet_sample, EigenOptions, ParameterPoint, Region};
use crate::metrics::{
    chiral_index, compare_methods, time_to_purity, write_comparison_csv, CompareOptions, MethodRunner, OptimizedRunner,
    StableRunner, UniformRunner,
};
use crate::optimizer::{optimize, OptimizationProblem};
use crate::path::Direction;
use crate::scheduler::{stable_schedule_on, uniform_schedule, Schedule};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Artifacts,
    pub summary: String,
    pub exit_code: i32,
}

#[derive(Debug, Serialize)]
struct EndState {
    #[serde(rename = "zeta_A")]
    zeta_a: f64,
    #[serde(rename = "zeta_B")]
    zeta_b: f64,
}

#[derive(Debug, Serialize)]
struct TraceReport {
    method: String,
    total_time: f64,
    ends: BTreeMap<String, EndState>,
    #[serde(rename = "CI")]
    ci: BTreeMap<Mode, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stable: Option<StableDetails>,
}

#[derive(Debug, Serialize)]
struct StableDetails {
    p0: f64,
    direction: Direction,
    mode: Mode,
    engaged_from: Option<usize>,
    capped: Vec<usize>,
    passthrough: Vec<usize>,
}

/// Traces `schedule` for every (direction, mode) pair and adds them to
/// `artifacts`; returns end states and CI per mode where both directions ran.
fn add_traces(
    artifacts: &mut Artifacts,
    paths: &PathPair,
    schedule: &Schedule,
    pairs: &[(Direction, Mode)],
) -> Result<(BTreeMap<String, EndState>, BTreeMap<Mode, f64>)> {
    let mut traces: Vec<EvolutionTrace> = Vec::new();
    let mut ends = BTreeMap::new();
    for &(d, m) in pairs {
        let trace = paths.get(d).trace(schedule, m)?;
        artifacts.add(format!("trace_{d}_{m}.csv"), trace_csv(&trace)?);
        let (za, zb) = trace.end_zeta()?;
        ends.insert(format!("{d}_{m}"), EndState { zeta_a: za, zeta_b: zb });
        traces.push(trace);
    }
    let mut ci = BTreeMap::new();
    for ccw in traces.iter().filter(|t| t.direction == Direction::Ccw) {
        if let Some(cw) = traces.iter().find(|t| t.direction == Direction::Cw && t.mode == ccw.mode) {
            ci.insert(ccw.mode, chiral_index(ccw, cw)?);
        }
    }
    Ok((ends, ci))
}

fn summarize(method: &str, total_time: f64, ends: &BTreeMap<String, EndState>, ci: &BTreeMap<Mode, f64>) -> String {
    let mut s = format!("{method}: total_time={total_time:.6}");
    for (k, e) in ends {
        let _ = write!(s, " {k}=(zeta_A {:.4}, zeta_B {:.4})", e.zeta_a, e.zeta_b);
    }
    for (m, c) in ci {
        let _ = write!(s, " CI[{m}]={c:.4}");
    }
    s
}

fn grid_pairs(cfg: &RunConfig) -> Vec<(Direction, Mode)> {
    let mut pairs = Vec::new();
    for &d in &cfg.directions {
        for &m in &cfg.modes {
            if !pairs.contains(&(d, m)) {
                pairs.push((d, m));
            }
        }
    }
    pairs
}

/// Runs the configured method and collects its artifacts without touching
/// the file system.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let family = cfg.family.build()?;
    let opts = EigenOptions::default();
    let mut artifacts = Artifacts::default();
    artifacts.add_json("effective_config.json", cfg)?;
    artifacts.add("plot.py", PLOT_SCRIPT.as_bytes().to_vec());

    if cfg.method == Method::Sheets {
        let nodes = sheet_sample(family.as_ref(), &cfg.sheet_grid, &opts)?;
        artifacts.add("sheets.csv", sheets_csv(&nodes)?);
        let region = Region::new(cfg.sheet_grid.x.min, cfg.sheet_grid.x.max, cfg.sheet_grid.y.min, cfg.sheet_grid.y.max);
        let eps = locate_eps(family.as_ref(), &region)?;
        artifacts.add_json("eps.json", &eps)?;
        if let Ok(lp) = cfg.build_loop() {
            artifacts.add("loop.csv", loop_csv(&lp)?);
        }
        let summary = format!("sheets: {} nodes, {} exceptional point(s) in grid", nodes.len(), eps.len());
        return Ok(Outcome {
            artifacts,
            summary,
            exit_code: EXIT_OK,
        });
    }

    let lp = cfg.build_loop()?;
    artifacts.add("loop.csv", loop_csv(&lp)?);
    let paths = PathPair::compute(family.as_ref(), &lp, &opts)?;
    let n = lp.n_intervals();

    match cfg.method {
        Method::Uniform => {
            let schedule = uniform_schedule(n, cfg.total_time)?;
            let (ends, ci) = add_traces(&mut artifacts, &paths, &schedule, &grid_pairs(cfg))?;
            finish_schedule(&mut artifacts, &schedule)?;
            let summary = summarize("uniform", schedule.total_time(), &ends, &ci);
            artifacts.add_json(
                "report.json",
                &TraceReport {
                    method: "uniform".into(),
                    total_time: schedule.total_time(),
                    ends,
                    ci,
                    stable: None,
                },
            )?;
            Ok(Outcome {
                artifacts,
                summary,
                exit_code: EXIT_OK,
            })
        }
        Method::Stable => {
            let (d, m) = (cfg.directions[0], cfg.modes[0]);
            let out = stable_schedule_on(paths.get(d), m, &cfg.scheduler())?;
            let schedule = out.schedule.clone();
            let (ends, ci) = add_traces(&mut artifacts, &paths, &schedule, &grid_pairs(cfg))?;
            finish_schedule(&mut artifacts, &schedule)?;
            let summary = summarize("stable", schedule.total_time(), &ends, &ci);
            artifacts.add_json(
                "report.json",
                &TraceReport {
                    method: "stable".into(),
                    total_time: schedule.total_time(),
                    ends,
                    ci,
                    stable: Some(StableDetails {
                        p0: cfg.p0,
                        direction: d,
                        mode: m,
                        engaged_from: out.engaged_from(),
                        capped: out.capped,
                        passthrough: out.passthrough,
                    }),
                },
            )?;
            Ok(Outcome {
                artifacts,
                summary,
                exit_code: EXIT_OK,
            })
        }
        Method::Optimize => {
            let problem = OptimizationProblem::with_paths(paths.clone(), cfg.constraints()?);
            let out = optimize(&problem, &cfg.ga)?;
            let pairs: Vec<(Direction, Mode)> = out.scenarios.iter().map(|s| (s.direction, s.input)).collect();
            let (ends, ci) = add_traces(&mut artifacts, &paths, &out.schedule, &pairs)?;
            finish_schedule(&mut artifacts, &out.schedule)?;
            artifacts.add_json("report.json", &out.report)?;
            let mut summary = summarize("optimize", out.total_time(), &ends, &ci);
            let _ = write!(summary, " feasible={}", out.feasible);
            Ok(Outcome {
                artifacts,
                summary,
                exit_code: if out.feasible { EXIT_OK } else { EXIT_INFEASIBLE },
            })
        }
        Method::Compare => {
            let constraints = cfg.constraints()?;
            let problem = OptimizationProblem::with_paths(paths.clone(), constraints.clone());
            let mut reports = compare_methods(
                &problem,
                &CompareOptions {
                    modes: cfg.modes.clone(),
                    p0: cfg.p0,
                    ga: cfg.ga.clone(),
                    ..CompareOptions::default()
                },
            )?;
            let scenarios = constraints.scenarios().to_vec();
            let runners: Vec<Box<dyn MethodRunner>> = vec![
                Box::new(UniformRunner::new(paths.clone(), scenarios.clone())),
                Box::new(StableRunner::new(paths.clone(), scenarios[0])),
                Box::new(OptimizedRunner {
                    paths: paths.clone(),
                    constraints,
                    config: cfg.ga.clone(),
                }),
            ];
            for report in &mut reports {
                if let Some(r) = runners.iter().find(|r| r.method() == report.method) {
                    report.time_to_purity = time_to_purity(r.as_ref(), &cfg.purity_grid)?;
                }
            }
            let mut csv = Vec::new();
            write_comparison_csv(&reports, &mut csv)?;
            artifacts.add("comparison.csv", csv);
            artifacts.add_json("report.json", &reports)?;
            let mut summary = String::from("compare:");
            for r in &reports {
                let t = r.rows.first().map_or(0.0, |row| row.total_time);
                let _ = write!(summary, " {}(total_time={t:.4}", r.method);
                for (m, c) in &r.ci {
                    let _ = write!(summary, " CI[{m}]={c:.4}");
                }
                summary.push(')');
            }
            Ok(Outcome {
                artifacts,
                summary,
                exit_code: EXIT_OK,
            })
        }
        Method::Sheets => unreachable!("handled above"),
    }
}

fn finish_schedule(artifacts: &mut Artifacts, schedule: &Schedule) -> Result<()> {
    artifacts.add_json("schedule.json", schedule)?;
    artifacts.add("schedule.csv", schedule_csv(schedule)?);
    Ok(())
}

/// EPs in the configured region, or around the loop when none is set.
pub fn execute_locate(cfg: &RunConfig) -> Result<(Vec<ParameterPoint>, Artifacts)> {
    cfg.validate()?;
    let family = cfg.family.build()?;
    let region = match cfg.region {
        Some(r) => r,
        None => Region::bounding(cfg.build_loop()?.points(), 0.5)?,
    };
    let eps = locate_eps(family.as_ref(), &region)?;
    let mut artifacts = Artifacts::default();
    artifacts.add_json("effective_config.json", cfg)?;
    artifacts.add_json("eps.json", &eps)?;
    Ok((eps, artifacts))
}

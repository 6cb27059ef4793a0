#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{builtin_matrix, dense_propagate, max_abs, near_builtin_ep, quadratic_eigenvalues, relative_error};
use epsteer::evolution::{mode_projection, proportions, step, weighted_eigenvalue, EvolutionState, Mode, ModeBasis, PathPair};
use epsteer::hamiltonian::{eigensystem_at, CoupledGainLoss, EigenOptions, Eigensystem, ParameterPoint, EP_EXCLUSION_RADIUS, C64};
use epsteer::metrics::{chiral_index, chiral_index_from_ends, time_to_purity, OptimizedRunner, StableRunner, UniformRunner, MethodRunner};
use epsteer::optimizer::{ga_search, optimize, ConstraintSet, GaConfig, OptimizationProblem, Scenario};
use epsteer::path::{build_loop, Direction, LoopSpec};
use epsteer::scheduler::{stable_schedule_on, SchedulerConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PURITY: f64 = 0.9;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Check + 'a>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn opts() -> EigenOptions {
    EigenOptions::default()
}

fn es_at(p: ParameterPoint) -> Arc<Eigensystem> {
    Arc::new(eigensystem_at(&CoupledGainLoss, p, None, &opts()).unwrap())
}

fn random_point(rng: &mut ChaCha8Rng) -> ParameterPoint {
    loop {
        let p = ParameterPoint::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if !near_builtin_ep(p, EP_EXCLUSION_RADIUS) {
            return p;
        }
    }
}

fn random_state(rng: &mut ChaCha8Rng) -> DVector<C64> {
    DVector::from_fn(2, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Shared fixtures for the default benchmark.
struct Bench {
    paths: PathPair,
}

impl Bench {
    fn new() -> Self {
        let lp = build_loop(&LoopSpec::default()).unwrap();
        Self {
            paths: PathPair::compute(&CoupledGainLoss, &lp, &opts()).unwrap(),
        }
    }

    fn problem(&self, constraints: ConstraintSet) -> OptimizationProblem {
        OptimizationProblem::with_paths(self.paths.clone(), constraints)
    }

    fn ga(&self) -> GaConfig {
        GaConfig {
            seed: 42,
            ..GaConfig::default()
        }
    }

    /// Uniform total time at which CCW A ends in B and CW A ends in A.
    fn uniform_chiral_time(&self, purity: f64) -> Result<f64, String> {
        let runner = UniformRunner::new(
            self.paths.clone(),
            vec![
                Scenario::new(Direction::Ccw, Mode::A, Mode::B, purity),
                Scenario::new(Direction::Cw, Mode::A, Mode::A, purity),
            ],
        );
        runner
            .schedule_for(purity)
            .map_err(|e| e.to_string())?
            .map(|s| s.total_time())
            .ok_or_else(|| format!("no uniform schedule reaches {purity}"))
    }

    fn stable_time(&self) -> Result<f64, String> {
        let out = stable_schedule_on(self.paths.get(Direction::Ccw), Mode::A, &SchedulerConfig::with_p0(PURITY))
            .map_err(|e| e.to_string())?;
        Ok(out.schedule.total_time())
    }
}

fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let id = DMatrix::<C64>::identity(2, 2);
    let (mut bi, mut rec, mut eig) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let p = random_point(&mut rng);
        let es = es_at(p);
        bi = bi.max(max_abs(&(es.left_matrix() * es.right_matrix() - &id)));
        rec = rec.max(max_abs(&(es.reconstruct() - builtin_matrix(p))));
        let w = quadratic_eigenvalues(p);
        for (got, want) in es.eigenvalues().iter().zip(w) {
            eig = eig.max((got - want).norm());
        }
    }
    ensure!(bi <= 1e-10, "biorthonormality error {bi:.3e}");
    ensure!(rec <= 1e-9, "reconstruction error {rec:.3e}");
    ensure!(eig <= 1e-12, "eigenvalue error {eig:.3e}");
    Ok(format!("biorth {bi:.1e}, reconstruction {rec:.1e}, eigenvalues {eig:.1e}"))
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = random_point(&mut rng);
        let dt = rng.random_range(0.0..=5.0);
        let psi = random_state(&mut rng);
        let es = es_at(p);
        let s = EvolutionState::from_vector(es.clone(), psi.clone(), 0).map_err(|e| e.to_string())?;
        let spectral = step(&s, &es, dt).map_err(|e| e.to_string())?.psi;
        let dense = dense_propagate(&builtin_matrix(p), &psi, dt);
        worst = worst.max(relative_error(&spectral, &dense));
    }
    ensure!(worst <= 1e-9, "relative error {worst:.3e}");
    Ok(format!("max relative error {worst:.1e}"))
}

fn criterion_3(bench: &Bench) -> Check {
    let t = bench.uniform_chiral_time(PURITY)?;
    let n = bench.paths.n_intervals();
    let schedule = epsteer::scheduler::uniform_schedule(n, t).map_err(|e| e.to_string())?;
    let (_, zb) = bench.paths.ccw.end_projection(&schedule.dwells_for(Direction::Ccw), Mode::A).map_err(|e| e.to_string())?;
    let (za, _) = bench.paths.cw.end_projection(&schedule.dwells_for(Direction::Cw), Mode::A).map_err(|e| e.to_string())?;
    ensure!(zb >= PURITY, "CCW end zeta_B {zb:.6}");
    ensure!(za >= PURITY, "CW end zeta_A {za:.6}");
    Ok(format!("T_uniform = {t:.4}, CCW zeta_B {zb:.4}, CW zeta_A {za:.4}"))
}

fn criterion_4(bench: &Bench) -> Check {
    let out = stable_schedule_on(bench.paths.get(Direction::Ccw), Mode::A, &SchedulerConfig::with_p0(PURITY))
        .map_err(|e| e.to_string())?;
    let start = out.engaged_from().ok_or("schedule never engaged")?;
    let low: Vec<usize> = out.trace.samples[start..]
        .iter()
        .filter(|s| !out.passthrough.contains(&s.j))
        .filter(|s| s.proportions[0] < PURITY - 1e-6)
        .map(|s| s.j)
        .collect();
    ensure!(low.is_empty(), "P_1 below P0 at {low:?}");
    let (_, zb) = out.trace.end_zeta().map_err(|e| e.to_string())?;
    ensure!(zb >= PURITY, "CCW end zeta_B {zb:.6}");
    let t = out.schedule.total_time();
    let same = UniformRunner::new(bench.paths.clone(), vec![Scenario::new(Direction::Ccw, Mode::A, Mode::B, zb)])
        .schedule_for(zb)
        .map_err(|e| e.to_string())?
        .map_or(f64::INFINITY, |s| s.total_time());
    let chiral = bench.uniform_chiral_time(PURITY)?;
    ensure!(t < same, "stable {t:.4} not below uniform {same:.4} at zeta_B {zb:.4}");
    ensure!(t < chiral, "stable {t:.4} not below chiral uniform {chiral:.4}");
    Ok(format!(
        "T_stable = {t:.4} (engaged from {start}, pass-through {:?}), end zeta_B {zb:.4}, uniform for same purity {same:.4}",
        out.passthrough
    ))
}

fn criterion_5(bench: &Bench) -> Check {
    let problem = bench.problem(ConstraintSet::bimodal_chiral(PURITY).map_err(|e| e.to_string())?);
    let out = optimize(&problem, &bench.ga()).map_err(|e| e.to_string())?;
    ensure!(out.feasible, "infeasible, achieved {:?}", out.achieved);
    let t = out.total_time();
    let stable = bench.stable_time()?;
    ensure!(t < stable, "optimized {t:.4} not below stable {stable:.4}");
    let mut cis = Vec::new();
    for mode in [Mode::A, Mode::B] {
        let ccw = bench.paths.ccw.trace(&out.schedule, mode).map_err(|e| e.to_string())?;
        let cw = bench.paths.cw.trace(&out.schedule, mode).map_err(|e| e.to_string())?;
        let ci = chiral_index(&ccw, &cw).map_err(|e| e.to_string())?;
        ensure!(ci >= PURITY, "CI[{mode}] = {ci:.6}");
        cis.push(ci);
    }
    let gap = (cis[0] - cis[1]).abs();
    ensure!(gap <= 0.02, "|CI_A - CI_B| = {gap:.4}");
    Ok(format!("T_opt = {t:.4} < T_stable = {stable:.4}, CI_A {:.4}, CI_B {:.4}", cis[0], cis[1]))
}

fn criterion_6(bench: &Bench) -> Check {
    let problem = bench.problem(ConstraintSet::non_chiral(PURITY).map_err(|e| e.to_string())?);
    let out = optimize(&problem, &bench.ga()).map_err(|e| e.to_string())?;
    ensure!(out.feasible, "infeasible, achieved {:?}", out.achieved);
    Ok(format!("T_opt = {:.4}, achieved {:?}", out.total_time(), out.achieved))
}

fn criterion_7(bench: &Bench) -> Check {
    let levels = [0.8, 0.85, 0.9, 0.95];
    let ccw = Scenario::new(Direction::Ccw, Mode::A, Mode::B, PURITY);
    let constraints = ConstraintSet::non_chiral(PURITY).map_err(|e| e.to_string())?;
    let uniform = UniformRunner::new(bench.paths.clone(), vec![ccw]);
    let stable = StableRunner::new(bench.paths.clone(), ccw);
    let optimized = OptimizedRunner {
        paths: bench.paths.clone(),
        constraints,
        config: bench.ga(),
    };
    let times = |r: &dyn MethodRunner| -> Result<Vec<f64>, String> {
        Ok(time_to_purity(r, &levels).map_err(|e| e.to_string())?.iter().map(|p| p.time).collect())
    };
    let (u, s, o) = (times(&uniform)?, times(&stable)?, times(&optimized)?);
    for (i, level) in levels.iter().enumerate() {
        ensure!(o[i] < s[i] && s[i] < u[i], "ordering fails at {level}: opt {:.4}, stable {:.4}, uniform {:.4}", o[i], s[i], u[i]);
    }
    for (name, t) in [("uniform", &u), ("stable", &s), ("optimized", &o)] {
        ensure!(t.windows(2).all(|w| w[0] <= w[1]), "{name} times not monotone: {t:?}");
    }
    let ratio = o[2] / u[2];
    ensure!(ratio <= 0.5, "optimized/uniform at 0.9 = {ratio:.3}");
    let fmt = |t: &[f64]| t.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/");
    Ok(format!("uniform {} stable {} optimized {} ratio@0.9 {ratio:.3}", fmt(&u), fmt(&s), fmt(&o)))
}

fn run_property<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn point() -> impl Strategy<Value = ParameterPoint> {
    (-2.0..2.0f64, -2.0..2.0f64)
        .prop_map(|(x, y)| ParameterPoint::new(x, y))
        .prop_filter("away from the exceptional points", |p| !near_builtin_ep(*p, 1e-2))
}

fn state() -> impl Strategy<Value = DVector<C64>> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2)
        .prop_filter("non-zero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| DVector::from_iterator(2, v.into_iter().map(|(a, b)| C64::new(a, b))))
}

fn phases() -> impl Strategy<Value = Vec<C64>> {
    proptest::collection::vec(0.0..std::f64::consts::TAU, 2).prop_map(|v| v.into_iter().map(C64::cis).collect())
}

fn criterion_8(bench: &Bench) -> Check {
    const CASES: u32 = 200;
    run_property("zero-dwell identity", CASES, (point(), point(), state()), |(p, q, psi)| {
        let s = EvolutionState::from_vector(es_at(p), psi.clone(), 0).unwrap();
        let target = es_at(q);
        let next = step(&s, &target, 0.0).unwrap();
        prop_assert!(max_abs(&(next.psi - psi)) <= 1e-12 * target.condition().max(1.0));
        Ok(())
    })?;
    run_property(
        "gauge independence",
        CASES,
        (point(), point(), 0.0..3.0f64, phases(), phases()),
        |(p, q, dt, g0, g1)| {
            let (start, next) = (es_at(p), es_at(q));
            let start_g = Arc::new(start.regauged(&g0).unwrap());
            let next_g = Arc::new(next.regauged(&g1).unwrap());
            let (basis, basis_g) = (ModeBasis::from_start(&start), ModeBasis::from_start(&start_g));
            let psi = basis.psi(Mode::A).clone();
            let a = step(&EvolutionState::from_vector(start.clone(), psi.clone(), 0).unwrap(), &next, dt).unwrap();
            let b = step(&EvolutionState::from_vector(start_g.clone(), psi, 0).unwrap(), &next_g, dt).unwrap();
            let (pa, pb) = (proportions(&a).unwrap(), proportions(&b).unwrap());
            prop_assert!((pa[0] - pb[0]).abs() <= 1e-10 && (pa[1] - pb[1]).abs() <= 1e-10);
            prop_assert!((weighted_eigenvalue(&a).unwrap() - weighted_eigenvalue(&b).unwrap()).norm() <= 1e-10);
            let (za, _) = mode_projection(&a, &basis).unwrap();
            let (zb, _) = mode_projection(&b, &basis_g).unwrap();
            prop_assert!((za - zb).abs() <= 1e-10);
            Ok(())
        },
    )?;
    run_property("state-scale invariance", CASES, (point(), state(), 1e-6..1e6f64), |(p, psi, k)| {
        let es = es_at(p);
        let basis = ModeBasis::from_start(&es);
        let a = EvolutionState::from_vector(es.clone(), psi.clone(), 0).unwrap();
        let b = EvolutionState::from_vector(es, psi * C64::new(k, 0.0), 0).unwrap();
        prop_assert!((proportions(&a).unwrap()[0] - proportions(&b).unwrap()[0]).abs() <= 1e-12);
        prop_assert!((weighted_eigenvalue(&a).unwrap() - weighted_eigenvalue(&b).unwrap()).norm() <= 1e-12);
        prop_assert!((mode_projection(&a, &basis).unwrap().0 - mode_projection(&b, &basis).unwrap().0).abs() <= 1e-12);
        Ok(())
    })?;
    run_property("CI range", CASES, (0.0..=1.0f64, 0.0..=1.0f64), |(a, b)| {
        let ci = chiral_index_from_ends((a, 1.0 - a), (b, 1.0 - b));
        prop_assert!((0.5..=1.0).contains(&ci));
        Ok(())
    })?;
    let problem = bench.problem(ConstraintSet::non_chiral(PURITY).map_err(|e| e.to_string())?);
    run_property("schedule determinism", CASES, any::<u64>(), |seed| {
        let cfg = GaConfig {
            population: 8,
            generations: 4,
            seed,
            ..GaConfig::default()
        };
        prop_assert_eq!(ga_search(&problem, &cfg).unwrap(), ga_search(&problem, &cfg).unwrap());
        Ok(())
    })?;
    Ok(format!("5 properties x {CASES} cases"))
}

fn main() -> ExitCode {
    let bench = Bench::new();
    let criteria: Vec<Criterion> = vec![
        ("1 eigensystem correctness", Duration::from_secs(1), Box::new(criterion_1)),
        ("2 propagator oracle", Duration::from_secs(5), Box::new(criterion_2)),
        ("3 uniform chiral baseline", Duration::from_secs(10), Box::new(|| criterion_3(&bench))),
        ("4 stable conversion", Duration::from_secs(10), Box::new(|| criterion_4(&bench))),
        ("5 bimodal chiral optimization", Duration::from_secs(300), Box::new(|| criterion_5(&bench))),
        ("6 non-chiral conversion", Duration::from_secs(300), Box::new(|| criterion_6(&bench))),
        ("7 speedup ordering", Duration::from_secs(600), Box::new(|| criterion_7(&bench))),
        ("8 invariant suite", Duration::from_secs(60), Box::new(|| criterion_8(&bench))),
    ];
    let mut failures = 0;
    for (name, limit, check) in &criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = started.elapsed();
        let result = match result {
            Ok(detail) if elapsed > *limit => Err(format!("{detail}; runtime {elapsed:.2?} over {limit:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("PASS criterion {name} [{elapsed:.2?}]: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {name} [{elapsed:.2?}]: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

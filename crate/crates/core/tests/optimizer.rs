use epsteer::hamiltonian::{CoupledGainLoss, EigenOptions};
use epsteer::optimizer::{optimize, ConstraintSet, GaConfig, OptimizationProblem};
use epsteer::path::{build_loop, LoopSpec};

fn run(constraints: ConstraintSet) -> epsteer::optimizer::OptimizedSchedule {
    let lp = build_loop(&LoopSpec::default()).unwrap();
    let problem = OptimizationProblem::new(&CoupledGainLoss, &lp, constraints, &EigenOptions::default()).unwrap();
    optimize(&problem, &GaConfig::default()).unwrap()
}

#[test]
fn bimodal_schedule_is_sparse() {
    let out = run(ConstraintSet::bimodal_chiral(0.9).unwrap());
    assert!(out.feasible);
    let support = out.schedule.support();
    assert!((1..=15).contains(&support), "support {support}");
    assert_eq!(out.report.seed, 42);
    assert!(out.report.history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn non_chiral_schedule_is_sparse() {
    let out = run(ConstraintSet::non_chiral(0.9).unwrap());
    assert!(out.feasible);
    assert!(out.schedule.support() <= 15, "support {}", out.schedule.support());
    for a in &out.achieved {
        assert!(*a >= 0.9 - 1e-9);
    }
}

mod common;

use std::sync::Arc;

use common::{builtin_matrix, dense_propagate, max_abs, near_builtin_ep, quadratic_eigenvalues, relative_error};
use epsteer::evolution::{mode_projection, proportions, step, weighted_eigenvalue, EvolutionState, ModeBasis, Mode};
use epsteer::hamiltonian::{eigensystem_at, CoupledGainLoss, EigenOptions, Eigensystem, ParameterPoint, C64};
use epsteer::metrics::chiral_index_from_ends;
use epsteer::optimizer::{ga_search, ConstraintSet, GaConfig, OptimizationProblem};
use epsteer::path::{build_loop, LoopSpec};
use nalgebra::DVector;
use proptest::prelude::*;

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

fn es_at(p: ParameterPoint) -> Arc<Eigensystem> {
    Arc::new(eigensystem_at(&CoupledGainLoss, p, None, &EigenOptions::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eigenvalues_match_quadratic_formula(p in point()) {
        let es = es_at(p);
        let w = quadratic_eigenvalues(p);
        for (got, want) in es.eigenvalues().iter().zip(w) {
            prop_assert!((got - want).norm() <= 1e-12);
        }
        prop_assert!(es.eigenvalues()[0].im >= es.eigenvalues()[1].im);
        let gram = es.left_matrix() * es.right_matrix();
        let id = nalgebra::DMatrix::<C64>::identity(2, 2);
        prop_assert!(max_abs(&(gram - id)) <= 1e-10);
        prop_assert!(max_abs(&(es.reconstruct() - builtin_matrix(p))) <= 1e-9);
    }

    #[test]
    fn spectral_step_matches_matrix_exponential(p in point(), dt in 0.0..5.0f64, psi in state()) {
        let es = es_at(p);
        let s = EvolutionState::from_vector(es.clone(), psi.clone(), 0).unwrap();
        let spectral = step(&s, &es, dt).unwrap().psi;
        let dense = dense_propagate(&builtin_matrix(p), &psi, dt);
        prop_assert!(relative_error(&spectral, &dense) <= 1e-9);
    }

    #[test]
    fn zero_dwell_keeps_the_vector(p in point(), q in point(), psi in state()) {
        let s = EvolutionState::from_vector(es_at(p), psi.clone(), 0).unwrap();
        let next = step(&s, &es_at(q), 0.0).unwrap();
        prop_assert!(max_abs(&(next.psi - psi)) <= 1e-12 * es_at(q).condition().max(1.0));
    }

    #[test]
    fn sample_fields_are_gauge_independent(
        p in point(), q in point(), dt in 0.0..3.0f64, g1 in phases(), g0 in phases()
    ) {
        let start = es_at(p);
        let next = es_at(q);
        let start_g = Arc::new(start.regauged(&g0).unwrap());
        let next_g = Arc::new(next.regauged(&g1).unwrap());
        let basis = ModeBasis::from_start(&start);
        let basis_g = ModeBasis::from_start(&start_g);
        let s = EvolutionState::from_vector(start.clone(), basis.psi(Mode::A).clone(), 0).unwrap();
        // The same physical input expressed in the re-gauged start basis.
        let s_g = EvolutionState::from_vector(start_g.clone(), basis.psi(Mode::A).clone(), 0).unwrap();
        let a = step(&s, &next, dt).unwrap();
        let b = step(&s_g, &next_g, dt).unwrap();
        let (pa, pb) = (proportions(&a).unwrap(), proportions(&b).unwrap());
        for n in 0..2 {
            prop_assert!((pa[n] - pb[n]).abs() <= 1e-10);
        }
        prop_assert!((weighted_eigenvalue(&a).unwrap() - weighted_eigenvalue(&b).unwrap()).norm() <= 1e-10);
        let (za, zb) = mode_projection(&a, &basis).unwrap();
        let (za_g, zb_g) = mode_projection(&b, &basis_g).unwrap();
        prop_assert!((za - za_g).abs() <= 1e-10 && (zb - zb_g).abs() <= 1e-10);
        prop_assert!((pa.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!((za + zb - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sample_fields_are_scale_invariant(p in point(), psi in state(), k in 1e-6..1e6f64) {
        let es = es_at(p);
        let basis = ModeBasis::from_start(&es);
        let a = EvolutionState::from_vector(es.clone(), psi.clone(), 0).unwrap();
        let b = EvolutionState::from_vector(es.clone(), psi * C64::new(k, 0.0), 0).unwrap();
        let (pa, pb) = (proportions(&a).unwrap(), proportions(&b).unwrap());
        prop_assert!((pa[0] - pb[0]).abs() <= 1e-12);
        prop_assert!((weighted_eigenvalue(&a).unwrap() - weighted_eigenvalue(&b).unwrap()).norm() <= 1e-12);
        let (za, _) = mode_projection(&a, &basis).unwrap();
        let (zb, _) = mode_projection(&b, &basis).unwrap();
        prop_assert!((za - zb).abs() <= 1e-12);
    }

    #[test]
    fn chiral_index_stays_in_range(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let ci = chiral_index_from_ends((a, 1.0 - a), (b, 1.0 - b));
        prop_assert!((0.5..=1.0).contains(&ci));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ga_is_deterministic_for_any_seed(seed in any::<u64>()) {
        let lp = build_loop(&LoopSpec::default()).unwrap();
        let problem = OptimizationProblem::new(
            &CoupledGainLoss, &lp, ConstraintSet::non_chiral(0.9).unwrap(), &EigenOptions::default(),
        ).unwrap();
        let cfg = GaConfig { population: 8, generations: 4, seed, ..GaConfig::default() };
        prop_assert_eq!(ga_search(&problem, &cfg).unwrap(), ga_search(&problem, &cfg).unwrap());
    }
}

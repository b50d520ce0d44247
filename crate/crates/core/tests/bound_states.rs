use gup_bic::basis::fundamental_basis;
use gup_bic::matcher::{assemble, bound_states, classify, natural_conditions, nullspace, NormalizeMode, State, RANK_TOL};
use gup_bic::problem::{canonical_problem, DimensionlessProblem, PhysicalSetup, PotentialSpec, ELECTRON_MASS};
use gup_bic::quadrature::{integrate_real, QuadOptions};
use num_complex::Complex64;
use std::sync::Arc;

fn problem(spec: PotentialSpec) -> DimensionlessProblem {
    canonical_problem(&PhysicalSetup::new(ELECTRON_MASS, 1e47, spec).unwrap()).unwrap()
}

fn linear() -> DimensionlessProblem {
    problem(PotentialSpec::Linear { slope: 1e-8 })
}

fn harmonic() -> DimensionlessProblem {
    problem(PotentialSpec::Harmonic { omega: 2e16 })
}

fn residual(s: &State, p: &DimensionlessProblem, x: f64) -> f64 {
    let j = s.jet::<5>(x).unwrap();
    let q = p.potential.value(x) - s.basis.energy;
    let t = [j[4] * p.epsilon, -j[2], j[0] * q];
    t.iter().sum::<Complex64>().norm() / (t.iter().map(|z| z.norm()).sum::<f64>() + 1e-300)
}

fn norm_sq(s: &State, lo: f64, hi: f64) -> f64 {
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 4000, initial_pieces: 16 };
    integrate_real(|x| Ok(s.value(x)?.norm_sqr()), lo, hi, &opts).unwrap()
}

#[test]
fn linear_states_are_nondegenerate_and_normalized() {
    let p = linear();
    for e in [0.7, 3.0, 11.0, 23.0] {
        let sol = bound_states(&p, e, NormalizeMode::Orthogonal).unwrap();
        assert_eq!(sol.degeneracy, 1, "E {e}");
        let s = &sol.states[0];
        assert!(s.value(0.0).unwrap().norm() < 1e-8);
        let far = s.basis.far.as_ref().unwrap();
        let n = norm_sq(s, 0.0, far.launch) + norm_sq(s, far.launch, far.tail_end);
        assert!((n - 1.0).abs() < 1e-8, "E {e}: norm {n}");
        for x in [0.1, 1.0, 0.5 * far.launch, far.launch] {
            assert!(residual(s, &p, x) < 1e-6, "E {e} x {x}: {}", residual(s, &p, x));
        }
        // asymptotic tail
        assert!(residual(s, &p, far.launch + 0.3) < 5e-2);
    }
}

#[test]
fn harmonic_states_are_doubly_degenerate() {
    let p = harmonic();
    for e in [0.5, 2.0, 7.7, 18.0] {
        let sol = bound_states(&p, e, NormalizeMode::Orthogonal).unwrap();
        assert_eq!(sol.degeneracy, 2, "E {e}");
        let tail = sol.states[0].basis.region.hi;
        for s in &sol.states {
            let n = norm_sq(s, -tail, tail);
            assert!((n - 1.0).abs() < 1e-7, "E {e}: norm {n}");
        }
        let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-10, max_intervals: 4000, initial_pieces: 16 };
        let (a, b) = (&sol.states[0], &sol.states[1]);
        let overlap = integrate_real(|x| Ok((a.value(x)? * b.value(x)?.conj()).re), -tail, tail, &opts).unwrap();
        assert!(overlap.abs() < 1e-8, "E {e}: overlap {overlap}");
    }
}

#[test]
fn nullity_matches_prediction() {
    for p in [linear(), harmonic()] {
        let conds = natural_conditions(&p);
        let predicted = classify(&conds).unwrap().predicted_dof;
        for e in [1.0, 4.5, 9.0] {
            let basis = Arc::new(fundamental_basis(&p, e).unwrap());
            let sys = assemble(&basis, &conds, e).unwrap();
            assert_eq!(nullspace(&sys, RANK_TOL).unwrap().nullity, predicted);
        }
    }
}

use gup_bic::basis::{exact_constant_basis, characteristic_roots, Side};
use gup_bic::ode::Tolerance;
use gup_bic::oracle::{
    decaying_subspace_dimension, integrate, momentum_rep_linear, residual, two_sided_mismatch, wronskian_of,
    StateVector, WronskianProfile,
};
use gup_bic::problem::{
    canonical_problem, DimensionlessProblem, Interval, PhysicalSetup, PotentialKind, PotentialSpec, ScaledPotential,
    ELECTRON_MASS,
};
use num_complex::Complex64;

fn harmonic(eps: f64) -> DimensionlessProblem {
    DimensionlessProblem::scaled(
        eps,
        ScaledPotential::Quadratic { coef: 1.0 },
        Interval::new(f64::NEG_INFINITY, f64::INFINITY),
        PotentialKind::Harmonic,
    )
}

fn linear(eps: f64) -> DimensionlessProblem {
    let mut p = DimensionlessProblem::scaled(
        eps,
        ScaledPotential::Linear { slope: 1.0 },
        Interval::new(0.0, f64::INFINITY),
        PotentialKind::Linear,
    );
    p.wall_lo = true;
    p
}

fn well(eps: f64) -> DimensionlessProblem {
    DimensionlessProblem::scaled(eps, ScaledPotential::Zero, Interval::new(-1.0, 1.0), PotentialKind::Well)
}

#[test]
fn decaying_dimensions() {
    for e in [0.5, 3.0, 9.0] {
        assert_eq!(decaying_subspace_dimension(&harmonic(0.1), e, Side::PlusInfinity).unwrap(), 2);
        assert_eq!(decaying_subspace_dimension(&harmonic(0.1), e, Side::MinusInfinity).unwrap(), 2);
        assert_eq!(decaying_subspace_dimension(&linear(0.05), e, Side::PlusInfinity).unwrap(), 2);
        assert_eq!(decaying_subspace_dimension(&harmonic(0.0), e, Side::PlusInfinity).unwrap(), 1);
        assert_eq!(decaying_subspace_dimension(&linear(0.0), e, Side::PlusInfinity).unwrap(), 1);
    }
    assert!(decaying_subspace_dimension(&linear(0.1), 1.0, Side::MinusInfinity).is_err());
    assert!(decaying_subspace_dimension(&well(0.1), 1.0, Side::PlusInfinity).is_err());
}

#[test]
fn sine_shot_reaches_far_wall_at_special_energy() {
    let eps = 7.414e-2;
    for k in 1..=3 {
        let kappa = k as f64 * std::f64::consts::FRAC_PI_2;
        let e = eps * kappa.powi(4) + kappa * kappa;
        let init = StateVector::real([0.0, kappa, 0.0, -kappa.powi(3)]);
        let t = integrate(&well(eps), e, init, -1.0, 1.0, Tolerance::default()).unwrap();
        assert!(t.eval(1.0).unwrap().phi().norm() < 1e-9);
    }
}

#[test]
fn zero_initial_data_stays_zero() {
    let t = integrate(&well(0.1), 2.0, StateVector::zero(), -1.0, 1.0, Tolerance::default()).unwrap();
    assert!(t.states.iter().all(|s| s.norm() == 0.0));
}

#[test]
fn plain_and_swept_wronskians_agree() {
    let p = well(0.2);
    let e = 4.0;
    let trajs: Vec<_> = (0..4)
        .map(|j| {
            let mut d = [0.0; 4];
            d[j] = 1.0;
            integrate(&p, e, StateVector::real(d), 0.0, 1.0, Tolerance::default()).unwrap()
        })
        .collect();
    let plain = wronskian_of(&trajs, 1.0).unwrap();
    let swept = WronskianProfile::new(&p, e, 0.0, 1.0, Tolerance::default()).unwrap().at(1.0).unwrap();
    assert!((plain - swept).norm() < 1e-8 * swept.norm());
    // dependent columns give a vanishing determinant
    let dep = vec![trajs[0].clone(), trajs[1].clone(), trajs[2].clone(), trajs[0].clone()];
    assert!(wronskian_of(&dep, 0.5).unwrap().norm() < 1e-12);
}

#[test]
fn residual_flags_corrupted_state() {
    let eps = 0.1;
    let r = characteristic_roots(eps, 3.0).unwrap();
    let b = exact_constant_basis(&r).unwrap();
    let grid: Vec<f64> = (0..50).map(|i| -0.95 + 0.038 * i as f64).collect();
    let clean = residual(|x| b[2].jet::<5>(x), &well(eps), 3.0, &grid).unwrap();
    assert!(clean < 1e-10);
    let bad = residual(
        |x| {
            let mut j = b[2].jet::<5>(x)?;
            j[0] += Complex64::new(0.01 * x, 0.0);
            j[1] += Complex64::new(0.01, 0.0);
            Ok(j)
        },
        &well(eps),
        3.0,
        &grid,
    )
    .unwrap();
    assert!(bad > 1e-3, "{bad}");
}

#[test]
fn classical_mismatch_has_isolated_zeros() {
    let p = harmonic(0.0);
    for level in [1.0, 3.0, 5.0] {
        let a = two_sided_mismatch(&p, level - 1e-3).unwrap();
        let b = two_sided_mismatch(&p, level + 1e-3).unwrap();
        assert!(a * b < 0.0, "level {level}: {a} {b}");
    }
    // away from the levels the mismatch is far from zero
    for e in [2.0, 4.0, 5.9] {
        assert!(two_sided_mismatch(&p, e).unwrap().abs() > 0.1);
    }
}

#[test]
fn momentum_representation_is_one_dimensional() {
    let setup = PhysicalSetup::new(ELECTRON_MASS, 1e47, PotentialSpec::Linear { slope: 1e-8 }).unwrap();
    let sol = momentum_rep_linear(&setup, 3e-18).unwrap();
    let ps = sol.momentum_scale();
    for i in 0..100 {
        let p = ps * (-5.0 + 10.0 * i as f64 / 99.0);
        assert!(sol.residual(p) < 1e-10, "p {p}: {}", sol.residual(p));
    }
    assert_eq!(sol.solution_space_dimension(-3.0 * ps, 3.0 * ps).unwrap(), 1);
    let pos = canonical_problem(&setup).unwrap();
    let w = WronskianProfile::new(&pos, pos.energy_from_si(3e-18), 0.0, 5.0, Tolerance::default()).unwrap();
    assert!((w.at(5.0).unwrap().re - 1.0).abs() < 1e-8);
}

#[test]
fn momentum_solution_standard_limit() {
    let m = ELECTRON_MASS;
    let e = 3e-18;
    let g0 = PhysicalSetup::new(m, 0.0, PotentialSpec::Linear { slope: 1e-8 }).unwrap();
    let std = momentum_rep_linear(&g0, e).unwrap();
    let p = 2e-24;
    assert!((std.g(p) - (p * p * p / (6.0 * m) - e * p)).abs() < 1e-15 * (e * p));
    let mut last = f64::INFINITY;
    for beta in [1e45, 1e43, 1e41] {
        let s = PhysicalSetup::new(m, beta, PotentialSpec::Linear { slope: 1e-8 }).unwrap();
        let d = (momentum_rep_linear(&s, e).unwrap().eval(p) - std.eval(p)).norm();
        assert!(d < last);
        last = d;
    }
    assert!(last < 1e-3);
}

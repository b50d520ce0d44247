use gup_bic::basis::{characteristic_roots, exact_constant_basis, fundamental_basis, BasisFunction};
use gup_bic::config::{parse_entries, render};
use gup_bic::error::Error;
use gup_bic::matcher::{
    assemble, bound_states, classify, natural_conditions, nullspace, principal_angle, well_coefficients,
    NormalizeMode, RANK_TOL,
};
use gup_bic::ode::Tolerance;
use gup_bic::oracle::{integrate, StateVector};
use gup_bic::problem::{
    canonical_problem, nondimensionalize, DimensionlessProblem, Interval, PhysicalSetup, PotentialKind,
    PotentialSpec, ScaledPotential, ELECTRON_MASS,
};
use gup_bic::quadrature::{integrate_real, QuadOptions};
use gup_bic::spectrum::{momentum_moments, oscillatory_first};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use std::path::Path;
use std::sync::Arc;

fn spec_strategy() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        (-11.0..-8.0f64).prop_map(|l| PotentialSpec::InfiniteWell { half_width: 10f64.powf(l) }),
        (-12.0..-4.0f64).prop_map(|l| PotentialSpec::Linear { slope: 10f64.powf(l) }),
        (14.0..31.0f64).prop_map(|l| PotentialSpec::Harmonic { omega: 10f64.powf(l) }),
    ]
}

fn setup_strategy() -> impl Strategy<Value = PhysicalSetup> {
    (-31.0..-26.0f64, prop_oneof![Just(0.0), (20.0..50.0f64).prop_map(|l| 10f64.powf(l))], spec_strategy())
        .prop_map(|(m, beta, spec)| PhysicalSetup::new(10f64.powf(m), beta, spec).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn well(eps: f64) -> DimensionlessProblem {
    DimensionlessProblem::scaled(eps, ScaledPotential::Zero, Interval::new(-1.0, 1.0), PotentialKind::Well)
}

fn canonical(spec: PotentialSpec) -> DimensionlessProblem {
    canonical_problem(&PhysicalSetup::new(ELECTRON_MASS, 1e47, spec).unwrap()).unwrap()
}

/// |eps f'''' - f'' + q f| over the sum of the term magnitudes.
fn relative_residual(j: &[Complex64; 5], eps: f64, q: f64) -> f64 {
    let t = [j[4] * eps, -j[2], j[0] * q];
    t.iter().sum::<Complex64>().norm() / (t.iter().map(|z| z.norm()).sum::<f64>() + 1e-300)
}

/// Largest gap between each derivative and the five-point central
/// difference of the one below it, relative to the largest jet entry.
fn derivative_gap(f: &BasisFunction, x: f64, h: f64) -> f64 {
    let j = f.jet::<4>(x).unwrap();
    let at = |d: f64| f.jet::<4>(x + d * h).unwrap();
    let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
    let scale = j.iter().map(|z| z.norm()).fold(0.0, f64::max);
    (0..3)
        .map(|k| {
            let fd = ((p1[k] - m1[k]) * 8.0 - (p2[k] - m2[k])) / (12.0 * h);
            (fd - j[k + 1]).norm() / scale
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_round_trips(setup in setup_strategy(), x in -1e3..1e3f64, e in 1e-3..1e3f64) {
        let p = canonical_problem(&setup).unwrap();
        prop_assert!(rel(p.energy_from_si(p.energy_to_si(e)), e) <= 1e-14);
        prop_assert!((p.length_from_si(p.length_to_si(x)) - x).abs() <= 1e-14 * x.abs());
        // the scaled equation maps back term by term: hbar^2/(2m) d2/dx2 -> E_c d2/dx~2
        let ec = gup_bic::problem::HBAR.powi(2) / (2.0 * setup.mass() * p.length_scale.powi(2));
        prop_assert!(rel(p.energy_scale, ec) <= 1e-14);
        let eps = 2.0 * setup.beta_prime() * gup_bic::problem::HBAR.powi(2) / p.length_scale.powi(2);
        prop_assert!(p.epsilon == 0.0 && eps == 0.0 || rel(p.epsilon, eps) <= 1e-14);
    }

    #[test]
    fn well_epsilon_is_scale_invariant(s in 0.01..100.0f64, a in -11.0..-9.0f64) {
        let a = 10f64.powf(a);
        let base = PhysicalSetup::new(ELECTRON_MASS, 1e47, PotentialSpec::InfiniteWell { half_width: a }).unwrap();
        let scaled = PhysicalSetup::new(ELECTRON_MASS, 1e47 * s * s, PotentialSpec::InfiniteWell { half_width: a * s }).unwrap();
        let (p, q) = (canonical_problem(&base).unwrap(), canonical_problem(&scaled).unwrap());
        prop_assert!(rel(q.epsilon, p.epsilon) <= 1e-14);
    }

    #[test]
    fn config_text_round_trips(setup in setup_strategy()) {
        let text = render(&setup, None);
        let back = parse_entries(&text).unwrap().setup(None, Path::new(".")).unwrap();
        prop_assert_eq!(back, setup);
    }

    #[test]
    fn exact_basis_solves_equation(eps in 1e-3..1.0f64, e in 0.1..50.0f64, xs in prop::collection::vec(-1.0..1.0f64, 100)) {
        let roots = characteristic_roots(eps, e).unwrap();
        let basis = exact_constant_basis(&roots).unwrap();
        for f in &basis {
            for &x in &xs {
                prop_assert!(relative_residual(&f.jet::<5>(x).unwrap(), eps, -e) <= 1e-10);
            }
        }
    }

    #[test]
    fn integration_is_linear(
        u in prop::array::uniform4(-1.0..1.0f64),
        v in prop::array::uniform4(-1.0..1.0f64),
        (al, be) in (-2.0..2.0f64, -2.0..2.0f64),
        e in 0.5..10.0f64,
    ) {
        let p = canonical(PotentialSpec::Harmonic { omega: 2e16 });
        let tol = Tolerance::default();
        let run = |y: [f64; 4]| integrate(&p, e, StateVector::real(y), 0.0, 2.0, tol).unwrap().end_state();
        let combo: [f64; 4] = std::array::from_fn(|k| al * u[k] + be * v[k]);
        let (a, b, c) = (run(u), run(v), run(combo));
        let scale = a.norm() * al.abs() + b.norm() * be.abs() + c.norm();
        for k in 0..4 {
            let gap = (c.0[k] - (a.0[k] * al + b.0[k] * be)).norm();
            prop_assert!(gap <= 1e-9 * scale, "component {k}: {gap:e} vs {scale:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn quartic_roots(log_eps in -6.0..1.0f64, d in -1e3..1e3f64) {
        let eps = 10f64.powf(log_eps);
        match characteristic_roots(eps, d) {
            Ok(r) => {
                let mut roots = r.roots().to_vec();
                for mu in &roots {
                    prop_assert!(r.quartic_residual(*mu) <= 1e-11, "{mu}");
                }
                // the multiset is closed under mu -> -mu
                let key = |z: &Complex64| (z.re, z.im);
                let mut neg: Vec<Complex64> = roots.iter().map(|z| -z).collect();
                roots.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
                neg.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
                prop_assert_eq!(roots, neg);
            }
            Err(Error::ComplexQuartet(disc)) => prop_assert!(1.0 + 4.0 * eps * d < 0.0 && disc < 0.0),
            Err(other) => prop_assert!(false, "{other}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn nullity_matches_prediction(which in 0..3usize, e in 0.2..30.0f64) {
        let p = match which {
            0 => canonical_problem(&PhysicalSetup::reference_well()).unwrap(),
            1 => canonical(PotentialSpec::Linear { slope: 1e-8 }),
            _ => canonical(PotentialSpec::Harmonic { omega: 2e16 }),
        };
        let conds = natural_conditions(&p);
        let predicted = classify(&conds).unwrap().predicted_dof;
        let basis = Arc::new(fundamental_basis(&p, e).unwrap());
        let sys = assemble(&basis, &conds, e).unwrap();
        prop_assert_eq!(nullspace(&sys, RANK_TOL).unwrap().nullity, predicted);
    }
}

#[test]
fn figure_energies_in_scaled_units() {
    let p = canonical_problem(&PhysicalSetup::reference_well()).unwrap();
    for (si, want) in [(1e-18, 1.638), (5e-18, 8.192), (1e-17, 16.38)] {
        assert!(rel(p.energy_from_si(si), want) < 1e-3, "{si}: {}", p.energy_from_si(si));
    }
}

#[test]
fn basis_derivatives_match_differences() {
    let cases = [
        (canonical_problem(&PhysicalSetup::reference_well()).unwrap(), 4.0),
        (canonical(PotentialSpec::Linear { slope: 1e-8 }), 3.0),
        (canonical(PotentialSpec::Harmonic { omega: 2e16 }), 2.0),
    ];
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for (p, e) in &cases {
        let basis = fundamental_basis(p, *e).unwrap();
        let r = basis.region;
        let lo = if basis.mirrored { 0.0 } else { r.lo };
        let breaks = basis.breakpoints();
        for f in &basis.functions {
            let mut n = 0;
            while n < 50 {
                let x = rng.gen_range(lo..r.hi);
                let h = 1e-3;
                if breaks.iter().any(|b| (x - b).abs() < 3.0 * h) || !f.validity.contains(x - 2.0 * h) || !f.validity.contains(x + 2.0 * h) {
                    continue;
                }
                let gap = derivative_gap(f, x, h);
                assert!(gap <= 1e-6, "{:?} w{} at {x}: {gap:e}", p.kind, f.index);
                n += 1;
            }
        }
    }
}

#[test]
fn parallel_evaluation_matches_serial() {
    let p = canonical(PotentialSpec::Linear { slope: 1e-8 });
    let basis = fundamental_basis(&p, 3.0).unwrap();
    let xs: Vec<f64> = (0..400).map(|i| basis.region.hi * i as f64 / 400.0).collect();
    for f in &basis.functions {
        let serial: Vec<_> = xs.iter().map(|&x| f.jet::<4>(x).ok()).collect();
        let parallel: Vec<_> = xs.par_iter().map(|&x| f.jet::<4>(x).ok()).collect();
        assert_eq!(serial, parallel);
    }
}

#[test]
fn well_states_meet_their_contract() {
    let p = canonical_problem(&PhysicalSetup::reference_well()).unwrap();
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 4000, initial_pieces: 16 };
    for e in [0.9, 2.917, 6.3, 16.38] {
        let sol = bound_states(&p, e, NormalizeMode::Orthogonal).unwrap();
        assert_eq!(sol.degeneracy, 2, "E {e}");
        for s in &sol.states {
            let n = integrate_real(|x| Ok(s.value(x)?.norm_sqr()), -1.0, 1.0, &opts).unwrap();
            assert!((n - 1.0).abs() <= 1e-8, "E {e}: norm {n}");
            for x in [-1.0, 1.0] {
                assert!(s.value(x).unwrap().norm() <= 1e-8);
            }
            let worst = (0..2000)
                .map(|i| relative_residual(&s.jet::<5>(-1.0 + 2.0 * (i as f64 + 0.5) / 2000.0).unwrap(), p.epsilon, -e))
                .fold(0.0, f64::max);
            assert!(worst <= 1e-6, "E {e}: residual {worst:e}");
        }
        let m = &sol.gram.matrix;
        let k = m.len();
        let g = DMatrix::from_fn(k, k, |i, j| m[i][j]);
        assert!((&g - g.adjoint()).norm() <= 1e-12 * g.norm());
        let eig = nalgebra::Matrix::symmetric_eigenvalues(&DMatrix::from_fn(2 * k, 2 * k, |i, j| {
            // real embedding of the Hermitian matrix
            let z = g[(i % k, j % k)];
            match (i < k, j < k) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        }));
        assert!(eig.iter().all(|&l| l >= -1e-12 * g.norm()), "{eig}");

        // the pair built from (w1, w2, w3) and (w2, w3, w4) spans the same space
        let basis = &sol.states[0].basis;
        let f = &basis.functions;
        let a = well_coefficients([&f[0], &f[1], &f[2]], -1.0, 1.0).unwrap();
        let b = well_coefficients([&f[1], &f[2], &f[3]], -1.0, 1.0).unwrap();
        let zero = Complex64::new(0.0, 0.0);
        let pair = [[a[0], a[1], a[2], zero], [zero, b[0], b[1], b[2]]];
        let ours: Vec<[Complex64; 4]> = sol.states.iter().map(|s| s.coefficients).collect();
        let angle = principal_angle(&ours, &pair);
        assert!(angle <= 1e-8, "E {e}: angle {angle:e}");
    }
}

#[test]
fn integration_matches_exact_well_solutions() {
    let eps = 0.0741;
    let p = well(eps);
    let e = 5.0;
    let roots = characteristic_roots(eps, e).unwrap();
    let mut last = f64::INFINITY;
    for rtol in [1e-6, 1e-8, 1e-10, 1e-11] {
        let mut worst = 0.0f64;
        for f in exact_constant_basis(&roots).unwrap() {
            let d = f.jet::<4>(-1.0).unwrap();
            let t = integrate(&p, e, StateVector::new(d[0], d[1], d[2], d[3]), -1.0, 1.0, Tolerance::relative(rtol)).unwrap();
            let scale = (0..=200).map(|i| f.value(-1.0 + i as f64 / 100.0).unwrap().norm()).fold(0.0, f64::max);
            for i in 0..=200 {
                let x = -1.0 + i as f64 / 100.0;
                worst = worst.max((t.eval(x).unwrap().phi() - f.value(x).unwrap()).norm() / scale);
            }
        }
        assert!(worst < last, "rtol {rtol}: {worst:e} not below {last:e}");
        last = worst;
        if rtol <= 1e-10 {
            assert!(worst <= 1e-8, "rtol {rtol}: {worst:e}");
        }
    }
}

#[test]
fn real_states_have_zero_mean_momentum() {
    let s = PhysicalSetup::reference_well();
    let p = canonical_problem(&s).unwrap();
    let k1 = gup_bic::spectrum::well_special_energies(&s, 2).unwrap();
    for sp in &k1 {
        let sol = bound_states(&p, sp.energy, NormalizeMode::Orthogonal).unwrap();
        let fam = oscillatory_first(&sol, 1e-8).unwrap();
        let m = momentum_moments(&fam[0], &p).unwrap();
        assert!(m.mean_p.abs() <= 1e-8 * m.delta_p, "k {}: {}", sp.k, m.mean_p);
        assert!(m.delta_p >= 0.0 && m.ratio >= 0.0);
    }
    for e in [1.3, 7.0] {
        for st in &bound_states(&p, e, NormalizeMode::Orthogonal).unwrap().states {
            let m = momentum_moments(st, &p).unwrap();
            assert!(m.delta_p >= 0.0 && m.ratio >= 0.0);
        }
    }
}

#[test]
fn nondimensionalize_rejects_bad_scales() {
    let s = PhysicalSetup::reference_well();
    for lc in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(nondimensionalize(&s, lc).is_err());
    }
}

//! Canonical solutions of a bounded problem, integrated from the midpoint.

use super::{extend_by_equation, AsymptoticClass, BasisFunction, Evaluator, Method};
use crate::error::{Error, Result};
use crate::ode::Tolerance;
use crate::problem::{DimensionlessProblem, ScaledPotential};
use crate::system::default_scale;
use crate::trajectory::{StateVector, Trajectory};
use num_complex::Complex64;
use std::sync::Arc;

/// Largest `mu1 * half-width` for which canonical solutions stay
/// distinguishable in double precision.
pub const MAX_STIFFNESS: f64 = 23.0;

#[derive(Debug, Clone)]
pub struct NumericalFunction {
    potential: ScaledPotential,
    epsilon: f64,
    energy: f64,
    midpoint: f64,
    left: Trajectory,
    right: Trajectory,
}

impl NumericalFunction {
    pub fn jet<const N: usize>(&self, x: f64) -> Result<[Complex64; N]> {
        let s = if x >= self.midpoint { self.right.eval(x)? } else { self.left.eval(x)? };
        Ok(extend_by_equation::<N>(s.0, &self.potential, self.energy, self.epsilon, x))
    }
}

pub(super) fn canonical_basis(problem: &DimensionlessProblem, energy: f64) -> Result<[BasisFunction; 4]> {
    let eps = problem.epsilon;
    let (lo, hi) = (problem.domain.lo, problem.domain.hi);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Precondition("canonical solutions need a bounded domain".into()));
    }
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let v_min = (0..=256).map(|i| problem.potential.value(lo + (hi - lo) * i as f64 / 256.0)).fold(f64::INFINITY, f64::min);
    let v_max = (0..=256).map(|i| problem.potential.value(lo + (hi - lo) * i as f64 / 256.0)).fold(f64::NEG_INFINITY, f64::max);
    let fast = |d: f64| {
        let disc = (1.0 + 4.0 * eps * d).max(0.0);
        ((1.0 + disc.sqrt()) / (2.0 * eps)).sqrt()
    };
    let mu = fast(energy - v_min).max(fast(energy - v_max));
    if mu * half > MAX_STIFFNESS {
        return Err(Error::Precondition(format!(
            "fast rate {mu:.3} over half-width {half:.3} exceeds the canonical-solution limit {MAX_STIFFNESS}"
        )));
    }
    let s = default_scale(eps);
    let tol = Tolerance::default();
    let mut out = vec![];
    for j in 0..4 {
        let mut d = [0.0; 4];
        d[j] = s.powi(j as i32);
        let init = StateVector::real(d);
        let left = Trajectory::run(&problem.potential, eps, energy, init, mid, lo, tol)?;
        let right = Trajectory::run(&problem.potential, eps, energy, init, mid, hi, tol)?;
        if left.blow_up.is_some() || right.blow_up.is_some() {
            return Err(Error::Integration("canonical solution overflowed".into()));
        }
        let f = NumericalFunction { potential: problem.potential.clone(), epsilon: eps, energy, midpoint: mid, left, right };
        out.push(BasisFunction {
            index: j + 1,
            evaluator: Evaluator::Numerical(Arc::new(f)),
            class_plus: AsymptoticClass::Undefined,
            class_minus: AsymptoticClass::Undefined,
            validity: problem.domain,
            method: Method::Numerical,
        });
    }
    let mut it = out.into_iter();
    Ok([it.next().unwrap(), it.next().unwrap(), it.next().unwrap(), it.next().unwrap()])
}

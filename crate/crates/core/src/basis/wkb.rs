//! Asymptotic solutions `exp(I(x)) (lambda rho)^(-1/2)`.
//!
//! With `a = 1/(2 sqrt(eps))`, `b = V - E` and `D = a^2 - b`, the four
//! local rates are `eta lambda_j` where `eta = eps^(-1/4)` and
//! `lambda_j = tau sqrt(a + sigma sqrt(D))`, `sigma = +1` for `j = 1, 2`,
//! `-1` for `j = 3, 4`, `tau = +1` for odd `j`, `-1` for even `j`.
//! The phase is `I(x) = int_{x0}^x (eta lambda - lambda' / (2 rho))` with
//! `rho = sigma sqrt D`, and the amplitude is `(lambda rho)^(-1/2)`.
//! Using the branch-signed root in the correction makes `w4` the complex
//! conjugate of `w2` where `D < 0`.

use super::{b_series, AsymptoticClass, BasisFunction, Evaluator, Method, MAX_EXPONENT};
use crate::error::{Error, Result};
use crate::problem::{Interval, ScaledPotential};
use crate::quadrature::{integrate, QuadOptions};
use crate::taylor::Series;
use num_complex::Complex64;
use std::sync::Arc;

/// Half-width of the excluded window around each turning point.
pub const TURNING_WINDOW: f64 = 0.05;

const NODE_SPACING: f64 = 0.25;
/// Nodes are only precomputed this far from `x0` on unbounded sides.
const NODE_REACH: f64 = 400.0;

#[derive(Debug, Clone)]
pub struct WkbParameters {
    pub epsilon: f64,
    pub energy: f64,
    pub potential: ScaledPotential,
    /// `eps^(-1/4)`.
    pub eta: f64,
    /// `1/(2 sqrt(eps))`.
    pub a_coef: f64,
    /// Phase reference point.
    pub x0: f64,
}

fn canon(mut z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        z.im = 0.0;
    }
    z
}

impl WkbParameters {
    pub fn new(epsilon: f64, energy: f64, potential: ScaledPotential, x0: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::UnsupportedEpsilon(epsilon));
        }
        if !energy.is_finite() || !x0.is_finite() {
            return Err(Error::Precondition("energy and x0 must be finite".into()));
        }
        Ok(WkbParameters { epsilon, energy, potential, eta: epsilon.powf(-0.25), a_coef: 0.5 / epsilon.sqrt(), x0 })
    }

    /// `V(x) - E`.
    pub fn b(&self, x: f64) -> f64 {
        self.potential.value(x) - self.energy
    }

    pub fn discriminant(&self, x: f64) -> f64 {
        self.a_coef * self.a_coef - self.b(x)
    }

    /// Points in `[lo, hi]` where the approximation for branch `j` breaks down.
    pub fn turning_points(&self, j: usize, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts = self.potential.crossings(self.energy + self.a_coef * self.a_coef, lo, hi);
        if j >= 3 {
            pts.extend(self.potential.crossings(self.energy, lo, hi));
        }
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// Largest sub-interval of `within` around `x0` that keeps a window of
    /// `TURNING_WINDOW` from every turning point of branch `j`.
    pub fn validity_component(&self, j: usize, within: Interval) -> Result<Interval> {
        let w = TURNING_WINDOW;
        let mut lo = within.lo;
        let mut hi = within.hi;
        for t in self.turning_points(j, within.lo - w, within.hi + w) {
            if (t - self.x0).abs() <= w {
                return Err(Error::TurningPoint(t));
            }
            if t < self.x0 {
                lo = lo.max(t + w);
            } else {
                hi = hi.min(t - w);
            }
        }
        if !(lo <= self.x0 && self.x0 <= hi) {
            return Err(Error::Precondition("x0 lies outside the requested interval".into()));
        }
        Ok(Interval::new(lo, hi))
    }

    fn branch(j: usize) -> Result<(f64, f64)> {
        match j {
            1 => Ok((1.0, 1.0)),
            2 => Ok((1.0, -1.0)),
            3 => Ok((-1.0, 1.0)),
            4 => Ok((-1.0, -1.0)),
            _ => Err(Error::Precondition(format!("branch index {j} not in 1..=4"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WkbFunction {
    pub params: WkbParameters,
    pub j: usize,
    sigma: f64,
    tau: f64,
    pub validity: Interval,
    nodes: Vec<f64>,
    phases: Vec<Complex64>,
}

struct Local<const N: usize> {
    /// Phase increment relative to `x` (no constant term).
    phase: Series<N>,
    /// `-(ln lambda + ln rho)/2`.
    amplitude: Series<N>,
}

impl WkbFunction {
    pub fn new(params: WkbParameters, j: usize, validity: Interval) -> Result<Self> {
        let (sigma, tau) = WkbParameters::branch(j)?;
        if !validity.contains(params.x0) {
            return Err(Error::Precondition("x0 lies outside the validity interval".into()));
        }
        let w = TURNING_WINDOW;
        let reach = w * (1.0 - 1e-9);
        if let Some(t) = params.turning_points(j, validity.lo - reach, validity.hi + reach).first() {
            return Err(Error::TurningPoint(*t));
        }
        let mut f = WkbFunction { params, j, sigma, tau, validity, nodes: vec![], phases: vec![] };
        f.precompute()?;
        Ok(f)
    }

    fn precompute(&mut self) -> Result<()> {
        let x0 = self.params.x0;
        let lo = self.validity.lo.max(x0 - NODE_REACH);
        let hi = self.validity.hi.min(x0 + NODE_REACH);
        let mut left = vec![];
        let mut x = x0;
        while x > lo {
            x = (x - NODE_SPACING).max(lo);
            left.push(x);
        }
        left.reverse();
        let mut nodes = left;
        let origin = nodes.len();
        nodes.push(x0);
        let mut x = x0;
        while x < hi {
            x = (x + NODE_SPACING).min(hi);
            nodes.push(x);
        }
        let mut phases = vec![Complex64::new(0.0, 0.0); nodes.len()];
        for i in origin + 1..nodes.len() {
            phases[i] = phases[i - 1] + self.phase_integral(nodes[i - 1], nodes[i])?;
        }
        for i in (0..origin).rev() {
            phases[i] = phases[i + 1] - self.phase_integral(nodes[i], nodes[i + 1])?;
        }
        self.nodes = nodes;
        self.phases = phases;
        Ok(())
    }

    fn local<const N: usize>(&self, x: f64) -> Local<N> {
        let p = &self.params;
        let b: Series<N> = b_series(&p.potential, p.energy, x);
        let mut d = Series::<N>::constant(Complex64::new(p.a_coef * p.a_coef, 0.0)) - b;
        d.0[0] = canon(d.0[0]);
        let rho = d.sqrt().scale(Complex64::new(self.sigma, 0.0));
        let mut u = Series::<N>::constant(Complex64::new(p.a_coef, 0.0)) + rho;
        u.0[0] = canon(u.0[0]);
        let lambda = u.sqrt().scale(Complex64::new(self.tau, 0.0));
        let rate = lambda.scale(Complex64::new(p.eta, 0.0)) - lambda.derivative().div(&rho).scale(Complex64::new(0.5, 0.0));
        let mut ln_lambda = u.ln().scale(Complex64::new(0.5, 0.0));
        if self.tau < 0.0 {
            ln_lambda.0[0] += Complex64::new(0.0, self.sigma * std::f64::consts::PI);
        }
        // ln(rho) rather than ln(D)/2 keeps the pair conjugate where D < 0
        let mut rho0 = rho;
        rho0.0[0] = canon(rho0.0[0]);
        let amplitude = (ln_lambda + rho0.ln()).scale(Complex64::new(-0.5, 0.0));
        Local { phase: rate.integral(), amplitude }
    }

    /// Integrand of the phase at `x`.
    fn rate(&self, x: f64) -> Complex64 {
        let l = self.local::<2>(x);
        l.phase.0[1]
    }

    fn phase_integral(&self, a: f64, b: f64) -> Result<Complex64> {
        let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-13, max_intervals: 2000, initial_pieces: 1 };
        integrate(|t| Ok(self.rate(t)), a, b, &opts)
    }

    /// `I(x)`.
    pub fn phase(&self, x: f64) -> Result<Complex64> {
        if !self.validity.contains(x) {
            return Err(Error::OutsideValidity(x));
        }
        let i = match self.nodes.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return Ok(self.phases[i]),
            Err(i) => i,
        };
        // nearest node, always defined since nodes is non-empty
        let k = if i == 0 {
            0
        } else if i == self.nodes.len() || x - self.nodes[i - 1] <= self.nodes[i] - x {
            i - 1
        } else {
            i
        };
        Ok(self.phases[k] + self.phase_integral(self.nodes[k], x)?)
    }

    pub fn log_value(&self, x: f64) -> Result<Complex64> {
        let base = self.phase(x)?;
        let l = self.local::<1>(x);
        Ok(base + l.amplitude.0[0])
    }

    pub fn jet<const N: usize>(&self, x: f64) -> Result<[Complex64; N]> {
        let base = self.phase(x)?;
        let l = self.local::<N>(x);
        let mut total = l.phase + l.amplitude;
        total.0[0] += base;
        if total.0[0].re > MAX_EXPONENT {
            return Err(Error::Overflow { x, exponent: total.0[0].re });
        }
        Ok(total.exp().derivatives())
    }
}

/// WKB solution `j` over `requested`, with the phase measured from `params.x0`.
pub fn wkb_basis(params: &WkbParameters, j: usize, requested: Interval) -> Result<BasisFunction> {
    let f = WkbFunction::new(params.clone(), j, requested)?;
    Ok(BasisFunction {
        index: j,
        evaluator: Evaluator::Wkb(Arc::new(f)),
        class_plus: AsymptoticClass::Undefined,
        class_minus: AsymptoticClass::Undefined,
        validity: requested,
        method: Method::Wkb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_residual(f: &WkbFunction, x: f64) -> f64 {
        let p = &f.params;
        let j = f.jet::<5>(x).unwrap();
        let terms = [j[4] * p.epsilon, -j[2], j[0] * p.b(x)];
        let s: Complex64 = terms.iter().sum();
        s.norm() / terms.iter().map(|t| t.norm()).sum::<f64>()
    }

    #[test]
    fn constant_potential_is_exact() {
        let eps = 0.05;
        let pot = ScaledPotential::Zero;
        let p = WkbParameters::new(eps, 2.0, pot, 0.0).unwrap();
        for j in 1..=4 {
            let f = WkbFunction::new(p.clone(), j, Interval::new(-1.0, 1.0)).unwrap();
            for x in [-0.9, 0.1, 0.7] {
                assert!(rel_residual(&f, x) < 1e-10, "j {j}");
            }
        }
    }

    #[test]
    fn conjugate_pair_in_complex_region() {
        let eps = 0.1;
        let pot = ScaledPotential::Linear { slope: 1.0 };
        // D < 0 beyond x = E + 2.5
        let p = WkbParameters::new(eps, 1.0, pot, 8.0).unwrap();
        let v = Interval::new(4.0, 20.0);
        let w2 = WkbFunction::new(p.clone(), 2, v).unwrap();
        let w4 = WkbFunction::new(p.clone(), 4, v).unwrap();
        for x in [5.0, 8.0, 12.3] {
            let a = w2.jet::<4>(x).unwrap();
            let b = w4.jet::<4>(x).unwrap();
            for k in 0..4 {
                assert!((a[k] - b[k].conj()).norm() <= 1e-12 * a[k].norm().max(1e-300));
            }
        }
    }

    #[test]
    fn residual_shrinks_with_epsilon() {
        let mut last = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let pot = ScaledPotential::Linear { slope: 1.0 };
            let x0 = 1.0 / (4.0 * eps) + 10.0;
            let p = WkbParameters::new(eps, 1.0, pot, x0).unwrap();
            let f = WkbFunction::new(p, 2, Interval::new(x0 - 2.0, x0 + 2.0)).unwrap();
            let r = rel_residual(&f, x0 + 1.0);
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn turning_point_is_reported() {
        let pot = ScaledPotential::Linear { slope: 1.0 };
        let p = WkbParameters::new(0.1, 1.0, pot, 0.5).unwrap();
        match WkbFunction::new(p, 3, Interval::new(0.0, 2.0)) {
            Err(Error::TurningPoint(t)) => assert!((t - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}

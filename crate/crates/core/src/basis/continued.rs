//! Decaying solutions for potentials that rise without bound to the right.
//!
//! The two decaying WKB solutions are evaluated well inside the forbidden
//! region (the launch point), their real span is taken as initial data and
//! carried back to the left end of the domain with an orthonormalized frame
//! sweep. Beyond the launch point the functions are the matching
//! combination of the WKB solutions themselves.

use super::wkb::{WkbFunction, WkbParameters};
use super::{classify_asymptotics, extend_by_equation, AsymptoticClass, BasisFunction, Evaluator, Method, Side};
use crate::error::{Error, Result};
use crate::frame::{solve_upper, FrameSweep, SweepOptions};
use crate::ode::Tolerance;
use crate::problem::{Interval, ScaledPotential};
use crate::system::Companion;
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

/// Accumulated slow decay exponent required at the launch point.
const LAUNCH_DECAY: f64 = 18.0;
/// Clearance kept from the second turning point.
const LAUNCH_MARGIN: f64 = 1.0;
/// Decay exponent (in slow e-folds) covered by the tail region.
const TAIL_DECAY: f64 = 36.0;
const PROBE_DECAY: f64 = 6.0;
const MARCH_STEP: f64 = 0.01;

/// Far-field geometry at one energy.
#[derive(Debug, Clone, Serialize)]
pub struct FarField {
    /// `V = E` (or the left end when `E` lies below the potential there).
    pub x_tp1: f64,
    /// `V = E + 1/(4 eps)`: beyond it the four rates form a complex quartet.
    pub x_tp2: f64,
    pub launch: f64,
    /// Real part of the slow decay rate at the launch point.
    pub slow_rate: f64,
    /// Probe points for classification, increasing.
    pub probes: Vec<f64>,
    /// Right end of the region carrying the states.
    pub tail_end: f64,
}

/// Real part of the slower decaying rate where `V - E = b`.
pub fn slow_decay_rate(epsilon: f64, b: f64) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    let disc = Complex64::new(1.0 - 4.0 * epsilon * b, 0.0).sqrt();
    let mu_sq = Complex64::new(2.0 * b, 0.0) / (disc + 1.0);
    mu_sq.sqrt().re
}

fn rightmost(pot: &ScaledPotential, level: f64, start: f64) -> f64 {
    pot.crossings(level, start, f64::INFINITY).last().copied().unwrap_or(start).max(start)
}

pub fn far_field_geometry(potential: &ScaledPotential, epsilon: f64, energy: f64, start: f64) -> Result<FarField> {
    match potential {
        ScaledPotential::Linear { slope } if *slope > 0.0 => {}
        ScaledPotential::Quadratic { coef } if *coef > 0.0 => {}
        _ => return Err(Error::Precondition("far-field construction needs a confining linear or quadratic potential".into())),
    }
    let a2 = 0.25 / epsilon;
    let x_tp1 = rightmost(potential, energy, start);
    let x_tp2 = rightmost(potential, energy + a2, start);
    let rate = |x: f64| slow_decay_rate(epsilon, potential.value(x) - energy);
    let mut x = x_tp1;
    let mut acc = 0.0;
    let mut r_prev = rate(x);
    let mut steps = 0usize;
    while acc < LAUNCH_DECAY {
        let r = rate(x + MARCH_STEP);
        acc += 0.5 * (r + r_prev) * MARCH_STEP;
        r_prev = r;
        x += MARCH_STEP;
        steps += 1;
        if steps > 10_000_000 {
            return Err(Error::Precondition("launch point search did not terminate".into()));
        }
    }
    let before = x + PROBE_DECAY / rate(x) < x_tp2 - LAUNCH_MARGIN;
    let launch = if before { x } else { x.max(x_tp2 + LAUNCH_MARGIN) };
    let slow_rate = rate(launch);
    let mut span = PROBE_DECAY / slow_rate;
    if before {
        span = span.min(x_tp2 - LAUNCH_MARGIN - launch);
    }
    let probes = (0..9).map(|i| launch + span * i as f64 / 8.0).collect();
    Ok(FarField { x_tp1, x_tp2, launch, slow_rate, probes, tail_end: launch + TAIL_DECAY / slow_rate })
}

#[derive(Debug, Clone, Copy)]
pub struct FamilyOptions {
    pub tol: Tolerance,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions { tol: Tolerance::default() }
    }
}

#[derive(Debug)]
pub struct DecayingFamily {
    pub far: FarField,
    pub start: f64,
    params: WkbParameters,
    sweep: FrameSweep,
    /// Frame coordinates of each function at every checkpoint.
    coords: [Vec<Vec<f64>>; 2],
    /// Weights on `(Re w2, Im w2, Re w4, Im w4)` beyond the launch point.
    tail_weights: [[f64; 4]; 2],
    tails: [Arc<WkbFunction>; 2],
}

/// Frame sweep segment cap, keeping dense re-integration short.
const MAX_SEGMENT: f64 = 0.25;

impl DecayingFamily {
    pub fn build(potential: &ScaledPotential, epsilon: f64, energy: f64, start: f64, opts: FamilyOptions) -> Result<Arc<Self>> {
        let far = far_field_geometry(potential, epsilon, energy, start)?;
        let params = WkbParameters::new(epsilon, energy, potential.clone(), far.launch)?;
        let within = Interval::new(start, f64::INFINITY);
        let make = |j: usize| -> Result<Arc<WkbFunction>> {
            let v = params.validity_component(j, within)?;
            Ok(Arc::new(WkbFunction::new(params.clone(), j, v)?))
        };
        let tails = [make(2)?, make(4)?];
        let j2 = tails[0].jet::<4>(far.launch)?;
        let j4 = tails[1].jet::<4>(far.launch)?;
        let sys = Companion::new(potential, epsilon, energy, 1);
        // columns Re w2, Im w2, Re w4, Im w4 in stored components
        let mut cols = nalgebra::DMatrix::<f64>::zeros(4, 4);
        for (c, part) in [j2.map(|z| z.re), j2.map(|z| z.im), j4.map(|z| z.re), j4.map(|z| z.im)].iter().enumerate() {
            let mut s = [0.0; 4];
            sys.to_scaled(part, &mut s);
            for r in 0..4 {
                cols[(r, c)] = s[r];
            }
        }
        let svd = cols.clone().svd(true, true);
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let (s1, s2) = (svd.singular_values[order[0]], svd.singular_values[order[1]]);
        if !(s2 > 1e-8 * s1) {
            return Err(Error::DegenerateBasis);
        }
        let v_t = svd.v_t.as_ref().expect("requested");
        // T = V2 Sigma2^-1, so that cols * T has orthonormal columns
        let mut mix = [[0.0; 4]; 2];
        for (i, &o) in order[..2].iter().enumerate() {
            for p in 0..4 {
                mix[i][p] = v_t[(o, p)] / svd.singular_values[o];
            }
        }
        let mut initial = vec![0.0; 8];
        for i in 0..2 {
            let mut phys = [0.0; 4];
            for k in 0..4 {
                let comb = [j2[k].re, j2[k].im, j4[k].re, j4[k].im];
                phys[k] = (0..4).map(|p| comb[p] * mix[i][p]).sum();
            }
            initial[i * 4..(i + 1) * 4].copy_from_slice(&phys);
        }
        let sweep = FrameSweep::run(
            potential,
            epsilon,
            energy,
            far.launch,
            start,
            &initial,
            2,
            SweepOptions { tol: opts.tol, growth: 1e2, max_segment: MAX_SEGMENT },
        )?;
        let last = sweep.last_index();
        let mut coords: [Vec<Vec<f64>>; 2] = [vec![vec![]; last + 1], vec![vec![]; last + 1]];
        let mut tail_weights = [[0.0; 4]; 2];
        for i in 0..2 {
            let mut c = vec![0.0; 2];
            c[i] = 1.0;
            coords[i][last] = c.clone();
            for k in (0..last).rev() {
                c = solve_upper(&sweep.rs[k + 1], 2, &c);
                coords[i][k] = c.clone();
            }
            // physical launch data = initial * R0^-1 c0
            let w = solve_upper(&sweep.rs[0], 2, &c);
            for p in 0..4 {
                tail_weights[i][p] = w[0] * mix[0][p] + w[1] * mix[1][p];
            }
        }
        Ok(Arc::new(DecayingFamily { far, start, params, sweep, coords, tail_weights, tails }))
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon
    }

    /// Orthonormal frame of the decaying pair at the left end, in stored
    /// components (column-major `4 x 2`), and the component scale.
    pub fn start_frame(&self) -> (Vec<f64>, f64) {
        (self.sweep.qs[self.sweep.last_index()].clone(), self.sweep.scale)
    }

    fn jet<const N: usize>(&self, which: usize, x: f64) -> Result<[Complex64; N]> {
        if x < self.start {
            return Err(Error::OutsideValidity(x));
        }
        if x <= self.far.launch {
            let k = self.sweep.segment_of(x)?;
            let d = self.sweep.state_from(k, &self.coords[which][k], x)?;
            let d = [d[0], d[1], d[2], d[3]].map(|v| Complex64::new(v, 0.0));
            return Ok(extend_by_equation::<N>(d, &self.params.potential, self.params.energy, self.params.epsilon, x));
        }
        let a = self.tails[0].jet::<N>(x)?;
        let b = self.tails[1].jet::<N>(x)?;
        let w = &self.tail_weights[which];
        let mut out = [Complex64::new(0.0, 0.0); N];
        for k in 0..N {
            out[k] = Complex64::new(w[0] * a[k].re + w[1] * a[k].im + w[2] * b[k].re + w[3] * b[k].im, 0.0);
        }
        Ok(out)
    }

    /// Decaying pair `(w2, w4)`, continued down to the left end.
    pub fn decaying_functions(self: &Arc<Self>) -> [BasisFunction; 2] {
        let validity = Interval::new(self.start, f64::INFINITY);
        [0usize, 1].map(|which| {
            let mut f = BasisFunction {
                index: 2 * which + 2,
                evaluator: Evaluator::Continued(ContinuedFunction { family: Arc::clone(self), which }),
                class_plus: AsymptoticClass::Undefined,
                class_minus: AsymptoticClass::Undefined,
                validity,
                method: Method::Continued,
            };
            f.class_plus = classify_asymptotics(&f, Side::PlusInfinity, &self.far.probes).unwrap_or(AsymptoticClass::Undefined);
            f
        })
    }

    /// Growing pair `(w1, w3)` as plain WKB solutions on their validity
    /// components around the launch point.
    pub fn growing_functions(&self) -> Result<[BasisFunction; 2]> {
        let within = Interval::new(self.start, f64::INFINITY);
        let mut out = vec![];
        for j in [1, 3] {
            let v = self.params.validity_component(j, within)?;
            let w = WkbFunction::new(self.params.clone(), j, v)?;
            let mut f = BasisFunction {
                index: j,
                evaluator: Evaluator::Wkb(Arc::new(w)),
                class_plus: AsymptoticClass::Undefined,
                class_minus: AsymptoticClass::Undefined,
                validity: v,
                method: Method::Wkb,
            };
            f.class_plus = classify_asymptotics(&f, Side::PlusInfinity, &self.far.probes)?;
            out.push(f);
        }
        let b = out.pop().expect("two entries");
        let a = out.pop().expect("two entries");
        Ok([a, b])
    }
}

/// One of the two continued decaying solutions.
#[derive(Debug, Clone)]
pub struct ContinuedFunction {
    pub family: Arc<DecayingFamily>,
    pub which: usize,
}

impl ContinuedFunction {
    pub fn jet<const N: usize>(&self, x: f64) -> Result<[Complex64; N]> {
        self.family.jet::<N>(self.which, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(f: &BasisFunction, eps: f64, pot: &ScaledPotential, e: f64, x: f64) -> f64 {
        let j = f.jet::<5>(x).unwrap();
        let terms = [j[4] * eps, -j[2], j[0] * (pot.value(x) - e)];
        let s: Complex64 = terms.iter().sum();
        s.norm() / terms.iter().map(|t| t.norm()).sum::<f64>()
    }

    #[test]
    fn geometry_for_linear_ramp() {
        let pot = ScaledPotential::Linear { slope: 1.0 };
        let g = far_field_geometry(&pot, 0.1, 3.0, 0.0).unwrap();
        assert!((g.x_tp1 - 3.0).abs() < 1e-12);
        assert!((g.x_tp2 - 5.5).abs() < 1e-12);
        assert!(g.launch >= g.x_tp2 + LAUNCH_MARGIN);
        assert!(g.tail_end > g.launch);
    }

    #[test]
    fn continued_pair_decays_and_solves() {
        let pot = ScaledPotential::Linear { slope: 1.0 };
        let (eps, e) = (0.1, 3.0);
        let fam = DecayingFamily::build(&pot, eps, e, 0.0, FamilyOptions::default()).unwrap();
        let [a, b] = fam.decaying_functions();
        assert_eq!(a.class_plus, AsymptoticClass::Decaying);
        assert_eq!(b.class_plus, AsymptoticClass::Decaying);
        for x in [0.0, 1.3, 4.0, fam.far.launch - 0.01] {
            assert!(residual(&a, eps, &pot, e, x) < 1e-8);
            assert!(residual(&b, eps, &pot, e, x) < 1e-8);
        }
        let [g1, g3] = fam.growing_functions().unwrap();
        assert_eq!(g1.class_plus, AsymptoticClass::Growing);
        assert_eq!(g3.class_plus, AsymptoticClass::Growing);
    }

    #[test]
    fn continuation_is_smooth_at_launch() {
        let pot = ScaledPotential::Quadratic { coef: 1.0 };
        let fam = DecayingFamily::build(&pot, 0.05, 2.0, 0.0, FamilyOptions::default()).unwrap();
        let [a, _] = fam.decaying_functions();
        let xl = fam.far.launch;
        let l = a.derivs(xl).unwrap();
        let r = a.derivs(xl + 1e-9).unwrap();
        for k in 0..4 {
            assert!((l[k] - r[k]).norm() <= 1e-5 * l[k].norm().max(1e-12), "k {k}: {} {}", l[k], r[k]);
        }
    }
}

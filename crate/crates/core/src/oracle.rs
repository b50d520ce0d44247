//! Independent checks by direct integration of the companion system.

pub use crate::trajectory::{integrate, StateVector, Trajectory, BLOW_UP};

use crate::basis::{slow_decay_rate, DecayingFamily, FamilyOptions, Side};
use crate::error::{Error, Result};
use crate::frame::{det, FrameSweep, SweepOptions};
use crate::ode::{Dop853, System, Tolerance};
use crate::problem::{DimensionlessProblem, PhysicalSetup, PotentialKind, PotentialSpec, ScaledPotential};
use crate::system::{default_scale, order};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

/// Plain Wronskian: determinant of the stacked states of `n` trajectories
/// (`n` = order of the equation) at `x`.
pub fn wronskian_of(trajectories: &[Trajectory], x: f64) -> Result<Complex64> {
    let n = match trajectories.len() {
        4 | 2 => trajectories.len(),
        k => return Err(Error::Arity { expected: 4, found: k }),
    };
    let states: Vec<StateVector> = trajectories.iter().map(|t| t.eval(x)).collect::<Result<_>>()?;
    let m = DMatrix::from_fn(n, n, |r, c| states[c].0[r]);
    Ok(m.determinant())
}

/// Wronskian of the canonical fundamental system anchored at `anchor`,
/// carried by an orthonormalized sweep so that no column overflows.
#[derive(Debug, Clone)]
pub struct WronskianProfile {
    sweep: FrameSweep,
    /// `ln` of the factor between stored and physical determinants.
    log_scale: f64,
}

impl WronskianProfile {
    pub fn new(problem: &DimensionlessProblem, energy: f64, anchor: f64, to: f64, tol: Tolerance) -> Result<Self> {
        tol.validate()?;
        for x in [anchor, to] {
            if !problem.domain.contains(x) || !x.is_finite() {
                return Err(Error::Domain { x, lo: problem.domain.lo, hi: problem.domain.hi });
            }
        }
        let n = order(problem.epsilon);
        let id: Vec<f64> = (0..n * n).map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }).collect();
        let opts = SweepOptions { tol, growth: 1e2, max_segment: f64::INFINITY };
        let sweep = FrameSweep::run(&problem.potential, problem.epsilon, energy, anchor, to, &id, n, opts)?;
        let s = default_scale(problem.epsilon);
        let log_scale = (0..n).map(|k| k as f64 * s.ln()).sum();
        Ok(WronskianProfile { sweep, log_scale })
    }

    /// `(sign, ln|W(x)|)`.
    pub fn log_at(&self, x: f64) -> Result<(f64, f64)> {
        let (sign, ln) = self.sweep.determinant_at(x)?;
        Ok((sign, ln + self.log_scale))
    }

    pub fn at(&self, x: f64) -> Result<Complex64> {
        let (sign, ln) = self.log_at(x)?;
        Ok(Complex64::new(sign * ln.exp(), 0.0))
    }

    pub fn checkpoints(&self) -> &[f64] {
        &self.sweep.xs
    }
}

/// Wronskian at `x` of the fundamental system that is the identity at `anchor`.
pub fn wronskian(problem: &DimensionlessProblem, energy: f64, anchor: f64, x: f64) -> Result<Complex64> {
    WronskianProfile::new(problem, energy, anchor, x, Tolerance::default())?.at(x)
}

/// Largest relative residual of the equation over `grid`. The evaluator
/// returns derivatives up to order 4.
pub fn residual<F>(eval: F, problem: &DimensionlessProblem, energy: f64, grid: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> Result<[Complex64; 5]>,
{
    let mut worst = 0.0f64;
    for &x in grid {
        let d = eval(x)?;
        let q = problem.potential.value(x) - energy;
        let terms = [d[4] * problem.epsilon, -d[2], d[0] * q];
        let num: Complex64 = terms.iter().sum();
        let den: f64 = terms.iter().map(|t| t.norm()).sum::<f64>() + 1e-300;
        worst = worst.max(num.norm() / den);
    }
    Ok(worst)
}

/// Slow rate used to measure distance into the forbidden region.
fn forbidden_rate(epsilon: f64, b: f64) -> f64 {
    if epsilon > 0.0 {
        slow_decay_rate(epsilon, b)
    } else {
        b.max(0.0).sqrt()
    }
}

/// Dimension of the subspace of solutions that decay toward `side`.
///
/// The canonical system is carried from the last classically allowed
/// point toward the far field with re-orthonormalization; the column log
/// growth sums are ordered exponents, and the decaying dimension is the
/// number of negative ones.
pub fn decaying_subspace_dimension(problem: &DimensionlessProblem, energy: f64, side: Side) -> Result<usize> {
    let dir = match side {
        Side::PlusInfinity => 1.0,
        Side::MinusInfinity => -1.0,
    };
    let open = match side {
        Side::PlusInfinity => problem.domain.hi.is_infinite() && !problem.wall_hi,
        Side::MinusInfinity => problem.domain.lo.is_infinite() && !problem.wall_lo,
    };
    let rising = match &problem.potential {
        ScaledPotential::Linear { slope } => slope * dir > 0.0,
        ScaledPotential::Quadratic { coef } => *coef > 0.0,
        _ => false,
    };
    if !open || !rising {
        return Err(Error::Precondition("no forbidden far field toward this side".into()));
    }
    let pot = &problem.potential;
    let eps = problem.epsilon;
    let anchor_lo = if dir > 0.0 { problem.domain.lo.max(0.0) } else { problem.domain.hi.min(0.0) };
    let crossings = pot.crossings(energy, -1e300, 1e300);
    let turning = if dir > 0.0 { crossings.last().copied() } else { crossings.first().copied() };
    let start = match turning {
        Some(t) if (t - anchor_lo) * dir > 0.0 => t,
        _ => anchor_lo,
    };
    let step = 0.01;
    let mut x = start;
    let mut acc = 0.0;
    let mut steps = 0usize;
    while acc < 25.0 || pot.value(x) - energy < 25.0 {
        x += dir * step;
        acc += forbidden_rate(eps, pot.value(x) - energy) * step;
        steps += 1;
        if steps > 10_000_000 {
            return Err(Error::Precondition("far field not reached".into()));
        }
    }
    let n = order(eps);
    let id: Vec<f64> = (0..n * n).map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }).collect();
    let sweep = FrameSweep::run(pot, eps, energy, start, x, &id, n, SweepOptions::default())?;
    let gap = sweep.log_growth.iter().map(|g| g.abs()).fold(f64::INFINITY, f64::min);
    if gap < 1.0 {
        return Err(Error::Precondition("exponents not separated; far field too close".into()));
    }
    Ok(sweep.log_growth.iter().filter(|&&g| g < 0.0).count())
}

/// Two-sided mismatch for an even confining potential: the determinant of
/// the normalized decaying data from the right and its mirror image at
/// `x = 0`. It vanishes exactly when a solution decays on both sides.
pub fn two_sided_mismatch(problem: &DimensionlessProblem, energy: f64) -> Result<f64> {
    if problem.kind != PotentialKind::Harmonic {
        return Err(Error::PotentialKind { expected: "harmonic".into(), found: problem.kind.to_string() });
    }
    if problem.is_standard() {
        let (psi, dpsi) = standard_decaying_at_origin(&problem.potential, energy)?;
        return Ok(-2.0 * psi * dpsi / (psi * psi + dpsi * dpsi));
    }
    let fam = DecayingFamily::build(&problem.potential, problem.epsilon, energy, 0.0, FamilyOptions::default())?;
    let (q, _) = fam.start_frame();
    let mut m = vec![0.0; 16];
    m[..8].copy_from_slice(&q);
    for c in 0..2 {
        for k in 0..4 {
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            m[8 + c * 4 + k] = sign * q[c * 4 + k];
        }
    }
    Ok(det(&m, 4))
}

/// `(psi(0), psi'(0))` of the standard-equation solution decaying to the
/// right, normalized to unit Euclidean length.
pub fn standard_decaying_at_origin(potential: &ScaledPotential, energy: f64) -> Result<(f64, f64)> {
    let x = far_point(potential, energy, 0.0);
    let t = potential.taylor(x);
    let q = t[0] - energy;
    // first-order WKB log-derivative of the decaying solution
    let slope = -q.sqrt() - t[1] / (4.0 * q);
    let init = StateVector::real([1.0, slope, 0.0, 0.0]);
    let traj = Trajectory::run(potential, 0.0, energy, init, x, 0.0, Tolerance::default())?;
    if traj.blow_up.is_some() {
        return Err(Error::Integration("decaying solution overflowed".into()));
    }
    let s = traj.eval(0.0)?;
    let (a, b) = (s.0[0].re, s.0[1].re);
    let n = a.hypot(b);
    Ok((a / n, b / n))
}

/// Standard-equation solution satisfying the left (or only) boundary
/// condition of the problem: from the lower wall for bounded domains, or
/// decaying from the right for confining potentials on a half or full line.
#[derive(Debug, Clone)]
pub struct StandardShot {
    pub trajectory: Trajectory,
    /// Region over which the solution carries its weight.
    pub lo: f64,
    pub hi: f64,
    /// Even extension to `x < 0` is implied (harmonic).
    pub mirrored: bool,
}

fn far_point(potential: &ScaledPotential, energy: f64, from: f64) -> f64 {
    let crossings = potential.crossings(energy, from, 1e300);
    let mut x = crossings.last().copied().unwrap_or(from).max(from);
    let mut acc = 0.0;
    while acc < 30.0 {
        x += 0.01;
        acc += (potential.value(x) - energy).max(0.0).sqrt() * 0.01;
    }
    x
}

pub fn standard_shot(problem: &DimensionlessProblem, energy: f64) -> Result<StandardShot> {
    let pot = &problem.potential;
    let tol = Tolerance::default();
    match problem.kind {
        PotentialKind::Well | PotentialKind::Custom => {
            let (lo, hi) = (problem.domain.lo, problem.domain.hi);
            let t = Trajectory::run(pot, 0.0, energy, StateVector::real([0.0, 1.0, 0.0, 0.0]), lo, hi, tol)?;
            Ok(StandardShot { trajectory: t, lo, hi, mirrored: false })
        }
        PotentialKind::Linear | PotentialKind::Harmonic => {
            let x = far_point(pot, energy, 0.0);
            let t = pot.taylor(x);
            let q = t[0] - energy;
            let slope = -q.sqrt() - t[1] / (4.0 * q);
            let traj = Trajectory::run(pot, 0.0, energy, StateVector::real([1.0, slope, 0.0, 0.0]), x, 0.0, tol)?;
            if traj.blow_up.is_some() {
                return Err(Error::Integration("decaying solution overflowed".into()));
            }
            Ok(StandardShot { trajectory: traj, lo: 0.0, hi: x, mirrored: problem.kind == PotentialKind::Harmonic })
        }
    }
}

/// Normalized boundary mismatch of the standard equation; its zeros are the
/// standard levels. Wall problems: `psi` at the far wall. Linear: `psi(0)`.
/// Harmonic: the two-sided mismatch.
pub fn standard_mismatch(problem: &DimensionlessProblem, energy: f64) -> Result<f64> {
    let shot = standard_shot(problem, energy)?;
    match problem.kind {
        PotentialKind::Harmonic => {
            let s = shot.trajectory.eval(0.0)?;
            let (a, b) = (s.0[0].re, s.0[1].re);
            Ok(-2.0 * a * b / (a * a + b * b))
        }
        PotentialKind::Linear => {
            let s = shot.trajectory.eval(0.0)?;
            Ok(s.0[0].re / s.0[0].re.hypot(s.0[1].re))
        }
        _ => {
            let s = shot.trajectory.eval(shot.hi)?;
            Ok(s.0[0].re / s.0[0].re.hypot(s.0[1].re))
        }
    }
}

/// Closed-form solution of the momentum-space equation for the linear
/// potential, `i hbar l (1 + beta p^2) C' + (p^2/(2m) - E) C = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct MomentumSolution {
    pub c0: Complex64,
    pub mass: f64,
    pub beta: f64,
    pub hbar: f64,
    pub slope: f64,
    pub energy: f64,
    pub dimension: usize,
}

pub fn momentum_rep_linear(setup: &PhysicalSetup, energy: f64) -> Result<MomentumSolution> {
    let slope = match setup.potential() {
        PotentialSpec::Linear { slope } => *slope,
        other => {
            return Err(Error::PotentialKind { expected: "linear".into(), found: other.kind().to_string() })
        }
    };
    if !energy.is_finite() {
        return Err(Error::Precondition("energy must be finite".into()));
    }
    Ok(MomentumSolution {
        c0: Complex64::new(1.0, 0.0),
        mass: setup.mass(),
        beta: setup.beta(),
        hbar: setup.hbar(),
        slope,
        energy,
        dimension: 1,
    })
}

impl MomentumSolution {
    /// Natural momentum scale.
    pub fn momentum_scale(&self) -> f64 {
        if self.beta > 0.0 {
            1.0 / self.beta.sqrt()
        } else {
            (2.0 * self.mass * self.energy.abs()).sqrt().max((self.mass * self.hbar * self.slope).cbrt())
        }
    }

    /// Antiderivative `g(p)` of `(p^2/(2m) - E)/(1 + beta p^2)` with `g(0) = 0`.
    pub fn g(&self, p: f64) -> f64 {
        let (m, e) = (self.mass, self.energy);
        if self.beta == 0.0 {
            return p * p * p / (6.0 * m) - e * p;
        }
        let sb = self.beta.sqrt();
        let q = sb * p;
        // q - atan(q), by series where it cancels
        let q_minus_atan = if q.abs() < 0.1 {
            let q2 = q * q;
            let mut term = q * q2;
            let mut sum = 0.0;
            for k in 1..12 {
                let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                sum += sign * term / (2 * k + 1) as f64;
                term *= q2;
            }
            sum
        } else {
            q - q.atan()
        };
        q_minus_atan / (2.0 * m * self.beta * sb) - e * q.atan() / sb
    }

    pub fn phase(&self, p: f64) -> f64 {
        self.g(p) / (self.hbar * self.slope)
    }

    pub fn eval(&self, p: f64) -> Complex64 {
        self.c0 * Complex64::new(0.0, self.phase(p)).exp()
    }

    /// Derivative of the phase by Richardson-extrapolated central differences.
    fn phase_derivative_fd(&self, p: f64) -> f64 {
        let h0 = 1e-2 * self.momentum_scale().max(p.abs());
        let d = |h: f64| (self.phase(p + h) - self.phase(p - h)) / (2.0 * h);
        let r1 = |h: f64| (4.0 * d(h / 2.0) - d(h)) / 3.0;
        (16.0 * r1(h0 / 2.0) - r1(h0)) / 15.0
    }

    /// Relative residual of the first-order equation at `p`, with `C'`
    /// taken from a finite-difference derivative of the closed-form phase.
    pub fn residual(&self, p: f64) -> f64 {
        let c = self.eval(p);
        let dc = Complex64::new(0.0, self.phase_derivative_fd(p)) * c;
        let lead = Complex64::new(0.0, self.hbar * self.slope * (1.0 + self.beta * p * p)) * dc;
        let kin = c * (p * p / (2.0 * self.mass));
        let pot = c * self.energy;
        (lead + kin - pot).norm() / (lead.norm() + kin.norm() + pot.norm() + 1e-300)
    }

    /// Numerical rank of two independently integrated solutions sampled
    /// on `[p_lo, p_hi]`.
    pub fn solution_space_dimension(&self, p_lo: f64, p_hi: f64) -> Result<usize> {
        struct Eq<'a>(&'a MomentumSolution, f64);
        impl System for Eq<'_> {
            fn dim(&self) -> usize {
                4
            }
            fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
                let s = self.0;
                let p = t * self.1;
                let w = (p * p / (2.0 * s.mass) - s.energy) / (s.hbar * s.slope * (1.0 + s.beta * p * p)) * self.1;
                for k in 0..2 {
                    // C' = i w C
                    dy[2 * k] = -w * y[2 * k + 1];
                    dy[2 * k + 1] = w * y[2 * k];
                }
            }
        }
        let ps = self.momentum_scale();
        let sys = Eq(self, ps);
        let (t0, t1) = (p_lo / ps, p_hi / ps);
        let samples = 16;
        let mut rows = vec![];
        let mut y = vec![1.0, 0.0, 0.3, -0.7];
        let mut t = t0;
        for i in 0..samples {
            let target = t0 + (t1 - t0) * i as f64 / (samples - 1) as f64;
            if target != t {
                let run = Dop853::new(Tolerance::default()).integrate(&sys, t, &y, target, |_, _| true)?;
                y = run.last().1.to_vec();
                t = target;
            }
            rows.push([Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])]);
        }
        let m = DMatrix::from_fn(samples, 2, |r, c| rows[r][c]);
        let sv = m.singular_values();
        let smax = sv.iter().copied().fold(0.0, f64::max);
        Ok(sv.iter().filter(|&&s| s > 1e-8 * smax).count())
    }
}

//! Integrated solutions with dense evaluation.

use crate::error::{Error, Result};
use crate::ode::{Dop853, Termination, Tolerance};
use crate::problem::{DimensionlessProblem, ScaledPotential};
use crate::system::{default_scale, order, Companion};
use num_complex::Complex64;
use serde::Serialize;

/// `(phi, phi', phi'', phi''')`. In standard mode the last two entries
/// follow from the equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateVector(pub [Complex64; 4]);

impl StateVector {
    pub fn new(phi: Complex64, d1: Complex64, d2: Complex64, d3: Complex64) -> Self {
        StateVector([phi, d1, d2, d3])
    }

    pub fn real(v: [f64; 4]) -> Self {
        StateVector(v.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn zero() -> Self {
        StateVector::real([0.0; 4])
    }

    pub fn phi(&self) -> Complex64 {
        self.0[0]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Magnitude at which a trajectory is declared blown up.
pub const BLOW_UP: f64 = 1e300;

#[derive(Debug, Clone)]
pub struct Trajectory {
    potential: ScaledPotential,
    epsilon: f64,
    energy: f64,
    scale: f64,
    tol: Tolerance,
    /// Integration start; dense output integrates away from it.
    start: f64,
    forward: bool,
    /// Ascending abscissae of accepted steps.
    pub grid: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Stored (scaled) real/imaginary components for re-integration.
    stored: Vec<Vec<f64>>,
    /// Last valid abscissa if the run was stopped by overflow.
    pub blow_up: Option<f64>,
    pub reported_tolerance: f64,
}

/// Integrate the companion system from `from` to `to` with complex initial data.
pub fn integrate(
    problem: &DimensionlessProblem,
    energy: f64,
    initial: StateVector,
    from: f64,
    to: f64,
    tol: Tolerance,
) -> Result<Trajectory> {
    tol.validate()?;
    for x in [from, to] {
        if !problem.domain.contains(x) {
            return Err(Error::Domain { x, lo: problem.domain.lo, hi: problem.domain.hi });
        }
    }
    if !initial.is_finite() {
        return Err(Error::Precondition("initial state is not finite".into()));
    }
    Trajectory::run(&problem.potential, problem.epsilon, energy, initial, from, to, tol)
}

impl Trajectory {
    pub fn run(
        potential: &ScaledPotential,
        epsilon: f64,
        energy: f64,
        initial: StateVector,
        from: f64,
        to: f64,
        tol: Tolerance,
    ) -> Result<Self> {
        let n = order(epsilon);
        let scale = default_scale(epsilon);
        let sys = Companion { potential, epsilon, energy, scale, cols: 2 };
        let mut y0 = vec![0.0; 2 * n];
        let re: Vec<f64> = initial.0[..n].iter().map(|z| z.re).collect();
        let im: Vec<f64> = initial.0[..n].iter().map(|z| z.im).collect();
        sys.to_scaled(&re, &mut y0[..n]);
        sys.to_scaled(&im, &mut y0[n..]);
        let bound = BLOW_UP / scale.powi(n as i32);
        let run = Dop853::new(tol).integrate(&sys, from, &y0, to, |_, y| y.iter().all(|v| v.abs() < bound))?;
        let mut traj = Trajectory {
            potential: potential.clone(),
            epsilon,
            energy,
            scale,
            tol,
            start: from,
            forward: to >= from,
            grid: Vec::with_capacity(run.xs.len()),
            states: Vec::with_capacity(run.xs.len()),
            stored: Vec::with_capacity(run.xs.len()),
            blow_up: None,
            reported_tolerance: tol.rtol,
        };
        if let Termination::Stopped(_) = run.termination {
            // the last accepted state exceeded the bound; keep the one before
            let keep = run.xs.len() - 1;
            traj.blow_up = Some(run.xs[keep - 1]);
            traj.fill(&run.xs[..keep], &run.ys[..keep]);
        } else {
            traj.fill(&run.xs, &run.ys);
        }
        Ok(traj)
    }

    fn fill(&mut self, xs: &[f64], ys: &[Vec<f64>]) {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        if !self.forward {
            idx.reverse();
        }
        for i in idx {
            self.grid.push(xs[i]);
            self.states.push(self.unpack(xs[i], &ys[i]));
            self.stored.push(ys[i].clone());
        }
    }

    fn companion(&self) -> Companion<'_> {
        Companion { potential: &self.potential, epsilon: self.epsilon, energy: self.energy, scale: self.scale, cols: 2 }
    }

    fn unpack(&self, x: f64, y: &[f64]) -> StateVector {
        let sys = self.companion();
        let n = sys.order();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        sys.from_scaled(&y[..n], &mut re);
        sys.from_scaled(&y[n..], &mut im);
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for k in 0..n {
            out[k] = Complex64::new(re[k], im[k]);
        }
        if n == 2 {
            let t = self.potential.taylor(x);
            let q = t[0] - self.energy;
            out[2] = out[0] * q;
            out[3] = out[0] * t[1] + out[1] * q;
        }
        StateVector(out)
    }

    /// Covered range `[lo, hi]`.
    pub fn range(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// Dense output: re-integrates from the nearest stored node on the
    /// start side of `x`, so results do not depend on evaluation order.
    pub fn eval(&self, x: f64) -> Result<StateVector> {
        let (lo, hi) = self.range();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutsideValidity(x));
        }
        let i = match self.grid.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return Ok(self.states[i]),
            Err(i) => i,
        };
        // grid[i-1] < x < grid[i]
        let node = if self.forward { i - 1 } else { i };
        let sys = self.companion();
        let run = Dop853::new(self.tol).integrate(&sys, self.grid[node], &self.stored[node], x, |_, _| true)?;
        Ok(self.unpack(x, run.last().1))
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end_state(&self) -> StateVector {
        if self.forward {
            self.states[self.states.len() - 1]
        } else {
            self.states[0]
        }
    }

    /// CSV dump: `x,re_phi,im_phi,re_d1,im_d1,re_d2,im_d2,re_d3,im_d3`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,re_phi,im_phi,re_d1,im_d1,re_d2,im_d2,re_d3,im_d3\n");
        for (x, st) in self.grid.iter().zip(&self.states) {
            s.push_str(&format!("{x:.16e}"));
            for z in st.0 {
                s.push_str(&format!(",{:.16e},{:.16e}", z.re, z.im));
            }
            s.push('\n');
        }
        s
    }
}

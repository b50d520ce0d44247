//! Orthonormalized continuation of solution subspaces.
//!
//! A set of `m` solutions is carried along as an orthonormal frame `Q_k`
//! at checkpoints `t_k`; between checkpoints the frame is integrated and
//! re-factored as `Q_{k+1} R_{k+1}`. Coordinates of a fixed solution obey
//! `c_{k+1} = R_{k+1} c_k`, so exponentially separated directions never
//! have to be represented in one vector.

use crate::error::{Error, Result};
use crate::ode::{Dop853, Tolerance};
use crate::problem::ScaledPotential;
use crate::system::{default_scale, order, Companion};

/// Modified Gram-Schmidt with one re-orthogonalization pass. `a` is
/// `n x m` column-major; returns `(Q, R)` with `R` upper triangular and a
/// non-negative diagonal.
pub fn qr(a: &[f64], n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut q = a.to_vec();
    let mut r = vec![0.0; m * m];
    for j in 0..m {
        for _pass in 0..2 {
            for i in 0..j {
                let dot: f64 = (0..n).map(|t| q[i * n + t] * q[j * n + t]).sum();
                r[j * m + i] += dot;
                for t in 0..n {
                    q[j * n + t] -= dot * q[i * n + t];
                }
            }
        }
        let norm = (0..n).map(|t| q[j * n + t].powi(2)).sum::<f64>().sqrt();
        r[j * m + j] = norm;
        if norm > 0.0 {
            for t in 0..n {
                q[j * n + t] /= norm;
            }
        }
    }
    (q, r)
}

/// Solve `R x = b` for upper-triangular `R` (column-major `m x m`).
pub fn solve_upper(r: &[f64], m: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..m).rev() {
        let mut acc = x[i];
        for j in i + 1..m {
            acc -= r[j * m + i] * x[j];
        }
        x[i] = acc / r[i * m + i];
    }
    x
}

/// `R b` for upper-triangular `R`.
pub fn mul_upper(r: &[f64], m: usize, b: &[f64]) -> Vec<f64> {
    (0..m).map(|i| (i..m).map(|j| r[j * m + i] * b[j]).sum()).collect()
}

#[derive(Debug, Clone)]
pub struct FrameSweep {
    pub potential: ScaledPotential,
    pub epsilon: f64,
    pub energy: f64,
    pub scale: f64,
    pub tol: Tolerance,
    pub n: usize,
    pub m: usize,
    /// Checkpoints in sweep order; `xs[0]` is the start.
    pub xs: Vec<f64>,
    /// Orthonormal frames (stored components, column-major `n x m`).
    pub qs: Vec<Vec<f64>>,
    /// `rs[0]` factors the initial data; `rs[k]` maps coordinates at
    /// `xs[k-1]` to coordinates at `xs[k]`.
    pub rs: Vec<Vec<f64>>,
    /// Accumulated `ln R_ii` per column over the whole sweep (excluding `rs[0]`).
    pub log_growth: Vec<f64>,
}

/// Options for a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub tol: Tolerance,
    /// Re-orthonormalize once any column norm leaves `[1/g, g]`.
    pub growth: f64,
    /// Longest segment between checkpoints.
    pub max_segment: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { tol: Tolerance::default(), growth: 1e2, max_segment: f64::INFINITY }
    }
}

impl FrameSweep {
    /// Sweep `m` solutions from `x_start` to `x_end`. `initial` holds
    /// physical derivative data (column-major `n x m`).
    pub fn run(
        potential: &ScaledPotential,
        epsilon: f64,
        energy: f64,
        x_start: f64,
        x_end: f64,
        initial: &[f64],
        m: usize,
        opts: SweepOptions,
    ) -> Result<Self> {
        let n = order(epsilon);
        if initial.len() != n * m {
            return Err(Error::Arity { expected: n * m, found: initial.len() });
        }
        let scale = default_scale(epsilon);
        let sys = Companion { potential, epsilon, energy, scale, cols: m };
        let mut stored = vec![0.0; n * m];
        for j in 0..m {
            sys.to_scaled(&initial[j * n..(j + 1) * n], &mut stored[j * n..(j + 1) * n]);
        }
        let (q0, r0) = qr(&stored, n, m);
        for j in 0..m {
            if r0[j * m + j] == 0.0 {
                return Err(Error::Precondition("initial frame is rank deficient".into()));
            }
        }
        let mut sweep = FrameSweep {
            potential: potential.clone(),
            epsilon,
            energy,
            scale,
            tol: opts.tol,
            n,
            m,
            xs: vec![x_start],
            qs: vec![q0],
            rs: vec![r0],
            log_growth: vec![0.0; m],
        };
        let dir = (x_end - x_start).signum();
        let integrator = Dop853::new(opts.tol);
        let g = opts.growth;
        let mut x = x_start;
        while (x_end - x) * dir > 0.0 {
            let target = if (x_end - x).abs() > opts.max_segment { x + dir * opts.max_segment } else { x_end };
            let q = sweep.qs.last().unwrap().clone();
            let run = integrator.integrate(&sys, x, &q, target, |_, y| {
                y.chunks_exact(n).all(|c| {
                    let nrm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                    nrm < g && nrm > 1.0 / g
                })
            })?;
            let (xe, ye) = run.last();
            if xe == x {
                return Err(Error::Integration(format!("frame sweep stalled at x = {x}")));
            }
            let (qn, rn) = qr(ye, n, m);
            for j in 0..m {
                let d = rn[j * m + j];
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::Integration(format!("frame collapsed at x = {xe}")));
                }
                sweep.log_growth[j] += d.ln();
            }
            sweep.xs.push(xe);
            sweep.qs.push(qn);
            sweep.rs.push(rn);
            x = xe;
        }
        Ok(sweep)
    }

    pub fn companion(&self, cols: usize) -> Companion<'_> {
        Companion { potential: &self.potential, epsilon: self.epsilon, energy: self.energy, scale: self.scale, cols }
    }

    pub fn last_index(&self) -> usize {
        self.xs.len() - 1
    }

    /// Checkpoint index `k` such that `x` lies between `xs[k]` and `xs[k+1]`.
    pub fn segment_of(&self, x: f64) -> Result<usize> {
        let dir = (self.xs[self.last_index()] - self.xs[0]).signum();
        let s0 = self.xs[0];
        let s1 = self.xs[self.last_index()];
        let inside = if dir >= 0.0 { x >= s0 && x <= s1 } else { x <= s0 && x >= s1 };
        if !inside {
            return Err(Error::OutsideValidity(x));
        }
        for k in 0..self.last_index() {
            let (a, b) = (self.xs[k], self.xs[k + 1]);
            if (x - a) * dir >= 0.0 && (b - x) * dir >= 0.0 {
                return Ok(k);
            }
        }
        Ok(self.last_index())
    }

    /// Move coordinates from checkpoint `k` to checkpoint `j < k`
    /// (toward the start; stable for subspaces that grow in sweep direction).
    pub fn coords_toward_start(&self, k: usize, c: &[f64], j: usize) -> Vec<f64> {
        let mut c = c.to_vec();
        for i in (j + 1..=k).rev() {
            c = solve_upper(&self.rs[i], self.m, &c);
        }
        c
    }

    /// Physical derivatives at `x` of the solution whose frame coordinates
    /// at checkpoint `k` are `c` (`x` must lie in segment `k`).
    pub fn state_from(&self, k: usize, c: &[f64], x: f64) -> Result<Vec<f64>> {
        let n = self.n;
        let q = &self.qs[k];
        let mut y0 = vec![0.0; n];
        for (j, cj) in c.iter().enumerate() {
            for t in 0..n {
                y0[t] += q[j * n + t] * cj;
            }
        }
        let sys = self.companion(1);
        let yx = if x == self.xs[k] {
            y0
        } else {
            let run = Dop853::new(self.tol).integrate(&sys, self.xs[k], &y0, x, |_, _| true)?;
            run.last().1.to_vec()
        };
        let mut out = vec![0.0; n];
        sys.from_scaled(&yx, &mut out);
        Ok(out)
    }

    /// Frame at an arbitrary point of the sweep together with the
    /// accumulated `sum ln R_ii` from the start (initial factor excluded).
    pub fn frame_at(&self, x: f64) -> Result<(Vec<f64>, f64)> {
        let k = self.segment_of(x)?;
        let n = self.n;
        let m = self.m;
        let mut log_det = 0.0;
        for r in &self.rs[1..=k] {
            for j in 0..m {
                log_det += r[j * m + j].ln();
            }
        }
        let mut z = self.qs[k].clone();
        if x != self.xs[k] {
            let sys = self.companion(m);
            let run = Dop853::new(self.tol).integrate(&sys, self.xs[k], &z, x, |_, _| true)?;
            z = run.last().1.to_vec();
        }
        let (qx, rx) = qr(&z, n, m);
        for j in 0..m {
            log_det += rx[j * m + j].ln();
        }
        Ok((qx, log_det))
    }

    /// `(sign, ln|det|)` of the stored-component solution matrix at `x`
    /// (square sweeps only).
    pub fn determinant_at(&self, x: f64) -> Result<(f64, f64)> {
        if self.m != self.n {
            return Err(Error::Arity { expected: self.n, found: self.m });
        }
        let (q, log_det) = self.frame_at(x)?;
        let r0: f64 = (0..self.m).map(|j| self.rs[0][j * self.m + j].ln()).sum();
        Ok((det(&q, self.n).signum(), log_det + r0))
    }
}

/// Determinant of a small dense matrix (column-major) by partial pivoting.
pub fn det(a: &[f64], n: usize) -> f64 {
    let m = nalgebra::DMatrix::from_column_slice(n, n, a);
    m.determinant()
}

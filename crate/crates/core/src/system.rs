//! First-order companion form of the dimensionless equation.
//!
//! With `eps > 0` the state is `(phi, phi', phi'', phi''')` and
//! `phi'''' = ((E - V) phi + phi'') / eps`. With `eps = 0` it is the
//! standard pair `(phi, phi')` with `phi'' = (V - E) phi`.
//!
//! Internally component `k` is stored divided by `s^k`, where `s` is the
//! fastest local rate; this keeps all components comparable in size.

use crate::ode::System;
use crate::problem::ScaledPotential;

#[derive(Debug, Clone)]
pub struct Companion<'a> {
    pub potential: &'a ScaledPotential,
    pub epsilon: f64,
    pub energy: f64,
    pub scale: f64,
    /// Number of independent solution columns integrated together.
    pub cols: usize,
}

impl<'a> Companion<'a> {
    pub fn new(potential: &'a ScaledPotential, epsilon: f64, energy: f64, cols: usize) -> Self {
        Companion { potential, epsilon, energy, scale: default_scale(epsilon), cols }
    }

    /// Order of the scalar equation (4, or 2 in standard mode).
    pub fn order(&self) -> usize {
        order(self.epsilon)
    }

    /// Physical derivatives -> stored components.
    pub fn to_scaled(&self, d: &[f64], out: &mut [f64]) {
        let mut f = 1.0;
        for k in 0..self.order() {
            out[k] = d[k] * f;
            f /= self.scale;
        }
    }

    /// Stored components -> physical derivatives.
    pub fn from_scaled(&self, y: &[f64], out: &mut [f64]) {
        let mut f = 1.0;
        for k in 0..self.order() {
            out[k] = y[k] * f;
            f *= self.scale;
        }
    }
}

pub fn order(epsilon: f64) -> usize {
    if epsilon > 0.0 {
        4
    } else {
        2
    }
}

pub fn default_scale(epsilon: f64) -> f64 {
    if epsilon > 0.0 {
        (1.0 / epsilon.sqrt()).max(1.0)
    } else {
        1.0
    }
}

impl System for Companion<'_> {
    fn dim(&self) -> usize {
        self.order() * self.cols
    }

    fn rhs(&self, x: f64, y: &[f64], dy: &mut [f64]) {
        let q = self.potential.value(x) - self.energy;
        let s = self.scale;
        if self.epsilon > 0.0 {
            let c = 1.0 / (self.epsilon * s * s * s);
            for (yc, dc) in y.chunks_exact(4).zip(dy.chunks_exact_mut(4)) {
                dc[0] = s * yc[1];
                dc[1] = s * yc[2];
                dc[2] = s * yc[3];
                dc[3] = c * (s * s * yc[2] - q * yc[0]);
            }
        } else {
            for (yc, dc) in y.chunks_exact(2).zip(dy.chunks_exact_mut(2)) {
                dc[0] = s * yc[1];
                dc[1] = q * yc[0] / s;
            }
        }
    }
}

//! Fundamental solutions of the dimensionless fourth-order equation.

mod continued;
mod numerical;
mod wkb;

pub use continued::{far_field_geometry, slow_decay_rate, ContinuedFunction, DecayingFamily, FamilyOptions, FarField};
pub use numerical::NumericalFunction;
pub use wkb::{wkb_basis, WkbFunction, WkbParameters, TURNING_WINDOW};

use crate::error::{Error, Result};
use crate::problem::{DimensionlessProblem, Interval, PotentialKind, ScaledPotential};
use crate::taylor::Series;
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

/// Largest exponent accepted before exponentiation.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AsymptoticClass {
    Growing,
    Decaying,
    Oscillatory,
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    PlusInfinity,
    MinusInfinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Exact,
    Wkb,
    /// Decaying solutions launched from WKB data and carried inward by integration.
    Continued,
    /// Canonical solutions of the integrated equation.
    Numerical,
}

/// Slow pair of characteristic roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SlowPair {
    /// `+-i kappa`.
    Oscillatory(f64),
    /// `+-nu`, real.
    Evanescent(f64),
    /// Double root at zero.
    Zero,
}

/// Roots of `eps mu^4 - mu^2 - (E - V) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicRoots {
    pub epsilon: f64,
    pub e_minus_v: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub kappa: f64,
    pub slow: SlowPair,
    pub discriminant: f64,
}

pub fn characteristic_roots(epsilon: f64, e_minus_v: f64) -> Result<CharacteristicRoots> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::UnsupportedEpsilon(epsilon));
    }
    if !e_minus_v.is_finite() {
        return Err(Error::Precondition("E - V must be finite".into()));
    }
    let disc = 1.0 + 4.0 * epsilon * e_minus_v;
    if disc < 0.0 {
        return Err(Error::ComplexQuartet(disc));
    }
    let sq = disc.sqrt();
    let mu1 = ((1.0 + sq) / (2.0 * epsilon)).sqrt();
    // rationalized form avoids cancellation in sqrt(disc) - 1
    let kappa_sq = 2.0 * e_minus_v / (1.0 + sq);
    let slow = if kappa_sq > 0.0 {
        SlowPair::Oscillatory(kappa_sq.sqrt())
    } else if kappa_sq < 0.0 {
        SlowPair::Evanescent((-kappa_sq).sqrt())
    } else {
        SlowPair::Zero
    };
    let kappa = if kappa_sq > 0.0 { kappa_sq.sqrt() } else { 0.0 };
    Ok(CharacteristicRoots { epsilon, e_minus_v, mu1, mu2: -mu1, kappa, slow, discriminant: disc })
}

impl CharacteristicRoots {
    /// `[mu1, -mu1, s, -s]` with `s = i kappa` or the real slow rate.
    pub fn roots(&self) -> [Complex64; 4] {
        let s = match self.slow {
            SlowPair::Oscillatory(k) => Complex64::new(0.0, k),
            SlowPair::Evanescent(nu) => Complex64::new(nu, 0.0),
            SlowPair::Zero => Complex64::new(0.0, 0.0),
        };
        [Complex64::new(self.mu1, 0.0), Complex64::new(-self.mu1, 0.0), s, -s]
    }

    /// Relative residual of the quartic at `mu`.
    pub fn quartic_residual(&self, mu: Complex64) -> f64 {
        let m2 = mu * mu;
        let terms = [m2 * m2 * self.epsilon, -m2, Complex64::new(-self.e_minus_v, 0.0)];
        let sum: Complex64 = terms.iter().sum();
        let scale: f64 = terms.iter().map(|t| t.norm()).sum();
        if scale == 0.0 {
            0.0
        } else {
            sum.norm() / scale
        }
    }
}

#[derive(Debug, Clone)]
pub enum Evaluator {
    /// `exp(rate (x - anchor))`.
    Exp { rate: f64, anchor: f64 },
    /// `cos(k (x - shift))`.
    Cos { k: f64, shift: f64 },
    /// `sin(k (x - shift))`.
    Sin { k: f64, shift: f64 },
    Wkb(Arc<WkbFunction>),
    Continued(ContinuedFunction),
    Numerical(Arc<NumericalFunction>),
    /// Even extension: `f(x)` for `x >= 0`, `f(-x)` for `x < 0`.
    Mirror(Box<BasisFunction>),
}

#[derive(Debug, Clone)]
pub struct BasisFunction {
    /// 1-based position in the fundamental system.
    pub index: usize,
    pub evaluator: Evaluator,
    pub class_plus: AsymptoticClass,
    pub class_minus: AsymptoticClass,
    pub validity: Interval,
    pub method: Method,
}

fn trig_jet<const N: usize>(k: f64, phase: f64, sine: bool) -> [Complex64; N] {
    let mut out = [Complex64::new(0.0, 0.0); N];
    let mut kp = 1.0;
    for (m, v) in out.iter_mut().enumerate() {
        let arg = phase + m as f64 * std::f64::consts::FRAC_PI_2;
        *v = Complex64::new(kp * if sine { arg.sin() } else { arg.cos() }, 0.0);
        kp *= k;
    }
    out
}

impl BasisFunction {
    pub fn class(&self, side: Side) -> AsymptoticClass {
        match side {
            Side::PlusInfinity => self.class_plus,
            Side::MinusInfinity => self.class_minus,
        }
    }

    fn check(&self, x: f64) -> Result<()> {
        if self.validity.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideValidity(x))
        }
    }

    /// Derivatives `f, f', ..., f^(N-1)` at `x`.
    pub fn jet<const N: usize>(&self, x: f64) -> Result<[Complex64; N]> {
        self.check(x)?;
        match &self.evaluator {
            Evaluator::Exp { rate, anchor } => {
                let e = rate * (x - anchor);
                if e > MAX_EXPONENT {
                    return Err(Error::Overflow { x, exponent: e });
                }
                let v = e.exp();
                let mut out = [Complex64::new(0.0, 0.0); N];
                let mut rp = 1.0;
                for o in out.iter_mut() {
                    *o = Complex64::new(rp * v, 0.0);
                    rp *= rate;
                }
                Ok(out)
            }
            Evaluator::Cos { k, shift } => Ok(trig_jet(*k, k * (x - shift), false)),
            Evaluator::Sin { k, shift } => Ok(trig_jet(*k, k * (x - shift), true)),
            Evaluator::Wkb(w) => w.jet::<N>(x),
            Evaluator::Continued(c) => c.jet::<N>(x),
            Evaluator::Numerical(n) => n.jet::<N>(x),
            Evaluator::Mirror(inner) => {
                if x >= 0.0 {
                    inner.jet::<N>(x)
                } else {
                    let mut d = inner.jet::<N>(-x)?;
                    for (k, v) in d.iter_mut().enumerate() {
                        if k % 2 == 1 {
                            *v = -*v;
                        }
                    }
                    Ok(d)
                }
            }
        }
    }

    /// `(f, f', f'', f''')`.
    pub fn derivs(&self, x: f64) -> Result<[Complex64; 4]> {
        self.jet::<4>(x)
    }

    pub fn value(&self, x: f64) -> Result<Complex64> {
        Ok(self.jet::<1>(x)?[0])
    }

    /// Complex logarithm of the value; finite even where the value itself
    /// would overflow. The imaginary part is only meaningful modulo 2 pi.
    pub fn log_value(&self, x: f64) -> Result<Complex64> {
        self.check(x)?;
        match &self.evaluator {
            Evaluator::Exp { rate, anchor } => Ok(Complex64::new(rate * (x - anchor), 0.0)),
            Evaluator::Wkb(w) => w.log_value(x),
            Evaluator::Mirror(inner) => inner.log_value(x.abs()),
            _ => Ok(self.value(x)?.ln()),
        }
    }

    /// Debug dump: `x,re,im,d1,d2,d3` (real parts of the derivatives).
    pub fn to_csv(&self, xs: &[f64]) -> Result<String> {
        let mut s = String::from("x,re,im,d1,d2,d3\n");
        for &x in xs {
            let d = self.derivs(x)?;
            s.push_str(&format!(
                "{x:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                d[0].re, d[0].im, d[1].re, d[2].re, d[3].re
            ));
        }
        Ok(s)
    }
}

/// Fundamental system `{exp(mu1 x), exp(-mu1 x), cos(kappa x), sin(kappa x)}`.
pub fn exact_constant_basis(roots: &CharacteristicRoots) -> Result<[BasisFunction; 4]> {
    exact_basis_with_anchors(roots, 0.0, 0.0, Interval::new(f64::NEG_INFINITY, f64::INFINITY))
}

/// Same system with the exponentials anchored so that both are at most
/// one on `interval`.
pub fn exact_constant_basis_on(roots: &CharacteristicRoots, interval: Interval) -> Result<[BasisFunction; 4]> {
    exact_basis_with_anchors(roots, interval.hi, interval.lo, interval)
}

fn exact_basis_with_anchors(
    roots: &CharacteristicRoots,
    grow_anchor: f64,
    decay_anchor: f64,
    validity: Interval,
) -> Result<[BasisFunction; 4]> {
    use AsymptoticClass::*;
    let make = |index, evaluator, class_plus, class_minus| BasisFunction {
        index,
        evaluator,
        class_plus,
        class_minus,
        validity,
        method: Method::Exact,
    };
    let mu = roots.mu1;
    let (third, fourth) = match roots.slow {
        SlowPair::Oscillatory(k) => (
            make(3, Evaluator::Cos { k, shift: 0.0 }, Oscillatory, Oscillatory),
            make(4, Evaluator::Sin { k, shift: 0.0 }, Oscillatory, Oscillatory),
        ),
        SlowPair::Evanescent(nu) => (
            make(3, Evaluator::Exp { rate: nu, anchor: grow_anchor }, Growing, Decaying),
            make(4, Evaluator::Exp { rate: -nu, anchor: decay_anchor }, Decaying, Growing),
        ),
        SlowPair::Zero => return Err(Error::DegenerateBasis),
    };
    Ok([
        make(1, Evaluator::Exp { rate: mu, anchor: grow_anchor }, Growing, Decaying),
        make(2, Evaluator::Exp { rate: -mu, anchor: decay_anchor }, Decaying, Growing),
        third,
        fourth,
    ])
}

/// Classify `f` from its behavior on probe points ordered toward `side`.
pub fn classify_asymptotics(f: &BasisFunction, side: Side, probe: &[f64]) -> Result<AsymptoticClass> {
    if probe.len() < 3 {
        return Err(Error::Precondition("need at least 3 probe points".into()));
    }
    let monotone = probe.windows(2).all(|w| match side {
        Side::PlusInfinity => w[1] > w[0],
        Side::MinusInfinity => w[1] < w[0],
    });
    if !monotone {
        return Err(Error::Precondition("probe points must move monotonically toward the side".into()));
    }
    let logs: Vec<Complex64> = probe.iter().map(|&x| f.log_value(x)).collect::<Result<_>>()?;
    let half = probe.len() / 2;
    let amp = |s: &[Complex64]| s.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let first = amp(&logs[..half]);
    let second = amp(&logs[half..]);
    let ln10 = std::f64::consts::LN_10;
    // envelope comparison first, then endpoint comparison for monotone data
    let growth = (second - first).max(logs[logs.len() - 1].re - logs[0].re).min(second - first + ln10);
    let decay = (first - second).max(logs[0].re - logs[logs.len() - 1].re).min(first - second + ln10);
    if growth >= ln10 && logs.windows(2).filter(|w| w[1].re < w[0].re).count() <= probe.len() / 2 {
        return Ok(AsymptoticClass::Growing);
    }
    if decay >= ln10 && logs.windows(2).filter(|w| w[1].re > w[0].re).count() <= probe.len() / 2 {
        return Ok(AsymptoticClass::Decaying);
    }
    let ratio = (second - first).exp();
    let signs_change = {
        let vals: Vec<Complex64> = logs.iter().map(|z| Complex64::new(0.0, z.im).exp()).collect();
        let re_change = vals.windows(2).any(|w| w[0].re * w[1].re < 0.0);
        let im_change = vals.windows(2).any(|w| w[0].im * w[1].im < 0.0);
        re_change || im_change
    };
    if signs_change && (0.5..=2.0).contains(&ratio) {
        return Ok(AsymptoticClass::Oscillatory);
    }
    Ok(AsymptoticClass::Undefined)
}

/// The four fundamental solutions used for a problem at one energy,
/// together with the region on which states built from them live.
#[derive(Debug, Clone)]
pub struct Basis {
    pub functions: [BasisFunction; 4],
    pub energy: f64,
    pub epsilon: f64,
    pub kind: PotentialKind,
    pub potential: ScaledPotential,
    /// Finite region carrying the states (tails beyond it are negligible).
    pub region: Interval,
    /// States are even extensions of their `x >= 0` part.
    pub mirrored: bool,
    pub far: Option<FarField>,
    /// `E_c` in joules, for reporting.
    pub energy_scale: f64,
}

impl Basis {
    pub fn function(&self, j: usize) -> &BasisFunction {
        &self.functions[j - 1]
    }

    /// Break points for quadrature over `region` (checkpoints, launch points).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![self.region.lo, self.region.hi];
        if let Some(f) = &self.far {
            b.push(f.launch);
            if self.mirrored {
                b.push(-f.launch);
                b.push(0.0);
            }
        }
        b.retain(|x| self.region.contains(*x));
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// Fundamental system appropriate to the problem's potential.
///
/// * well: exact exponentials and trigonometric functions;
/// * linear: WKB `w1, w3` with the decaying `w2, w4` continued inward from
///   the far field down to the wall;
/// * harmonic: the same construction on `x >= 0`, mirrored to `x < 0`; the
///   two half-line families share coefficients;
/// * custom: canonical solutions integrated from the domain midpoint.
pub fn fundamental_basis(problem: &DimensionlessProblem, energy: f64) -> Result<Basis> {
    let eps = problem.epsilon;
    if !(eps > 0.0) {
        return Err(Error::UnsupportedEpsilon(eps));
    }
    if !energy.is_finite() {
        return Err(Error::Precondition("energy must be finite".into()));
    }
    match problem.kind {
        PotentialKind::Well => {
            let v = problem.potential.value(0.0);
            let roots = characteristic_roots(eps, energy - v)?;
            let functions = exact_constant_basis_on(&roots, problem.domain)?;
            Ok(Basis {
                functions,
                energy,
                epsilon: eps,
                kind: problem.kind,
                potential: problem.potential.clone(),
                region: problem.domain,
                mirrored: false,
                far: None,
                energy_scale: problem.energy_scale,
            })
        }
        PotentialKind::Linear | PotentialKind::Harmonic => {
            let mirrored = problem.kind == PotentialKind::Harmonic;
            let start = 0.0;
            let family = DecayingFamily::build(&problem.potential, eps, energy, start, Default::default())?;
            let far = family.far.clone();
            let [w1, w3] = family.growing_functions()?;
            let [w2, w4] = family.decaying_functions();
            let mut functions = [w1, w2, w3, w4];
            let region = if mirrored {
                Interval::new(-far.tail_end, far.tail_end)
            } else {
                Interval::new(start, far.tail_end)
            };
            if mirrored {
                functions = functions.map(|f| {
                    let validity = Interval::new(-f.validity.hi, f.validity.hi);
                    BasisFunction {
                        index: f.index,
                        class_plus: f.class_plus,
                        class_minus: f.class_plus,
                        method: f.method,
                        validity: if f.validity.lo <= 0.0 { validity } else { f.validity },
                        evaluator: Evaluator::Mirror(Box::new(f)),
                    }
                });
            }
            Ok(Basis {
                functions,
                energy,
                epsilon: eps,
                kind: problem.kind,
                potential: problem.potential.clone(),
                region,
                mirrored,
                far: Some(far),
                energy_scale: problem.energy_scale,
            })
        }
        PotentialKind::Custom => {
            let functions = numerical::canonical_basis(problem, energy)?;
            Ok(Basis {
                functions,
                energy,
                epsilon: eps,
                kind: problem.kind,
                potential: problem.potential.clone(),
                region: problem.domain,
                mirrored: false,
                far: None,
                energy_scale: problem.energy_scale,
            })
        }
    }
}

/// Extend derivatives `phi..phi'''` to higher order through the equation
/// `eps phi'''' = phi'' - (V - E) phi`, differentiated term by term.
pub fn extend_by_equation<const N: usize>(
    d: [Complex64; 4],
    potential: &ScaledPotential,
    energy: f64,
    epsilon: f64,
    x: f64,
) -> [Complex64; N] {
    let mut out = [Complex64::new(0.0, 0.0); N];
    for k in 0..N.min(4) {
        out[k] = d[k];
    }
    let t = potential.taylor(x);
    // q^(i) = i! t_i with q = V - E
    let q = [t[0] - energy, t[1], 2.0 * t[2], 6.0 * t[3]];
    for m in 4..N {
        let k = m - 4;
        let mut acc = out[k + 2];
        let mut binom = 1.0;
        for i in 0..=k.min(3) {
            if i > 0 {
                binom = binom * (k + 1 - i) as f64 / i as f64;
            }
            acc -= out[k - i] * (binom * q[i]);
        }
        out[m] = acc / epsilon;
    }
    out
}

/// Series helper shared by the WKB code: potential Taylor data minus energy.
pub(crate) fn b_series<const N: usize>(potential: &ScaledPotential, energy: f64, x: f64) -> Series<N> {
    let t = potential.taylor(x);
    Series::from_real(&[t[0] - energy, t[1], t[2], t[3]])
}

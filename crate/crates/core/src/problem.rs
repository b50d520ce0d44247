//! Physical setups and their dimensionless form.
//!
//! Lengths are measured in units of a scale `L_c` and energies in
//! `E_c = hbar^2 / (2 m L_c^2)`. The equation then reads
//!
//! ```text
//! eps * phi'''' - phi'' + (V(x) - E) * phi = 0,   eps = 2 (beta/3) hbar^2 / L_c^2
//! ```
//!
//! Note that the particle mass drops out of `eps`.

use crate::error::{Error, Result};
use crate::pchip::Pchip;
use serde::Serialize;
use std::fmt;

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Electron mass in kg, as used for the reference well.
pub const ELECTRON_MASS: f64 = 9.109_56e-31;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    /// `V = 0` on `(-a, a)`, hard walls at `+-a`.
    InfiniteWell { half_width: f64 },
    /// `V = L x` on `(0, inf)`, hard wall at the origin.
    Linear { slope: f64 },
    /// `V = m w^2 x^2 / 2` on the whole line.
    Harmonic { omega: f64 },
    /// Samples `(x [m], V [J])`, hard walls at the first and last abscissa.
    TabulatedCustom { samples: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PotentialKind {
    Well,
    Linear,
    Harmonic,
    Custom,
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PotentialKind::Well => "well",
            PotentialKind::Linear => "linear",
            PotentialKind::Harmonic => "harmonic",
            PotentialKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl PotentialSpec {
    pub fn kind(&self) -> PotentialKind {
        match self {
            PotentialSpec::InfiniteWell { .. } => PotentialKind::Well,
            PotentialSpec::Linear { .. } => PotentialKind::Linear,
            PotentialSpec::Harmonic { .. } => PotentialKind::Harmonic,
            PotentialSpec::TabulatedCustom { .. } => PotentialKind::Custom,
        }
    }
}

/// Particle, deformation parameter and potential, in SI units.
///
/// `beta` is the bare number multiplying `(dP)^2 + <P>^2` in the modified
/// uncertainty relation, so it carries units of inverse momentum squared.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalSetup {
    mass: f64,
    beta: f64,
    potential: PotentialSpec,
}

impl PhysicalSetup {
    pub fn new(mass: f64, beta: f64, potential: PotentialSpec) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidSetup(format!("mass must be positive, got {mass}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidSetup(format!("beta must be >= 0, got {beta}")));
        }
        match &potential {
            PotentialSpec::InfiniteWell { half_width: a } if !(a.is_finite() && *a > 0.0) => {
                return Err(Error::InvalidSetup(format!("well half-width must be positive, got {a}")))
            }
            PotentialSpec::Linear { slope } if !(slope.is_finite() && *slope > 0.0) => {
                return Err(Error::InvalidSetup(format!("slope L must be positive, got {slope}")))
            }
            PotentialSpec::Harmonic { omega } if !(omega.is_finite() && *omega > 0.0) => {
                return Err(Error::InvalidSetup(format!("omega must be positive, got {omega}")))
            }
            PotentialSpec::TabulatedCustom { samples } => {
                let (x, v): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
                Pchip::new(x, v)?;
            }
            _ => {}
        }
        Ok(PhysicalSetup { mass, beta, potential })
    }

    /// The reference configuration: an electron in a well of half-width 1e-10 m with beta = 1e47.
    pub fn reference_well() -> Self {
        PhysicalSetup::new(ELECTRON_MASS, 1e47, PotentialSpec::InfiniteWell { half_width: 1e-10 })
            .expect("reference setup is valid")
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn beta_prime(&self) -> f64 {
        self.beta / 3.0
    }

    pub fn hbar(&self) -> f64 {
        HBAR
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn kind(&self) -> PotentialKind {
        self.potential.kind()
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        PhysicalSetup::new(self.mass, beta, self.potential.clone())
    }

    /// Length scale that makes the scaled potential coefficients order one.
    pub fn canonical_length_scale(&self) -> f64 {
        let m = self.mass;
        match &self.potential {
            PotentialSpec::InfiniteWell { half_width } => *half_width,
            PotentialSpec::Linear { slope } => (HBAR * HBAR / (2.0 * m * slope)).cbrt(),
            PotentialSpec::Harmonic { omega } => (HBAR / (m * omega)).sqrt(),
            PotentialSpec::TabulatedCustom { samples } => {
                0.5 * (samples[samples.len() - 1].0 - samples[0].0)
            }
        }
    }

    /// Potential in joules at `x` metres; `None` where it is infinite.
    pub fn potential_si(&self, x: f64) -> Option<f64> {
        match &self.potential {
            PotentialSpec::InfiniteWell { half_width } => (x.abs() < *half_width).then_some(0.0),
            PotentialSpec::Linear { slope } => (x > 0.0).then_some(slope * x),
            PotentialSpec::Harmonic { omega } => Some(0.5 * self.mass * omega * omega * x * x),
            PotentialSpec::TabulatedCustom { samples } => {
                let (xs, vs): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
                let p = Pchip::new(xs, vs).ok()?;
                (x > p.lo() && x < p.hi()).then(|| p.value(x))
            }
        }
    }
}

/// Dimensionless potential. Every variant is a cubic polynomial on each
/// piece, so four Taylor coefficients describe it exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaledPotential {
    Zero,
    Linear { slope: f64 },
    Quadratic { coef: f64 },
    Tabulated(Pchip),
}

impl ScaledPotential {
    pub fn value(&self, x: f64) -> f64 {
        self.taylor(x)[0]
    }

    /// `[V, V', V''/2, V'''/6]` at `x`.
    pub fn taylor(&self, x: f64) -> [f64; 4] {
        match self {
            ScaledPotential::Zero => [0.0; 4],
            ScaledPotential::Linear { slope } => [slope * x, *slope, 0.0, 0.0],
            ScaledPotential::Quadratic { coef } => [coef * x * x, 2.0 * coef * x, *coef, 0.0],
            ScaledPotential::Tabulated(p) => p.taylor(x),
        }
    }

    /// `V(-x) = V(x)` for all x.
    pub fn is_even(&self) -> bool {
        matches!(self, ScaledPotential::Zero | ScaledPotential::Quadratic { .. })
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ScaledPotential::Zero)
    }

    /// Points in `[lo, hi]` where `V(x) = level`, ascending. A constant
    /// potential equal to `level` has no isolated crossings and yields none.
    pub fn crossings(&self, level: f64, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = match self {
            ScaledPotential::Zero => vec![],
            ScaledPotential::Linear { slope } => vec![level / slope],
            ScaledPotential::Quadratic { coef } => {
                if level / coef >= 0.0 {
                    let r = (level / coef).sqrt();
                    if r == 0.0 {
                        vec![0.0]
                    } else {
                        vec![-r, r]
                    }
                } else {
                    vec![]
                }
            }
            ScaledPotential::Tabulated(p) => {
                let (a, b) = (lo.max(p.lo()), hi.min(p.hi()));
                let mut roots = vec![];
                if a < b {
                    let n = 4096;
                    let f = |x: f64| p.value(x) - level;
                    let mut xp = a;
                    let mut fp = f(a);
                    for i in 1..=n {
                        let x = a + (b - a) * i as f64 / n as f64;
                        let fx = f(x);
                        if fp == 0.0 {
                            roots.push(xp);
                        } else if fp * fx < 0.0 {
                            let (mut l, mut r) = (xp, x);
                            for _ in 0..80 {
                                let m = 0.5 * (l + r);
                                if f(m) * fp > 0.0 {
                                    l = m;
                                } else {
                                    r = m;
                                }
                            }
                            roots.push(0.5 * (l + r));
                        }
                        xp = x;
                        fp = fx;
                    }
                }
                roots
            }
        };
        out.retain(|x| *x >= lo && *x <= hi);
        out.sort_by(f64::total_cmp);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionlessProblem {
    pub epsilon: f64,
    pub potential: ScaledPotential,
    /// `L_c` in metres.
    pub length_scale: f64,
    /// `E_c` in joules.
    pub energy_scale: f64,
    pub domain: Interval,
    /// Hard walls at the finite domain ends.
    pub wall_lo: bool,
    pub wall_hi: bool,
    pub kind: PotentialKind,
}

/// Exact rescaling of a setup to the dimensionless equation.
pub fn nondimensionalize(setup: &PhysicalSetup, length_scale: f64) -> Result<DimensionlessProblem> {
    if !(length_scale.is_finite() && length_scale > 0.0) {
        return Err(Error::InvalidSetup(format!(
            "length scale must be positive and finite, got {length_scale}"
        )));
    }
    let m = setup.mass();
    let lc = length_scale;
    let ec = HBAR * HBAR / (2.0 * m * lc * lc);
    let epsilon = 2.0 * setup.beta_prime() * HBAR * HBAR / (lc * lc);
    if !(ec.is_finite() && ec > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidSetup("scales are not representable".into()));
    }
    let inf = f64::INFINITY;
    let (potential, domain, wall_lo, wall_hi) = match setup.potential() {
        PotentialSpec::InfiniteWell { half_width } => {
            let h = half_width / lc;
            (ScaledPotential::Zero, Interval::new(-h, h), true, true)
        }
        PotentialSpec::Linear { slope } => (
            ScaledPotential::Linear { slope: slope * lc / ec },
            Interval::new(0.0, inf),
            true,
            false,
        ),
        PotentialSpec::Harmonic { omega } => (
            ScaledPotential::Quadratic { coef: 0.5 * m * omega * omega * lc * lc / ec },
            Interval::new(-inf, inf),
            false,
            false,
        ),
        PotentialSpec::TabulatedCustom { samples } => {
            let x = samples.iter().map(|s| s.0 / lc).collect();
            let v = samples.iter().map(|s| s.1 / ec).collect();
            let p = Pchip::new(x, v)?;
            let dom = Interval::new(p.lo(), p.hi());
            (ScaledPotential::Tabulated(p), dom, true, true)
        }
    };
    Ok(DimensionlessProblem {
        epsilon,
        potential,
        length_scale: lc,
        energy_scale: ec,
        domain,
        wall_lo,
        wall_hi,
        kind: setup.kind(),
    })
}

/// Dimensionless problem at the setup's canonical length scale.
pub fn canonical_problem(setup: &PhysicalSetup) -> Result<DimensionlessProblem> {
    nondimensionalize(setup, setup.canonical_length_scale())
}

/// Scaled potential value; hard walls are boundary conditions, not values.
pub fn potential_value(problem: &DimensionlessProblem, x: f64) -> Result<f64> {
    if !problem.domain.contains(x) {
        return Err(Error::Domain { x, lo: problem.domain.lo, hi: problem.domain.hi });
    }
    Ok(problem.potential.value(x))
}

impl DimensionlessProblem {
    /// A problem posed directly in scaled form (unit length and energy scales).
    pub fn scaled(epsilon: f64, potential: ScaledPotential, domain: Interval, kind: PotentialKind) -> Self {
        DimensionlessProblem {
            epsilon,
            potential,
            length_scale: 1.0,
            energy_scale: 1.0,
            wall_lo: domain.lo.is_finite(),
            wall_hi: domain.hi.is_finite(),
            domain,
            kind,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut p = self.clone();
        p.epsilon = epsilon;
        p
    }

    /// Same problem with the fourth-order term switched off.
    pub fn standard(&self) -> Self {
        self.with_epsilon(0.0)
    }

    pub fn is_standard(&self) -> bool {
        self.epsilon == 0.0
    }

    pub fn potential_value(&self, x: f64) -> Result<f64> {
        potential_value(self, x)
    }

    pub fn energy_to_si(&self, e: f64) -> f64 {
        e * self.energy_scale
    }

    pub fn energy_from_si(&self, e_si: f64) -> f64 {
        e_si / self.energy_scale
    }

    pub fn length_to_si(&self, x: f64) -> f64 {
        x * self.length_scale
    }

    pub fn length_from_si(&self, x_si: f64) -> f64 {
        x_si / self.length_scale
    }

    /// Momentum unit `hbar / L_c`.
    pub fn momentum_scale(&self) -> f64 {
        HBAR / self.length_scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_scales() {
        let p = canonical_problem(&PhysicalSetup::reference_well()).unwrap();
        assert!((p.epsilon - 7.414e-2).abs() < 1e-4);
        assert!((p.energy_scale - 6.104e-19).abs() < 1e-22);
        assert_eq!(p.domain, Interval::new(-1.0, 1.0));
    }

    #[test]
    fn beta_zero_is_standard() {
        let s = PhysicalSetup::new(ELECTRON_MASS, 0.0, PotentialSpec::Harmonic { omega: 1e15 }).unwrap();
        assert_eq!(canonical_problem(&s).unwrap().epsilon, 0.0);
    }

    #[test]
    fn canonical_scales_give_unit_coefficients() {
        let lin = PhysicalSetup::new(ELECTRON_MASS, 1e47, PotentialSpec::Linear { slope: 1e-8 }).unwrap();
        match canonical_problem(&lin).unwrap().potential {
            ScaledPotential::Linear { slope } => assert!((slope - 1.0).abs() < 1e-12),
            _ => panic!(),
        }
        let ho = PhysicalSetup::new(ELECTRON_MASS, 1e47, PotentialSpec::Harmonic { omega: 2e16 }).unwrap();
        let p = canonical_problem(&ho).unwrap();
        assert!((p.potential_value(2.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn domain_is_enforced() {
        let p = canonical_problem(&PhysicalSetup::reference_well()).unwrap();
        assert_eq!(p.potential_value(0.0).unwrap(), 0.0);
        assert!(matches!(p.potential_value(1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn invalid_setups_are_rejected() {
        assert!(PhysicalSetup::new(-1.0, 0.0, PotentialSpec::Linear { slope: 1.0 }).is_err());
        assert!(PhysicalSetup::new(1.0, -1.0, PotentialSpec::Linear { slope: 1.0 }).is_err());
        assert!(PhysicalSetup::new(1.0, 0.0, PotentialSpec::Linear { slope: f64::NAN }).is_err());
        let s = PhysicalSetup::reference_well();
        assert!(nondimensionalize(&s, 0.0).is_err());
        assert!(nondimensionalize(&s, f64::INFINITY).is_err());
    }
}

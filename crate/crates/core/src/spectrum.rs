//! Level formulas, degeneracy scans, momentum moments and the observability
//! ratio `beta * ((dP)^2 + <P>^2)`.

use crate::basis::{characteristic_roots, extend_by_equation, fundamental_basis, Evaluator, SlowPair};
use crate::error::{Error, Result};
use crate::matcher::{assemble, natural_conditions, nullspace, BoundStateSolution, State, RANK_TOL};
use crate::oracle::{standard_mismatch, standard_shot};
use crate::problem::{canonical_problem, DimensionlessProblem, PhysicalSetup, PotentialKind, PotentialSpec, HBAR};
use crate::quadrature::{integrate_vec, QuadOptions};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;

/// Default threshold on the observability ratio.
pub const OBSERVABILITY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecialEnergy {
    pub k: usize,
    pub energy_si: f64,
    pub energy: f64,
}

/// Energies at which the oscillatory wavenumber is `k pi / (2a)`, so that
/// a pure sine satisfies both walls.
pub fn well_special_energies(setup: &PhysicalSetup, k_max: usize) -> Result<Vec<SpecialEnergy>> {
    let a = match setup.potential() {
        PotentialSpec::InfiniteWell { half_width } => *half_width,
        _ => return Err(Error::PotentialKind { expected: "well".into(), found: setup.kind().to_string() }),
    };
    if k_max < 1 {
        return Err(Error::InvalidSetup("k_max must be at least 1".into()));
    }
    let m = setup.mass();
    let bp = setup.beta_prime();
    let ec = HBAR * HBAR / (2.0 * m * a * a);
    Ok((1..=k_max)
        .map(|k| {
            let kf = k as f64;
            let energy_si = kf.powi(4) * PI.powi(4) * HBAR.powi(4) * bp / (16.0 * m * a.powi(4))
                + kf * kf * PI * PI * HBAR * HBAR / (8.0 * m * a * a);
            SpecialEnergy { k, energy_si, energy: energy_si / ec }
        })
        .collect())
}

/// Oscillatory wavenumber at `energy` in well units, if there is one.
pub fn well_wavenumber(epsilon: f64, energy: f64) -> Result<f64> {
    match characteristic_roots(epsilon, energy)?.slow {
        SlowPair::Oscillatory(k) => Ok(k),
        _ => Err(Error::DegenerateBasis),
    }
}

/// Levels of the standard (second-order) problem below `e_max`, found as
/// sign changes of the boundary mismatch refined by bisection.
pub fn standard_levels(problem: &DimensionlessProblem, e_max: f64) -> Result<Vec<f64>> {
    let p = problem.standard();
    let width = if p.domain.width().is_finite() { p.domain.width() } else { 2.0 };
    let step = 0.02 * (2.0 / width).powi(2).min(1.0).max(1e-3);
    let f = |e: f64| standard_mismatch(&p, e);
    let mut levels = vec![];
    let mut e0 = step * 0.5;
    let mut f0 = f(e0)?;
    while e0 < e_max {
        let e1 = e0 + step;
        let f1 = f(e1)?;
        if f0 == 0.0 {
            levels.push(e0);
        } else if f0 * f1 < 0.0 {
            let (mut lo, mut hi, mut flo) = (e0, e1, f0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid)?;
                if fm * flo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
                if hi - lo < 1e-14 * hi {
                    break;
                }
            }
            let e = 0.5 * (lo + hi);
            if e <= e_max {
                levels.push(e);
            }
        }
        e0 = e1;
        f0 = f1;
    }
    Ok(levels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BandLabel {
    StandardLevel,
    ExtraContinuum,
}

impl fmt::Display for BandLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandLabel::StandardLevel => "StandardLevel",
            BandLabel::ExtraContinuum => "ExtraContinuum",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumScan {
    pub kind: PotentialKind,
    pub energies_si: Vec<f64>,
    pub energies: Vec<f64>,
    /// `None` where the per-energy pipeline failed; see `errors`.
    pub dof: Vec<Option<usize>>,
    pub errors: Vec<Option<String>>,
    /// Well: the closed-form special energies that fall on the grid.
    pub special_marks: Vec<SpecialEnergy>,
    /// Dimensionless levels that were marked (special energies for the
    /// well, standard levels otherwise).
    pub reference_levels: Vec<f64>,
    pub band_labels: Vec<BandLabel>,
}

impl SpectrumScan {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("E_SI,E_dimensionless,dof,label\n");
        for i in 0..self.energies.len() {
            let dof = self.dof[i].map(|d| d.to_string()).unwrap_or_else(|| "NaN".into());
            s.push_str(&format!(
                "{:.16e},{:.16e},{},{}\n",
                self.energies_si[i], self.energies[i], dof, self.band_labels[i]
            ));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scan is serializable")
    }

    /// The common DOF when every energy succeeded and agrees.
    pub fn constant_dof(&self) -> Option<usize> {
        let first = self.dof.first().copied().flatten()?;
        self.dof.iter().all(|d| *d == Some(first)).then_some(first)
    }
}

/// Degeneracy at one dimensionless energy.
pub fn dof_at(problem: &DimensionlessProblem, energy: f64) -> Result<usize> {
    let basis = std::sync::Arc::new(fundamental_basis(problem, energy)?);
    let conds = natural_conditions(problem);
    let sys = assemble(&basis, &conds, energy)?;
    Ok(nullspace(&sys, RANK_TOL)?.nullity)
}

/// Run the basis, constraint and nullspace pipeline at each energy (SI).
pub fn dof_scan(setup: &PhysicalSetup, grid_si: &[f64]) -> Result<SpectrumScan> {
    if grid_si.is_empty() {
        return Err(Error::InvalidSetup("empty energy grid".into()));
    }
    if grid_si.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidSetup("energies must be positive and finite".into()));
    }
    if grid_si.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSetup("energy grid must be strictly increasing".into()));
    }
    let problem = canonical_problem(setup)?;
    let energies: Vec<f64> = grid_si.iter().map(|e| problem.energy_from_si(*e)).collect();
    let results: Vec<Result<usize>> = energies.par_iter().map(|&e| dof_at(&problem, e)).collect();

    let (lo, hi) = (energies[0], energies[energies.len() - 1]);
    let spacing = |i: usize| -> f64 {
        let left = if i > 0 { energies[i] - energies[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < energies.len() { energies[i + 1] - energies[i] } else { f64::INFINITY };
        left.min(right)
    };
    let candidates: Vec<(Option<SpecialEnergy>, f64)> = match problem.kind {
        PotentialKind::Well => well_special_energies(setup, 64)?.into_iter().map(|s| (Some(s), s.energy)).collect(),
        _ => standard_levels(&problem, hi + spacing(energies.len() - 1).min(hi - lo))?
            .into_iter()
            .map(|e| (None, e))
            .collect(),
    };
    let mut band_labels = vec![BandLabel::ExtraContinuum; energies.len()];
    let mut special_marks = vec![];
    let mut reference_levels = vec![];
    for (mark, level) in candidates {
        let nearest = (0..energies.len())
            .min_by(|&a, &b| (energies[a] - level).abs().total_cmp(&(energies[b] - level).abs()))
            .expect("grid is non-empty");
        if (energies[nearest] - level).abs() <= spacing(nearest) {
            band_labels[nearest] = BandLabel::StandardLevel;
            special_marks.extend(mark);
            reference_levels.push(level);
        }
    }
    let mut dof = vec![];
    let mut errors = vec![];
    for r in results {
        match r {
            Ok(d) => {
                dof.push(Some(d));
                errors.push(None);
            }
            Err(e) => {
                dof.push(None);
                errors.push(Some(e.to_string()));
            }
        }
    }
    Ok(SpectrumScan {
        kind: problem.kind,
        energies_si: grid_si.to_vec(),
        energies,
        dof,
        errors,
        special_marks,
        reference_levels,
        band_labels,
    })
}

/// The member of an orthonormal degenerate family with no exponential
/// component, phase-aligned to be real. Exists only where the oscillatory
/// part alone satisfies the conditions (the well at its special energies).
pub fn oscillatory_member(solution: &BoundStateSolution, tol: f64) -> Option<State> {
    oscillatory_first(solution, tol).map(|mut v| v.swap_remove(0))
}

/// The family rotated so that its oscillatory member comes first; the
/// remaining states span the orthogonal complement and stay orthonormal.
pub fn oscillatory_first(solution: &BoundStateSolution, tol: f64) -> Option<Vec<State>> {
    let first = solution.states.first()?;
    let basis = &first.basis;
    let exp_cols: Vec<usize> =
        (0..4).filter(|&j| matches!(basis.functions[j].evaluator, Evaluator::Exp { .. })).collect();
    let n = solution.states.len();
    let rows = exp_cols.len().max(n);
    let m = DMatrix::from_fn(rows, n, |r, c| {
        if r < exp_cols.len() {
            solution.states[c].coefficients[exp_cols[r]]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let svd = m.svd(false, true);
    let vt = svd.v_t?;
    let (k, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, s)| (k, *s))?;
    let scale = solution
        .states
        .iter()
        .flat_map(|s| s.coefficients.iter().map(|c| c.norm()))
        .fold(0.0, f64::max);
    if smin > tol * scale {
        return None;
    }
    let combine = |row: usize| -> [Complex64; 4] {
        let mut c = [Complex64::new(0.0, 0.0); 4];
        for (i, st) in solution.states.iter().enumerate() {
            let w = vt[(row, i)].conj();
            for j in 0..4 {
                c[j] += w * st.coefficients[j];
            }
        }
        c
    };
    let mut lead = combine(k);
    for &j in &exp_cols {
        lead[j] = Complex64::new(0.0, 0.0);
    }
    let big = lead.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
    let phase = big / big.norm();
    let mut out = vec![State { coefficients: lead.map(|z| z / phase), basis: std::sync::Arc::clone(basis) }];
    for row in (0..n).filter(|&r| r != k) {
        out.push(State { coefficients: combine(row), basis: std::sync::Arc::clone(basis) });
    }
    Some(out)
}

/// Momentum statistics of a normalized state, in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumMoments {
    /// `<P>` for `P = p + beta' p^3` (real part).
    pub mean_p: f64,
    /// Imaginary part of the same integral. Nonzero only through wall
    /// terms of `phi''` on states that are not symmetric.
    pub mean_p_imag: f64,
    pub delta_p: f64,
    pub p2_full: f64,
    /// `<p>` and `<p^2>` of the plain momentum operator.
    pub mean_p_leading: f64,
    pub p2_leading: f64,
    pub beta: f64,
    /// `beta * ((dp)^2 + <p>^2)` with the plain momentum moments.
    pub ratio: f64,
    /// `beta * ((dP)^2 + <P>^2)` with the full operator.
    pub ratio_full: f64,
    pub norm: f64,
}

impl MomentumMoments {
    /// Ratio at another `beta` with the plain momentum moments held fixed.
    pub fn ratio_at(&self, beta: f64) -> f64 {
        beta * self.p2_leading
    }
}

/// Moments of a state on its basis region. Fourth and higher derivatives
/// come from the equation, not from the basis functions.
pub fn momentum_moments(state: &State, problem: &DimensionlessProblem) -> Result<MomentumMoments> {
    let basis = &state.basis;
    let eps = basis.epsilon;
    if (eps - problem.epsilon).abs() > 1e-12 * problem.epsilon.abs() {
        return Err(Error::Precondition("state and problem have different epsilon".into()));
    }
    let e = basis.energy;
    let pot = &basis.potential;
    let integrand = |x: f64| -> Result<Vec<Complex64>> {
        let d = state.derivs(x)?;
        let j = extend_by_equation::<7>(d, pot, e, eps, x);
        let c = j[0].conj();
        let i = Complex64::i();
        Ok(vec![
            Complex64::new(j[0].norm_sqr(), 0.0),
            c * (-i * j[1]),
            c * (i * 0.5 * eps * j[3]),
            Complex64::new(j[1].norm_sqr(), 0.0),
            Complex64::new((e - pot.value(x)) * j[0].norm_sqr(), 0.0),
            c * j[6],
        ])
    };
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-11, max_intervals: 8000, initial_pieces: 16 };
    let mut total = vec![Complex64::new(0.0, 0.0); 6];
    for w in basis.breakpoints().windows(2) {
        let r = integrate_vec(integrand, w[0], w[1], 6, &opts)?;
        for k in 0..6 {
            total[k] += r.value[k];
        }
    }
    let norm = total[0].re;
    if (norm.sqrt() - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!("state is not normalized (norm^2 = {norm})")));
    }
    let unit = problem.momentum_scale();
    let mean = (total[1] + total[2]) * unit;
    let mean_lead = total[1].re * unit;
    let p2_leading = total[3].re * unit * unit;
    let p2_full = (total[4].re - 0.25 * eps * eps * total[5].re) * unit * unit;
    let beta = 1.5 * eps * (problem.length_scale / HBAR).powi(2);
    let var = (p2_full - mean.re * mean.re).max(0.0);
    Ok(MomentumMoments {
        mean_p: mean.re,
        mean_p_imag: mean.im,
        delta_p: var.sqrt(),
        p2_full,
        mean_p_leading: mean_lead,
        p2_leading,
        beta,
        ratio: beta * p2_leading,
        ratio_full: beta * p2_full,
        norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Observability {
    Obvious,
    Inconspicuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservabilityReport {
    pub class: Observability,
    pub ratio: f64,
    pub threshold: f64,
}

pub fn observability(moments: &MomentumMoments, threshold: f64) -> ObservabilityReport {
    let class = if moments.ratio >= threshold { Observability::Obvious } else { Observability::Inconspicuous };
    ObservabilityReport { class, ratio: moments.ratio, threshold }
}

/// Plain momentum moments of the standard ground state, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StandardGroundState {
    /// Dimensionless and SI energy.
    pub energy: f64,
    pub energy_si: f64,
    /// `<p^2>`, `<p^4>`, `<p^6>`; `<p> = 0` for the real ground state.
    pub p2: f64,
    pub p4: f64,
    pub p6: f64,
}

/// Lowest level of the standard problem and its momentum moments, using
/// `psi'' = q psi` and `psi''' = q' psi + q psi'` in the quadratic forms
/// `<p^4> = int |psi''|^2`, `<p^6> = int |psi'''|^2`.
pub fn standard_ground_state(problem: &DimensionlessProblem) -> Result<StandardGroundState> {
    let p = problem.standard();
    let mut e_max = 4.0;
    let energy = loop {
        if let Some(e) = standard_levels(&p, e_max)?.first() {
            break *e;
        }
        e_max *= 4.0;
        if e_max > 1e6 {
            return Err(Error::Precondition("no standard level found".into()));
        }
    };
    let shot = standard_shot(&p, energy)?;
    let pot = &p.potential;
    let f = |x: f64| -> Result<Vec<Complex64>> {
        let s = shot.trajectory.eval(x)?;
        let (psi, d1) = (s.0[0].re, s.0[1].re);
        let t = pot.taylor(x);
        let q = t[0] - energy;
        let d2 = q * psi;
        let d3 = t[1] * psi + q * d1;
        Ok([psi * psi, d1 * d1, d2 * d2, d3 * d3].iter().map(|v| Complex64::new(*v, 0.0)).collect())
    };
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-11, max_intervals: 8000, initial_pieces: 32 };
    let r = integrate_vec(f, shot.lo, shot.hi, 4, &opts)?;
    let n = r.value[0].re;
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::UndefinedExponent("ground state has zero norm".into()));
    }
    let u = p.momentum_scale();
    Ok(StandardGroundState {
        energy,
        energy_si: p.energy_to_si(energy),
        p2: r.value[1].re / n * u * u,
        p4: r.value[2].re / n * u.powi(4),
        p6: r.value[3].re / n * u.powi(6),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalBeta {
    /// `log10(1 / <p^2>)` from the standard ground state.
    pub exponent: f64,
    /// One fixed-point step: `log10(1 / <P^2>)` with `P = p + beta' p^3`
    /// evaluated on the same state at the leading `beta`.
    pub refined: f64,
    pub ground: StandardGroundState,
    /// Order of magnitude quoted in the literature for this potential.
    pub quoted: Option<f64>,
    /// Set when the computed exponent differs from the quoted one by more
    /// than 1.5 orders.
    pub discrepancy: bool,
}

/// `log10(1 / ((dP)^2 + <P>^2))`; the sum is the second moment `<P^2>`.
pub fn critical_exponent_from(second_moment: f64) -> Result<f64> {
    let s = second_moment;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::UndefinedExponent(format!("momentum spread {s} is not positive")));
    }
    Ok(-s.log10())
}

/// `log10` of the `beta` that brings the observability ratio of the
/// standard ground state to one. Independent of the setup's own `beta`.
pub fn critical_beta_exponent(setup: &PhysicalSetup) -> Result<CriticalBeta> {
    let problem = canonical_problem(setup)?;
    let ground = standard_ground_state(&problem)?;
    let exponent = critical_exponent_from(ground.p2)?;
    let bp = 10f64.powf(exponent) / 3.0;
    let p2_full = ground.p2 + 2.0 * bp * ground.p4 + bp * bp * ground.p6;
    let refined = critical_exponent_from(p2_full)?;
    let quoted = match setup.kind() {
        PotentialKind::Well => Some(47.0),
        PotentialKind::Linear => Some(37.0),
        PotentialKind::Harmonic => Some(33.0),
        PotentialKind::Custom => None,
    };
    let discrepancy = quoted.is_some_and(|q| (exponent - q).abs() > 1.5);
    Ok(CriticalBeta { exponent, refined, ground, quoted, discrepancy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ELECTRON_MASS;

    #[test]
    fn special_energies_reference() {
        let e0 = well_special_energies(&PhysicalSetup::reference_well().with_beta(0.0).unwrap(), 1).unwrap();
        assert!((e0[0].energy_si - 1.506e-18).abs() < 1e-21);
        let e = well_special_energies(&PhysicalSetup::reference_well(), 5).unwrap();
        assert!((e[0].energy_si - 1.782e-18).abs() < 1e-21);
        assert!((e[0].energy - 2.919).abs() < 1e-3);
        let setup = PhysicalSetup::new(ELECTRON_MASS, 1e47, PotentialSpec::Harmonic { omega: 1.0 }).unwrap();
        assert!(well_special_energies(&setup, 3).is_err());
    }

    #[test]
    fn standard_levels_of_known_problems() {
        let well = canonical_problem(&PhysicalSetup::reference_well()).unwrap();
        let lv = standard_levels(&well, 10.0).unwrap();
        assert_eq!(lv.len(), 2);
        assert!((lv[0] - PI * PI / 4.0).abs() < 1e-9);
        let h = canonical_problem(
            &PhysicalSetup::new(ELECTRON_MASS, 1e47, PotentialSpec::Harmonic { omega: 2e16 }).unwrap(),
        )
        .unwrap();
        let lv = standard_levels(&h, 6.0).unwrap();
        assert_eq!(lv.len(), 3);
        for (l, want) in lv.iter().zip([1.0, 3.0, 5.0]) {
            assert!((l - want).abs() < 1e-8, "{l}");
        }
        let lin = canonical_problem(
            &PhysicalSetup::new(ELECTRON_MASS, 1e47, PotentialSpec::Linear { slope: 1e-8 }).unwrap(),
        )
        .unwrap();
        // first zeros of the Airy function, negated
        let lv = standard_levels(&lin, 6.0).unwrap();
        for (l, want) in lv.iter().zip([2.338_107_410_459_767, 4.087_949_444_130_971, 5.520_559_828_095_551]) {
            assert!((l - want).abs() < 1e-7, "{l}");
        }
    }
}

//! Boundary conditions, constraint assembly and bound-state extraction.

use crate::basis::{fundamental_basis, AsymptoticClass, Basis, BasisFunction, Side};
use crate::error::{Error, Result};
use crate::problem::{DimensionlessProblem, PotentialKind};
use crate::quadrature::{integrate_vec, QuadOptions};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Default relative rank tolerance.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ConditionKind {
    PointZero(f64),
    DecayAtPlusInfinity,
    DecayAtMinusInfinity,
    /// `phi = 0` on the ray beyond `cut` toward `side`; acts as a wall at `cut`.
    VanishOnRay { side: Side, cut: f64 },
    /// `phi^(order)(x) = 0`; opt-in extra condition.
    DerivativeZero { x: f64, order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryCondition {
    pub kind: ConditionKind,
    /// Key condition (ensures boundedness) as opposed to an auxiliary one.
    pub is_key: bool,
}

impl BoundaryCondition {
    pub fn point_zero(x: f64) -> Self {
        BoundaryCondition { kind: ConditionKind::PointZero(x), is_key: true }
    }
    pub fn decay_plus() -> Self {
        BoundaryCondition { kind: ConditionKind::DecayAtPlusInfinity, is_key: true }
    }
    pub fn decay_minus() -> Self {
        BoundaryCondition { kind: ConditionKind::DecayAtMinusInfinity, is_key: true }
    }
    pub fn vanish_on_ray(side: Side, cut: f64) -> Self {
        BoundaryCondition { kind: ConditionKind::VanishOnRay { side, cut }, is_key: true }
    }
    pub fn derivative_zero(x: f64, order: usize) -> Self {
        BoundaryCondition { kind: ConditionKind::DerivativeZero { x, order }, is_key: false }
    }

    /// Location and derivative order of a point row, if any.
    fn point(&self) -> Option<(f64, usize)> {
        match self.kind {
            ConditionKind::PointZero(x) => Some((x, 0)),
            ConditionKind::VanishOnRay { cut, .. } => Some((cut, 0)),
            ConditionKind::DerivativeZero { x, order } => Some((x, order)),
            _ => None,
        }
    }
}

/// The conditions imposed by the potential itself: walls where it is
/// infinite, decay where it rises without bound.
pub fn natural_conditions(problem: &DimensionlessProblem) -> Vec<BoundaryCondition> {
    match problem.kind {
        PotentialKind::Well | PotentialKind::Custom => {
            vec![BoundaryCondition::point_zero(problem.domain.lo), BoundaryCondition::point_zero(problem.domain.hi)]
        }
        PotentialKind::Linear => vec![BoundaryCondition::point_zero(0.0), BoundaryCondition::decay_plus()],
        PotentialKind::Harmonic => vec![BoundaryCondition::decay_plus(), BoundaryCondition::decay_minus()],
    }
}

/// Add `phi^(order) = 0` at every wall of `conditions`.
pub fn with_derivative_conditions(conditions: &[BoundaryCondition], order: usize) -> Vec<BoundaryCondition> {
    let mut out = conditions.to_vec();
    for c in conditions {
        if let ConditionKind::PointZero(x) | ConditionKind::VanishOnRay { cut: x, .. } = c.kind {
            out.push(BoundaryCondition::derivative_zero(x, order));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Case {
    I,
    II,
    III,
    Unbound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CaseClassification {
    pub case: Case,
    pub kbc_count: usize,
    pub non_kbc_count: usize,
    pub predicted_dof: usize,
}

pub fn classify(conditions: &[BoundaryCondition]) -> Result<CaseClassification> {
    if conditions.is_empty() {
        return Err(Error::InvalidConditions("no conditions given".into()));
    }
    let mut walls = vec![];
    let mut left_rays = vec![];
    let mut right_rays = vec![];
    let (mut decay_plus, mut decay_minus) = (false, false);
    let mut non_kbc = 0;
    for c in conditions {
        if !c.is_key {
            non_kbc += 1;
            continue;
        }
        match c.kind {
            ConditionKind::PointZero(x) => walls.push(x),
            ConditionKind::VanishOnRay { side: Side::MinusInfinity, cut } => left_rays.push(cut),
            ConditionKind::VanishOnRay { side: Side::PlusInfinity, cut } => right_rays.push(cut),
            ConditionKind::DecayAtPlusInfinity => decay_plus = true,
            ConditionKind::DecayAtMinusInfinity => decay_minus = true,
            ConditionKind::DerivativeZero { .. } => non_kbc += 1,
        }
    }
    if conditions.iter().any(|c| c.point().map_or(false, |(x, _)| !x.is_finite())) {
        return Err(Error::InvalidConditions("condition location must be finite".into()));
    }
    let left_cut = left_rays.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let right_cut = right_rays.iter().copied().fold(f64::INFINITY, f64::min);
    if left_cut >= right_cut {
        return Err(Error::InvalidConditions(format!("rays cut at {left_cut} and {right_cut} leave no interior")));
    }
    if (decay_plus && !right_rays.is_empty()) || (decay_minus && !left_rays.is_empty()) {
        return Err(Error::InvalidConditions("decay imposed on a side that is already cut off".into()));
    }
    let mut sorted = walls.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidConditions("repeated wall location".into()));
    }
    let kbc = conditions.len() - non_kbc;
    let point_count = walls.len() + left_rays.len() + right_rays.len();
    let bounded_left = decay_minus || !left_rays.is_empty();
    let bounded_right = decay_plus || !right_rays.is_empty();
    // each wall removes one coefficient, each decay condition two
    let (case, removed) = if decay_plus && decay_minus {
        (Case::III, 2 + point_count)
    } else if decay_plus || decay_minus {
        if point_count >= 1 {
            (Case::II, 2 + point_count)
        } else {
            (Case::Unbound, 2)
        }
    } else if point_count >= 2 || (bounded_left && bounded_right) {
        (Case::I, point_count)
    } else {
        (Case::Unbound, point_count)
    };
    let predicted_dof = 4usize.saturating_sub(removed + non_kbc);
    Ok(CaseClassification { case, kbc_count: kbc, non_kbc_count: non_kbc, predicted_dof })
}

#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub condition: BoundaryCondition,
    pub values: [Complex64; 4],
}

#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub energy: f64,
    pub rows: Vec<ConstraintRow>,
    /// Columns forced to zero by decay rows.
    pub killed: [bool; 4],
    pub basis: Arc<Basis>,
}

impl ConstraintSystem {
    pub fn matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows.len(), 4, |i, j| self.rows[i].values[j])
    }
}

fn growing_columns(basis: &Basis, side: Side) -> Result<[bool; 4]> {
    let mut out = [false; 4];
    for (j, f) in basis.functions.iter().enumerate() {
        match f.class(side) {
            AsymptoticClass::Growing => out[j] = true,
            AsymptoticClass::Undefined => return Err(Error::ClassificationNeeded { index: f.index }),
            _ => {}
        }
    }
    Ok(out)
}

pub fn assemble(basis: &Arc<Basis>, conditions: &[BoundaryCondition], energy: f64) -> Result<ConstraintSystem> {
    if (energy - basis.energy).abs() > 1e-12 * energy.abs().max(1.0) {
        return Err(Error::Precondition(format!("basis was built at E = {}, not {energy}", basis.energy)));
    }
    let mut rows = vec![];
    let mut killed = [false; 4];
    for c in conditions {
        let side = match c.kind {
            ConditionKind::DecayAtPlusInfinity => Side::PlusInfinity,
            ConditionKind::DecayAtMinusInfinity => Side::MinusInfinity,
            _ => continue,
        };
        let g = growing_columns(basis, side)?;
        for j in 0..4 {
            if g[j] {
                killed[j] = true;
                let mut values = [ZERO; 4];
                values[j] = ONE;
                rows.push(ConstraintRow { condition: *c, values });
            }
        }
    }
    for c in conditions {
        let Some((x, order)) = c.point() else { continue };
        if order > 3 {
            return Err(Error::InvalidConditions(format!("derivative order {order} exceeds 3")));
        }
        if !basis.region.contains(x) {
            return Err(Error::InvalidConditions(format!("condition at x = {x} outside [{}, {}]", basis.region.lo, basis.region.hi)));
        }
        let mut values = [ZERO; 4];
        for j in 0..4 {
            if !killed[j] {
                values[j] = basis.functions[j].derivs(x)?[order];
            }
        }
        rows.push(ConstraintRow { condition: *c, values });
    }
    Ok(ConstraintSystem { energy, rows, killed, basis: Arc::clone(basis) })
}

#[derive(Debug, Clone, Serialize)]
pub struct Nullspace {
    pub nullity: usize,
    /// Orthonormal coefficient vectors.
    pub vectors: Vec<[Complex64; 4]>,
    /// Singular values of the column-scaled matrix, descending.
    pub singular_values: Vec<f64>,
    pub column_scales: [f64; 4],
}

fn orthonormalize(vs: &mut Vec<[Complex64; 4]>) {
    let mut out: Vec<[Complex64; 4]> = vec![];
    for v in vs.iter() {
        let mut w = *v;
        for _ in 0..2 {
            for u in &out {
                let d: Complex64 = (0..4).map(|k| u[k].conj() * w[k]).sum();
                for k in 0..4 {
                    w[k] -= d * u[k];
                }
            }
        }
        let n = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            out.push(w.map(|z| z / n));
        }
    }
    *vs = out;
}

/// Numerical nullspace with columns scaled to unit max magnitude first.
pub fn nullspace(system: &ConstraintSystem, rank_tol: f64) -> Result<Nullspace> {
    let m = system.matrix();
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Precondition("constraint matrix is not finite".into()));
    }
    let mut scales = [1.0; 4];
    for j in 0..4 {
        let s = m.column(j).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if s > 0.0 {
            scales[j] = s;
        }
    }
    let rows = m.nrows().max(4);
    let mut a = DMatrix::<Complex64>::zeros(rows, 4);
    for i in 0..m.nrows() {
        for j in 0..4 {
            a[(i, j)] = m[(i, j)] / scales[j];
        }
    }
    let unit = |j: usize| {
        let mut v = [ZERO; 4];
        v[j] = ONE;
        v
    };
    if a.iter().all(|z| *z == ZERO) {
        return Ok(Nullspace { nullity: 4, vectors: (0..4).map(unit).collect(), singular_values: vec![0.0; 4], column_scales: scales });
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let rank = sv.iter().filter(|&&s| s > rank_tol * sv[0]).count();
    let mut vectors = vec![];
    for &i in &order[rank..] {
        let mut c = [ZERO; 4];
        for j in 0..4 {
            c[j] = if system.killed[j] { ZERO } else { v_t[(i, j)].conj() / scales[j] };
        }
        vectors.push(c);
    }
    orthonormalize(&mut vectors);
    Ok(Nullspace { nullity: vectors.len(), vectors, singular_values: sv, column_scales: scales })
}

/// Determinant-form solution of two wall rows restricted to three
/// functions: the cross product of `[w_i(lo)]` and `[w_i(hi)]`.
pub fn well_coefficients(functions: [&BasisFunction; 3], lo: f64, hi: f64) -> Result<[Complex64; 3]> {
    let a: Vec<Complex64> = functions.iter().map(|f| f.value(lo)).collect::<Result<_>>()?;
    let b: Vec<Complex64> = functions.iter().map(|f| f.value(hi)).collect::<Result<_>>()?;
    let d = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let size: f64 = a.iter().chain(&b).map(|z| z.norm()).fold(0.0, f64::max);
    let dn = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(dn > 1e-13 * size * size) {
        return Err(Error::DegenerateConfiguration("determinant-form coefficients vanish".into()));
    }
    Ok(d)
}

/// Largest principal angle between the spans of two sets of coefficient vectors.
///
/// Computed from the part of `b` outside span `a` (sine form), which stays
/// accurate for tiny angles where `acos` of the cosines does not.
pub fn principal_angle(a: &[[Complex64; 4]], b: &[[Complex64; 4]]) -> f64 {
    let mut qa = a.to_vec();
    let mut qb = b.to_vec();
    orthonormalize(&mut qa);
    orthonormalize(&mut qb);
    if qa.len() != qb.len() || qa.is_empty() {
        return std::f64::consts::FRAC_PI_2;
    }
    let outside = DMatrix::from_fn(4, qb.len(), |k, j| {
        let v = &qb[j];
        let proj: Complex64 = qa
            .iter()
            .map(|u| u[k] * (0..4).map(|i| u[i].conj() * v[i]).sum::<Complex64>())
            .sum();
        v[k] - proj
    });
    let smax = outside.singular_values().iter().copied().fold(0.0, f64::max).min(1.0);
    smax.asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormalizeMode {
    /// Modified Gram-Schmidt in the overlap inner product.
    Orthogonal,
    /// Normalize each vector on its own (keeps non-orthogonal pairs as built).
    AsGiven,
}

/// A wavefunction `sum_j c_j w_j`.
#[derive(Debug, Clone)]
pub struct State {
    pub coefficients: [Complex64; 4],
    pub basis: Arc<Basis>,
}

impl State {
    pub fn jet<const N: usize>(&self, x: f64) -> Result<[Complex64; N]> {
        let mut out = [ZERO; N];
        for (j, c) in self.coefficients.iter().enumerate() {
            if *c == ZERO {
                continue;
            }
            let d = self.basis.functions[j].jet::<N>(x)?;
            for k in 0..N {
                out[k] += c * d[k];
            }
        }
        Ok(out)
    }

    pub fn derivs(&self, x: f64) -> Result<[Complex64; 4]> {
        self.jet::<4>(x)
    }

    pub fn value(&self, x: f64) -> Result<Complex64> {
        Ok(self.jet::<1>(x)?[0])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Gram {
    /// Basis indices (1-based) spanned by the matrix.
    pub columns: Vec<usize>,
    pub matrix: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub struct BoundStateSolution {
    pub energy: f64,
    pub energy_si: f64,
    pub degeneracy: usize,
    pub states: Vec<State>,
    pub gram: Gram,
}

/// Overlap matrix `F_ij = int w_i conj(w_j)` over the basis region for the given columns.
pub fn overlap_matrix(basis: &Basis, columns: &[usize], rel_tol: f64) -> Result<Vec<Vec<Complex64>>> {
    let a = columns.len();
    let mut pairs = vec![];
    for i in 0..a {
        for j in i..a {
            pairs.push((i, j));
        }
    }
    let funcs: Vec<&BasisFunction> = columns.iter().map(|&c| &basis.functions[c]).collect();
    let integrand = |x: f64| -> Result<Vec<Complex64>> {
        let v: Vec<Complex64> = funcs.iter().map(|f| f.value(x)).collect::<Result<_>>()?;
        Ok(pairs.iter().map(|&(i, j)| v[i] * v[j].conj()).collect())
    };
    let mut breaks = basis.breakpoints();
    let mut factor = 1.0;
    if basis.mirrored {
        breaks.retain(|x| *x >= 0.0);
        factor = 2.0;
    }
    let opts = QuadOptions { abs_tol: 1e-14, rel_tol, max_intervals: 4000, initial_pieces: 8 };
    let mut total = vec![ZERO; pairs.len()];
    for w in breaks.windows(2) {
        let r = integrate_vec(integrand, w[0], w[1], pairs.len(), &opts)?;
        for (t, v) in total.iter_mut().zip(r.value) {
            *t += v * factor;
        }
    }
    let mut f = vec![vec![ZERO; a]; a];
    for (p, &(i, j)) in pairs.iter().enumerate() {
        f[i][j] = total[p];
        f[j][i] = total[p].conj();
    }
    Ok(f)
}

pub fn normalize(vectors: &[[Complex64; 4]], basis: &Arc<Basis>, mode: NormalizeMode) -> Result<BoundStateSolution> {
    if vectors.is_empty() {
        return Err(Error::Normalization("no coefficient vectors".into()));
    }
    let mut columns = vec![];
    for j in 0..4 {
        if vectors.iter().any(|v| v[j] != ZERO) {
            columns.push(j);
        }
    }
    if basis.far.is_some() {
        for &j in &columns {
            if basis.functions[j].class_plus != AsymptoticClass::Decaying {
                return Err(Error::Normalization(format!("basis function {} is not integrable", j + 1)));
            }
        }
    }
    let f = overlap_matrix(basis, &columns, 1e-11)?;
    let form = |u: &[Complex64; 4], v: &[Complex64; 4]| -> Complex64 {
        let mut s = ZERO;
        for (a, &i) in columns.iter().enumerate() {
            for (b, &j) in columns.iter().enumerate() {
                s += u[i] * f[a][b] * v[j].conj();
            }
        }
        s
    };
    let mut states: Vec<[Complex64; 4]> = vec![];
    for v in vectors {
        let n0 = form(v, v).re;
        if !(n0 > 0.0) {
            return Err(Error::Normalization("zero or non-integrable state".into()));
        }
        let mut w = *v;
        if mode == NormalizeMode::Orthogonal {
            for _ in 0..2 {
                for u in &states {
                    let d = form(&w, u);
                    for k in 0..4 {
                        w[k] -= d * u[k];
                    }
                }
            }
        }
        let n = form(&w, &w).re;
        if !(n > 1e-20 * n0) {
            return Err(Error::Normalization("states are linearly dependent".into()));
        }
        states.push(w.map(|z| z / n.sqrt()));
    }
    let degeneracy = states.len();
    Ok(BoundStateSolution {
        energy: basis.energy,
        energy_si: basis.energy * basis.energy_scale,
        degeneracy,
        states: states.into_iter().map(|c| State { coefficients: c, basis: Arc::clone(basis) }).collect(),
        gram: Gram { columns: columns.iter().map(|j| j + 1).collect(), matrix: f },
    })
}

/// Basis, natural conditions, nullspace and normalization at one energy.
pub fn bound_states(problem: &DimensionlessProblem, energy: f64, mode: NormalizeMode) -> Result<BoundStateSolution> {
    let basis = Arc::new(fundamental_basis(problem, energy)?);
    let sys = assemble(&basis, &natural_conditions(problem), energy)?;
    let ns = nullspace(&sys, RANK_TOL)?;
    if ns.nullity == 0 {
        return Err(Error::Normalization("no admissible states at this energy".into()));
    }
    normalize(&ns.vectors, &basis, mode)
}

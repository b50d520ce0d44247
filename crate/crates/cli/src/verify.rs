//! Self-checks on the configured setup: Wronskian constancy, decaying
//! subspace dimensions, state residuals, agreement of the matched states
//! with direct integration, and the momentum-representation count.

use crate::commands::{momentum_figures, Context, Outcome};
use crate::output::OutDir;
use crate::Failure;
use gup_bic::basis::Side;
use gup_bic::matcher::{bound_states, classify, natural_conditions, NormalizeMode};
use gup_bic::ode::Tolerance;
use gup_bic::oracle::{decaying_subspace_dimension, integrate, residual, StateVector, WronskianProfile};
use gup_bic::problem::PotentialKind;
use serde::Serialize;

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
    value: f64,
    threshold: f64,
    detail: String,
}

#[derive(Serialize)]
struct Report {
    potential: String,
    epsilon: f64,
    energy_si: f64,
    energy: f64,
    all_passed: bool,
    checks: Vec<Check>,
}

fn check(name: &str, value: f64, threshold: f64, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, value, threshold, detail: detail.into() }
}

/// Finite stretch of the domain the checks work on.
fn window(ctx: &Context) -> (f64, f64) {
    let d = ctx.problem.domain;
    match ctx.problem.kind {
        PotentialKind::Linear => (0.0, 6.0),
        PotentialKind::Harmonic => (-4.0, 4.0),
        _ => (d.lo, d.hi),
    }
}

fn default_energy(ctx: &Context) -> f64 {
    match ctx.problem.kind {
        PotentialKind::Well => 4.0,
        PotentialKind::Linear => 3.0,
        PotentialKind::Harmonic => 2.0,
        PotentialKind::Custom => {
            let d = ctx.problem.domain;
            let vmax = (0..=64)
                .map(|i| ctx.problem.potential.value(d.lo + d.width() * i as f64 / 64.0))
                .fold(f64::NEG_INFINITY, f64::max);
            vmax + 4.0 / (d.width() * d.width())
        }
    }
}

pub fn run(ctx: &Context, out: &mut OutDir, energy_si: Option<f64>) -> Outcome {
    let p = &ctx.problem;
    let e = match energy_si {
        Some(v) if v.is_finite() && v > 0.0 => p.energy_from_si(v),
        Some(v) => return Err(Failure::Input(format!("--E must be positive and finite, got {v}"))),
        None => default_energy(ctx),
    };
    let tol = Tolerance::relative(ctx.tol);
    let mut checks = vec![];
    let (lo, hi) = window(ctx);

    // Wronskian of the canonical system stays at its initial value 1
    let w = WronskianProfile::new(p, e, lo, hi, tol)?;
    let mut drift = 0.0f64;
    for i in 0..=40 {
        let x = lo + (hi - lo) * i as f64 / 40.0;
        let (sign, ln) = w.log_at(x)?;
        drift = drift.max((sign * ln.exp() - 1.0).abs());
    }
    checks.push(check("wronskian_constant", drift, 1e-8, drift <= 1e-8, format!("relative drift on [{lo}, {hi}]")));

    // one decaying dimension per open side in the standard limit, two otherwise
    let expected = if p.is_standard() { 1 } else { 2 };
    let sides: &[(Side, &str)] = match p.kind {
        PotentialKind::Harmonic => &[(Side::PlusInfinity, "plus"), (Side::MinusInfinity, "minus")],
        PotentialKind::Linear => &[(Side::PlusInfinity, "plus")],
        _ => &[],
    };
    for (side, label) in sides {
        let d = decaying_subspace_dimension(p, e, *side)?;
        checks.push(check(
            &format!("decaying_subspace_dimension_{label}"),
            d as f64,
            expected as f64,
            d == expected,
            if p.is_standard() { "standard mode" } else { "fourth-order mode" },
        ));
    }

    if !p.is_standard() {
        let sol = bound_states(p, e, NormalizeMode::Orthogonal)?;
        let predicted = classify(&natural_conditions(p))?.predicted_dof;
        checks.push(check(
            "degeneracy",
            sol.degeneracy as f64,
            predicted as f64,
            sol.degeneracy == predicted,
            "nullspace dimension against the boundary-condition count",
        ));
        let basis = &sol.states[0].basis;
        let (a, b) = match &basis.far {
            Some(f) => (if basis.mirrored { -f.launch } else { basis.region.lo }, f.launch),
            None => (basis.region.lo, basis.region.hi),
        };
        let grid: Vec<f64> = (0..=60).map(|i| a + (b - a) * i as f64 / 60.0).collect();
        let mut worst = 0.0f64;
        for s in &sol.states {
            worst = worst.max(residual(|x| s.jet::<5>(x), p, e, &grid)?);
        }
        checks.push(check("state_residual", worst, 1e-6, worst <= 1e-6, "largest relative residual in the matched region"));

        // the matched state against direct integration from the middle of
        // the region, over a reach where the fast modes grow at most e^8
        // mirrored states are even extensions, smooth only on each side of 0
        let a = if basis.mirrored { 0.0 } else { a };
        let mid = 0.5 * (a + b);
        let reach = (8.0 * p.epsilon.sqrt()).min(0.5 * (b - a));
        let mut gap = 0.0f64;
        for s in &sol.states {
            let d = s.derivs(mid)?;
            let init = StateVector::new(d[0], d[1], d[2], d[3]);
            for to in [mid - reach, mid + reach] {
                let t = integrate(p, e, init, mid, to, tol)?;
                let got = t.eval(to)?.phi();
                let want = s.value(to)?;
                let scale = (0..=20)
                    .map(|i| s.value(mid - reach + 2.0 * reach * i as f64 / 20.0).map(|v| v.norm()))
                    .collect::<Result<Vec<_>, _>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
                gap = gap.max((got - want).norm() / scale);
            }
        }
        checks.push(check("oracle_agreement", gap, 1e-6, gap <= 1e-6, "matched states against direct integration"));
    }

    if p.kind == PotentialKind::Linear {
        let (worst, dim, wr) = momentum_figures(ctx, p.energy_to_si(e))?;
        checks.push(check("momentum_residual", worst, 1e-10, worst <= 1e-10, "first-order momentum equation"));
        checks.push(check("momentum_dimension", dim as f64, 1.0, dim == 1, "momentum-space solution count"));
        checks.push(check("position_wronskian", wr, 0.0, wr != 0.0, "position-space system is non-degenerate"));
    }

    let all_passed = checks.iter().all(|c| c.passed);
    let report = Report {
        potential: p.kind.to_string(),
        epsilon: p.epsilon,
        energy_si: p.energy_to_si(e),
        energy: e,
        all_passed,
        checks,
    };
    out.write_json("verify.json", &report).map_err(|e| Failure::Input(format!("cannot write output: {e}")))?;
    if all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

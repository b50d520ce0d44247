use crate::output::{digest, OutDir, RunManifest};
use crate::{verify, Cli, Command, Common, Failure, ModeArg};
use gup_bic::config::{parse_entries, render};
use gup_bic::matcher::{bound_states, NormalizeMode};
use gup_bic::oracle::momentum_rep_linear;
use gup_bic::problem::{canonical_problem, DimensionlessProblem, PhysicalSetup, PotentialKind};
use gup_bic::spectrum::{
    critical_beta_exponent, dof_scan, momentum_moments, observability, oscillatory_first, standard_levels,
    well_special_energies, Observability,
};
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

pub type Outcome = Result<(), Failure>;

pub struct Context {
    pub setup: PhysicalSetup,
    pub problem: DimensionlessProblem,
    pub tol: f64,
    config_path: Option<String>,
    config_digest: String,
    resolved: String,
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::Input(format!("cannot write output: {e}"))
}

fn load(cli: &Cli, common: &Common) -> Result<Context, Failure> {
    let (text, base, bytes) = match &cli.config {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| Failure::Input(format!("cannot read config {}: {e}", path.display())))?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Failure::Input(format!("config {} is not UTF-8", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (text, base, Some(bytes))
        }
        None => (String::new(), Default::default(), None),
    };
    let entries = parse_entries(&text)?;
    let setup = entries.setup(common.potential.map(|p| p.name()), &base)?;
    let problem = canonical_problem(&setup)?;
    let custom = entries.values.get("custom_file").map(|(v, _)| v.as_str());
    let resolved = render(&setup, custom);
    let config_digest = digest(bytes.as_deref().unwrap_or(resolved.as_bytes()));
    if !(cli.tol >= 1e-14 && cli.tol <= 1e-6) {
        return Err(Failure::Input(format!("--tol must lie in [1e-14, 1e-6], got {}", cli.tol)));
    }
    Ok(Context {
        setup,
        problem,
        tol: cli.tol,
        config_path: cli.config.as_ref().map(|p| p.display().to_string()),
        config_digest,
        resolved,
    })
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Wavefunction { common, .. }
        | Command::DofScan { common, .. }
        | Command::Spectrum { common, .. }
        | Command::Observability { common, .. }
        | Command::MomentumCheck { common, .. }
        | Command::Verify { common, .. } => common,
    }
}

pub fn run(cli: &Cli) -> Outcome {
    let start = Instant::now();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(format!("--threads: {e}")))?;
    }
    let ctx = load(cli, common(&cli.command))?;
    let mut out = OutDir::create(&cli.out).map_err(io_failure)?;
    let result = match &cli.command {
        Command::Wavefunction { energy, k, grid_n, mode, .. } => wavefunction(&ctx, &mut out, *energy, *k, *grid_n, *mode),
        Command::DofScan { e_min, e_max, n, .. } => scan(&ctx, &mut out, *e_min, *e_max, *n),
        Command::Spectrum { k_max, e_max, .. } => spectrum(&ctx, &mut out, *k_max, *e_max),
        Command::Observability { energy, threshold, .. } => observe(&ctx, &mut out, *energy, *threshold),
        Command::MomentumCheck { energy, .. } => momentum_check(&ctx, &mut out, *energy),
        Command::Verify { energy, .. } => verify::run(&ctx, &mut out, *energy),
    };
    // a failed verification still leaves a complete, re-runnable directory
    if result.is_ok() || matches!(result, Err(Failure::Verification(_))) {
        let mut outputs = out.written.clone();
        outputs.push("manifest.json".into());
        let manifest = RunManifest {
            command: cli.command.name().into(),
            args: std::env::args().collect(),
            config_path: ctx.config_path.clone(),
            config_digest: ctx.config_digest.clone(),
            resolved_config: ctx.resolved.clone(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            outputs,
            wall_time: start.elapsed().as_secs_f64(),
        };
        out.write_json("manifest.json", &manifest).map_err(io_failure)?;
    }
    result
}

fn positive(flag: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Failure::Input(format!("{flag} must be positive and finite, got {v}")))
    }
}

#[derive(Serialize)]
struct StateRecord {
    index: usize,
    coefficients: [num_complex::Complex64; 4],
}

#[derive(Serialize)]
struct WavefunctionReport {
    energy_si: f64,
    energy: f64,
    epsilon: f64,
    length_scale: f64,
    degeneracy: usize,
    /// Present when the family was rotated to put the pure sine first.
    oscillatory_first: bool,
    states: Vec<StateRecord>,
    gram_columns: Vec<usize>,
}

fn wavefunction(ctx: &Context, out: &mut OutDir, energy: Option<f64>, k: Option<usize>, grid_n: usize, mode: ModeArg) -> Outcome {
    if grid_n < 2 {
        return Err(Failure::Input(format!("--grid-n must be at least 2, got {grid_n}")));
    }
    let p = &ctx.problem;
    let e = match (energy, k) {
        (Some(e), None) => p.energy_from_si(positive("--E", e)?),
        (None, Some(k)) => {
            if k < 1 {
                return Err(Failure::Input("--k must be at least 1".into()));
            }
            well_special_energies(&ctx.setup, k)?[k - 1].energy
        }
        _ => return Err(Failure::Input("exactly one of --E and --k is required".into())),
    };
    let mode = match mode {
        ModeArg::Orthogonal => NormalizeMode::Orthogonal,
        ModeArg::AsGiven => NormalizeMode::AsGiven,
    };
    let sol = bound_states(p, e, mode)?;
    let rotated = if k.is_some() && mode == NormalizeMode::Orthogonal { oscillatory_first(&sol, 1e-8) } else { None };
    let states = rotated.clone().unwrap_or_else(|| sol.states.clone());
    let region = states[0].basis.region;
    let root = p.length_scale.sqrt();
    let mut csv = String::from("x_SI,x_tilde,state_index,re_phi,im_phi\n");
    for (i, s) in states.iter().enumerate() {
        for g in 0..grid_n {
            let x = region.lo + (region.hi - region.lo) * g as f64 / (grid_n - 1) as f64;
            let v = s.value(x)? / root;
            csv.push_str(&format!("{:.16e},{:.16e},{},{:.16e},{:.16e}\n", p.length_to_si(x), x, i + 1, v.re, v.im));
        }
    }
    out.write("wavefunctions.csv", csv.as_bytes()).map_err(io_failure)?;
    let report = WavefunctionReport {
        energy_si: p.energy_to_si(e),
        energy: e,
        epsilon: p.epsilon,
        length_scale: p.length_scale,
        degeneracy: sol.degeneracy,
        oscillatory_first: rotated.is_some(),
        states: states.iter().enumerate().map(|(i, s)| StateRecord { index: i + 1, coefficients: s.coefficients }).collect(),
        gram_columns: sol.gram.columns.clone(),
    };
    out.write_json("states.json", &report).map_err(io_failure)
}

fn scan(ctx: &Context, out: &mut OutDir, e_min: Option<f64>, e_max: f64, n: usize) -> Outcome {
    if n < 2 {
        return Err(Failure::Input(format!("--n must be at least 2, got {n}")));
    }
    let e_max = positive("--e-max", e_max)?;
    let grid: Vec<f64> = match e_min {
        None => (1..=n).map(|i| e_max * i as f64 / n as f64).collect(),
        Some(lo) => {
            let lo = positive("--e-min", lo)?;
            if lo >= e_max {
                return Err(Failure::Input("--e-min must be below --e-max".into()));
            }
            (0..n).map(|i| lo + (e_max - lo) * i as f64 / (n - 1) as f64).collect()
        }
    };
    let s = dof_scan(&ctx.setup, &grid)?;
    out.write("scan.csv", s.to_csv().as_bytes()).map_err(io_failure)?;
    out.write("scan.json", (s.to_json() + "\n").as_bytes()).map_err(io_failure)
}

fn spectrum(ctx: &Context, out: &mut OutDir, k_max: usize, e_max: f64) -> Outcome {
    let p = &ctx.problem;
    let e_max = positive("--e-max", e_max)?;
    let mut csv = String::from("index,E_SI,E_dimensionless,kind\n");
    let mut top = p.energy_from_si(e_max);
    if p.kind == PotentialKind::Well {
        if k_max < 1 {
            return Err(Failure::Input("--k-max must be at least 1".into()));
        }
        for s in well_special_energies(&ctx.setup, k_max)? {
            csv.push_str(&format!("{},{:.16e},{:.16e},special\n", s.k, s.energy_si, s.energy));
            top = top.max(s.energy);
        }
    }
    for (i, e) in standard_levels(p, top)?.into_iter().enumerate() {
        csv.push_str(&format!("{},{:.16e},{:.16e},standard\n", i + 1, p.energy_to_si(e), e));
    }
    out.write("spectrum.csv", csv.as_bytes()).map_err(io_failure)
}

#[derive(Serialize)]
struct StateObservability {
    index: usize,
    moments: gup_bic::spectrum::MomentumMoments,
    class: Observability,
}

#[derive(Serialize)]
struct ObservabilityReport {
    beta: f64,
    threshold: f64,
    /// Standard ground state: ratio and classification.
    ground_ratio: f64,
    ground_class: Observability,
    critical: gup_bic::spectrum::CriticalBeta,
    states: Vec<StateObservability>,
}

fn observe(ctx: &Context, out: &mut OutDir, energy: Option<f64>, threshold: f64) -> Outcome {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Failure::Input(format!("--threshold must be positive, got {threshold}")));
    }
    let critical = critical_beta_exponent(&ctx.setup)?;
    let ground_ratio = ctx.setup.beta() * critical.ground.p2;
    let ground_class = if ground_ratio >= threshold { Observability::Obvious } else { Observability::Inconspicuous };
    let mut states = vec![];
    if let Some(e) = energy {
        let e = ctx.problem.energy_from_si(positive("--E", e)?);
        let sol = bound_states(&ctx.problem, e, NormalizeMode::Orthogonal)?;
        for (i, s) in sol.states.iter().enumerate() {
            let m = momentum_moments(s, &ctx.problem)?;
            states.push(StateObservability { index: i + 1, class: observability(&m, threshold).class, moments: m });
        }
    }
    let r = ObservabilityReport { beta: ctx.setup.beta(), threshold, ground_ratio, ground_class, critical, states };
    out.write_json("observability.json", &r).map_err(io_failure)
}

#[derive(Serialize)]
struct MomentumReport {
    energy_si: f64,
    max_residual: f64,
    residual_threshold: f64,
    momentum_dimension: usize,
    position_wronskian: f64,
    position_dimension: usize,
    passed: bool,
}

pub fn momentum_figures(ctx: &Context, energy_si: f64) -> Result<(f64, usize, f64), Failure> {
    let sol = momentum_rep_linear(&ctx.setup, energy_si)?;
    let ps = sol.momentum_scale();
    let worst = (0..201).map(|i| sol.residual(ps * (-5.0 + 0.05 * i as f64))).fold(0.0, f64::max);
    let dim = sol.solution_space_dimension(-3.0 * ps, 3.0 * ps)?;
    let e = ctx.problem.energy_from_si(energy_si);
    let tol = gup_bic::ode::Tolerance::relative(ctx.tol);
    let w = gup_bic::oracle::WronskianProfile::new(&ctx.problem, e, 0.0, 5.0, tol)?.at(5.0)?;
    Ok((worst, dim, w.re))
}

fn momentum_check(ctx: &Context, out: &mut OutDir, energy: f64) -> Outcome {
    if ctx.problem.kind != PotentialKind::Linear {
        return Err(Failure::Input(format!("momentum-check needs the linear potential, got {}", ctx.problem.kind)));
    }
    let e = positive("--E", energy)?;
    let (worst, dim, w) = momentum_figures(ctx, e)?;
    let passed = worst <= 1e-10 && dim == 1 && w != 0.0;
    let r = MomentumReport {
        energy_si: e,
        max_residual: worst,
        residual_threshold: 1e-10,
        momentum_dimension: dim,
        position_wronskian: w,
        position_dimension: if w != 0.0 { gup_bic::system::order(ctx.problem.epsilon) } else { 0 },
        passed,
    };
    out.write_json("momentum.json", &r).map_err(io_failure)?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Verification("momentum-representation check failed".into()))
    }
}

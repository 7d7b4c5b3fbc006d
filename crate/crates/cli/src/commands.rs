use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use covpath::barrier::{
    barrier_weight, cardinality, dual_objective, gap_bound, initial_point, primal_objective, residual, rho_max,
};
use covpath::corrector::{corrector_solve, CorrectorConfig};
use covpath::path::{log_grid, run_online, run_path, OnlineConfig, PathConfig, RegularizationPath};
use covpath::reference::{newton_solve, OracleConfig};
use covpath::{PdFactor, Problem, SymMatrix};
use serde::Serialize;

use crate::args::{BenchArgs, OnlineArgs, SolveArgs, VerifyArgs};
use crate::error::{CliError, InputError};
use crate::generate::{generate_problem, GeneratorSpec};
use crate::io::{self, State};
use crate::summary::*;

/// Largest dimension for which `--verify` runs the dense Newton oracle.
pub const NEWTON_VERIFY_MAX_N: usize = 30;

/// Online results must match a from-scratch solve to this Frobenius distance.
pub const ONLINE_VERIFY_TOL: f64 = 1e-6;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    io::write_file(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| {
        InputError::Parse {
            path: path.to_path_buf(),
            row: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
        .into()
    })
}

pub fn matrix_file(dir: &Path, kind: char, index: usize) -> PathBuf {
    dir.join("matrices").join(format!("{kind}_{index:03}.csv"))
}

fn load_input(args: &SolveArgs) -> Result<(SymMatrix, InstanceInfo), CliError> {
    if args.seed.is_some() && args.gen.is_none() {
        return Err(CliError::Usage("--seed only applies together with --gen".into()));
    }
    if let Some(path) = &args.sigma {
        let sigma = io::load_covariance(path)?;
        let info = InstanceInfo {
            n: sigma.dim(),
            source: format!("file:{}", path.display()),
            seed: None,
        };
        return Ok((sigma, info));
    }
    if let Some(path) = &args.samples {
        let sigma = io::load_samples(path)?;
        let info = InstanceInfo {
            n: sigma.dim(),
            source: format!("samples:{}", path.display()),
            seed: None,
        };
        return Ok((sigma, info));
    }
    let mut spec: GeneratorSpec = args.gen.clone().ok_or_else(|| CliError::Usage("no input given".into()))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let sigma = generate_problem(&spec).sigma;
    let info = InstanceInfo {
        n: spec.n,
        source: format!("generator:{spec}"),
        seed: Some(spec.seed),
    };
    Ok((sigma, info))
}

fn validate_solve(args: &SolveArgs) -> Result<(), CliError> {
    let bad = |m: String| Err(CliError::Usage(m));
    if args.points == 0 {
        return bad("--points must be at least 1".into());
    }
    if !(args.rho_min_frac > 0.0 && args.rho_min_frac <= 1.0) || (args.points > 1 && args.rho_min_frac == 1.0) {
        return bad(format!("--rho-min-frac must lie in (0, 1), got {}", args.rho_min_frac));
    }
    if !(args.gap_target > 0.0 && args.gap_target.is_finite()) {
        return bad(format!("--gap-target must be positive, got {}", args.gap_target));
    }
    if !(args.zero_tol >= 0.0 && args.zero_tol < 1.0) {
        return bad(format!("--zero-tol must lie in [0, 1), got {}", args.zero_tol));
    }
    if !(args.sweep_fraction > 0.0 && args.sweep_fraction <= 1.0) {
        return bad(format!("--sweep-fraction must lie in (0, 1], got {}", args.sweep_fraction));
    }
    if let Some(tol) = args.residual_tol {
        if !(tol > 0.0) {
            return bad(format!("--residual-tol must be positive, got {tol}"));
        }
    }
    Ok(())
}

pub struct SolveOutput {
    pub summary: RunSummary,
    pub path: RegularizationPath,
    pub sigma: SymMatrix,
}

/// Runs `solve` and writes its artifacts. A truncated path still writes
/// everything it has before reporting [`CliError::PartialPath`].
pub fn solve(args: &SolveArgs) -> Result<SolveOutput, CliError> {
    validate_solve(args)?;
    let (sigma, instance) = load_input(args)?;
    let n = sigma.dim();
    let t = barrier_weight(n, args.gap_target);
    let mut cfg = PathConfig::for_sigma(&sigma);
    cfg.rho_grid = log_grid(rho_max(&sigma), args.points, args.rho_min_frac);
    cfg.t = t;
    cfg.mode = args.mode.into();
    cfg.zero_tol = args.zero_tol;
    cfg.corrector.sweep_fraction = args.sweep_fraction;
    cfg.corrector.tol_residual = args.residual_tol;
    let tol = cfg.corrector.residual_tolerance(n);

    let started = Instant::now();
    let path = run_path(&sigma, &cfg)?;
    let total_seconds = started.elapsed().as_secs_f64();

    let points: Vec<PointRecord> = path
        .points
        .iter()
        .map(|p| PointRecord {
            rho: p.rho,
            t,
            cardinality: p.cardinality,
            dual_obj: p.dual_obj,
            primal_obj: p.primal_obj,
            gap_bound: p.gap_bound,
            residual: p.residual,
            cg_iterations: p.cg_iterations,
            sweeps: p.sweeps,
            max_inverse_drift: p.max_inverse_drift,
        })
        .collect();
    let failure = path.failure.as_ref().map(|f| FailureRecord {
        index: f.index,
        rho: f.rho,
        message: f.error.to_string(),
    });
    let verification = if args.verify {
        Some(verify_points(&sigma, &path, t, tol)?)
    } else {
        None
    };
    let summary = RunSummary {
        schema: RUN_SUMMARY_SCHEMA_ID.into(),
        status: if failure.is_some() { "partial" } else { "complete" }.into(),
        instance,
        config: ConfigEcho {
            points: args.points,
            rho_min_frac: args.rho_min_frac,
            gap_target: args.gap_target,
            t,
            mode: args.mode.as_str().into(),
            zero_tol: args.zero_tol,
            sweep_fraction: args.sweep_fraction,
            eps: cfg.eps,
            tol_residual: tol,
        },
        points,
        failure,
        verification,
    };
    let timings = Timings {
        schema: TIMINGS_SCHEMA_ID.into(),
        total_seconds,
        points: path
            .points
            .iter()
            .map(|p| PointTiming {
                rho: p.rho,
                wall_time: p.wall_time,
            })
            .collect(),
    };
    write_solve_artifacts(&args.output, &sigma, &path, &summary, &timings, args.write_matrices)?;

    println!(
        "{} points, n = {n}, t = {t:e}, status {}; wrote {}",
        summary.points.len(),
        summary.status,
        args.output.display()
    );
    if let Some(v) = &summary.verification {
        println!(
            "verification: max fresh residual {:e}, weak duality {}, newton discrepancy {}",
            v.max_fresh_residual,
            v.weak_duality_holds,
            v.max_newton_discrepancy.map_or("skipped".into(), |d| format!("{d:e}"))
        );
    }
    if let Some(f) = &summary.failure {
        return Err(CliError::PartialPath {
            index: f.index,
            rho: f.rho,
            message: f.message.clone(),
        });
    }
    if summary.verification.as_ref().is_some_and(|v| !v.passed) {
        return Err(CliError::VerificationFailed("path points failed re-validation; see summary.json".into()));
    }
    Ok(SolveOutput { summary, path, sigma })
}

fn write_solve_artifacts(
    dir: &Path,
    sigma: &SymMatrix,
    path: &RegularizationPath,
    summary: &RunSummary,
    timings: &Timings,
    matrices: bool,
) -> Result<(), CliError> {
    io::create_dir(dir)?;
    write_json(&dir.join("summary.json"), summary)?;
    write_json(&dir.join("timings.json"), timings)?;
    io::write_matrix(&dir.join("sigma.csv"), sigma)?;

    let n = sigma.dim();
    let zero_tol = summary.config.zero_tol;
    let mut card = String::from("log_rho,cardinality_fraction\n");
    let mut cg = String::from("cardinality,cg_iterations\n");
    let mut edges = String::from("point,rho,i,j,value\n");
    for (k, p) in path.points.iter().enumerate() {
        let _ = writeln!(card, "{},{}", io::format_f64(p.rho.ln()), io::format_f64(p.cardinality as f64 / (n * n) as f64));
        let _ = writeln!(cg, "{},{}", p.cardinality, p.cg_iterations);
        let cut = zero_tol * p.x.max_abs();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = p.x.get(i, j);
                if v.abs() > cut {
                    let _ = writeln!(edges, "{k},{},{i},{j},{}", io::format_f64(p.rho), io::format_f64(v));
                }
            }
        }
    }
    io::write_file(&dir.join("plot_cardinality.csv"), &card)?;
    io::write_file(&dir.join("plot_cg_iterations.csv"), &cg)?;
    io::write_file(&dir.join("edges.csv"), &edges)?;

    if let Some(last) = path.points.last() {
        let state = State::new(sigma, &last.u, last.rho, summary.config.t);
        write_json(&dir.join("state.json"), &state)?;
    }
    if matrices {
        io::create_dir(&dir.join("matrices"))?;
        for (k, p) in path.points.iter().enumerate() {
            io::write_matrix(&matrix_file(dir, 'u', k), &p.u)?;
            io::write_matrix(&matrix_file(dir, 'x', k), &p.x)?;
        }
    }
    Ok(())
}

/// Largest eigenvalue squared bounds `‖J⁻¹‖₂`, since `J ⪰ U⁻¹ ⊗ U⁻¹`.
fn inverse_jacobian_bound(u: &SymMatrix) -> f64 {
    let lmax = u.as_matrix().clone().symmetric_eigen().eigenvalues.max();
    lmax * lmax
}

fn verify_points(sigma: &SymMatrix, path: &RegularizationPath, t: f64, tol: f64) -> Result<SolveVerification, CliError> {
    let n = sigma.dim();
    let mut max_fresh: f64 = 0.0;
    let mut weak = true;
    let mut newton_ok = true;
    let mut max_newton: Option<f64> = None;
    for p in &path.points {
        let problem = Problem::new(sigma.clone(), p.rho)?;
        let fresh = PdFactor::new(p.u.clone())?;
        let h = residual(&problem, &fresh, t)?.norm();
        max_fresh = max_fresh.max(h);
        let gap = dual_objective(&fresh) - primal_objective(&problem, fresh.inverse())?;
        weak &= gap >= -1e-12 * dual_objective(&fresh).abs().max(1.0) && gap <= gap_bound(n, t) + 10.0 * tol;
        if n <= NEWTON_VERIFY_MAX_N {
            let oracle = newton_solve(&problem, &p.u, t, &OracleConfig::default())?;
            let d = oracle.matrix().frobenius_dist(&p.u);
            let oracle_h = residual(&problem, &oracle, t)?.norm();
            newton_ok &= d <= 2.0 * inverse_jacobian_bound(&p.u) * (h + oracle_h) + 1e-12;
            max_newton = Some(max_newton.unwrap_or(0.0).max(d));
        }
    }
    Ok(SolveVerification {
        max_fresh_residual: max_fresh,
        weak_duality_holds: weak,
        max_newton_discrepancy: max_newton,
        passed: max_fresh <= tol && weak && newton_ok,
    })
}

pub struct OnlineOutput {
    pub report: OnlineReport,
    pub u: SymMatrix,
}

/// From-scratch solve at `(Σ, ρ, t)`: the one-point path when `ρ <= ρ_max`,
/// otherwise a correction of the diagonal start (feasible for every
/// `ρ >= ρ_max`).
pub fn solve_from_scratch(sigma: &SymMatrix, rho: f64, t: f64, corrector: &CorrectorConfig) -> Result<PdFactor, CliError> {
    let rmax = rho_max(sigma);
    if rho <= rmax {
        let mut cfg = PathConfig::for_sigma(sigma);
        cfg.rho_grid = vec![rho];
        cfg.t = t;
        cfg.corrector = corrector.clone();
        let mut path = run_path(sigma, &cfg)?;
        if let Some(f) = path.failure {
            return Err(f.error.into());
        }
        let u = path.points.pop().expect("one-point path").u;
        Ok(PdFactor::new(u)?)
    } else {
        let p = Problem::new(sigma.clone(), rho)?;
        let u0 = initial_point(sigma, 0.01)?;
        Ok(corrector_solve(&p, &u0, t, corrector)?.factor)
    }
}

pub fn online(args: &OnlineArgs) -> Result<OnlineOutput, CliError> {
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let state = State::load(&args.state)?;
    let (sigma, u_star) = state.matrices(&args.state)?;
    let c = io::load_perturbation(&args.perturbation)?;
    let n = sigma.dim();
    if c.dim() != n {
        return Err(InputError::Invalid {
            path: args.perturbation.clone(),
            message: format!("perturbation is {0}x{0}, state is {n}x{n}", c.dim()),
        }
        .into());
    }
    let target_sigma = sigma.axpy(1.0, &c);
    if let Some(i) = target_sigma.diagonal().iter().position(|&v| !(v > 0.0)) {
        return Err(InputError::NonPositiveDiagonal {
            path: args.perturbation.clone(),
            index: i,
            value: target_sigma.get(i, i),
        }
        .into());
    }
    let tol = args.residual_tol.unwrap_or(1e-10 * n as f64);
    let problem = Problem::new(sigma, state.rho)?;
    let mut cfg = OnlineConfig {
        k: args.k,
        ..OnlineConfig::default()
    };
    cfg.corrector = cfg.corrector.with_tolerance(tol);
    let out = run_online(&problem, &u_star, &c, state.t, &cfg)?;

    let target = Problem::new(target_sigma.clone(), state.rho)?;
    let res = residual(&target, &out.factor, state.t)?.norm();
    let verification = if args.verify {
        let scratch = solve_from_scratch(&target_sigma, state.rho, state.t, &cfg.corrector)?;
        let d = scratch.matrix().frobenius_dist(out.factor.matrix());
        Some(OnlineVerification {
            frobenius_discrepancy: d,
            tolerance: ONLINE_VERIFY_TOL,
            passed: d <= ONLINE_VERIFY_TOL,
        })
    } else {
        None
    };
    let report = OnlineReport {
        schema: ONLINE_REPORT_SCHEMA_ID.into(),
        n,
        rho: state.rho,
        t: state.t,
        k: args.k,
        steps: out.steps,
        step_halvings: out.step_halvings,
        sweeps: out.sweeps,
        cg_iterations: out.cg_iterations,
        residual: res,
        perturbation_norm: c.frobenius_norm(),
        verification,
    };

    let dir = &args.output;
    io::create_dir(dir)?;
    write_json(&dir.join("online.json"), &report)?;
    io::write_matrix(&dir.join("u.csv"), out.factor.matrix())?;
    io::write_matrix(&dir.join("x.csv"), out.factor.inverse())?;
    write_json(
        &dir.join("state.json"),
        &State::new(&target_sigma, out.factor.matrix(), state.rho, state.t),
    )?;

    println!(
        "online re-solve: {} step(s), {} sweep(s), residual {:e}; wrote {}",
        report.steps,
        report.sweeps,
        report.residual,
        dir.display()
    );
    if let Some(v) = &report.verification {
        println!("from-scratch discrepancy {:e} (tolerance {:e})", v.frobenius_discrepancy, v.tolerance);
        if !v.passed {
            return Err(CliError::VerificationFailed(format!(
                "online solution differs from the from-scratch solve by {:e}",
                v.frobenius_discrepancy
            )));
        }
    }
    Ok(OnlineOutput {
        report,
        u: out.factor.into_matrix(),
    })
}

pub fn bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    if args.sizes.iter().any(|&n| n < 2) || args.lengths.contains(&0) || args.replicates == 0 {
        return Err(CliError::Usage("sizes must be >= 2, lengths and replicates >= 1".into()));
    }
    let mut rows = Vec::new();
    println!("{:>6} {:>7} {:>12} {:>9}", "n", "points", "median (s)", "complete");
    for &points in &args.lengths {
        for &n in &args.sizes {
            let seeds: Vec<u64> = (0..args.replicates as u64).map(|r| args.seed + r).collect();
            let mut wall_times = Vec::new();
            let mut complete = true;
            for &seed in &seeds {
                let spec = GeneratorSpec::new(n, args.density, seed);
                spec.validate().map_err(CliError::Usage)?;
                let sigma = generate_problem(&spec).sigma;
                let mut cfg = PathConfig::for_sigma(&sigma);
                cfg.rho_grid = log_grid(rho_max(&sigma), points, 0.01);
                cfg.t = barrier_weight(n, args.gap_target);
                let started = Instant::now();
                let path = run_path(&sigma, &cfg)?;
                wall_times.push(started.elapsed().as_secs_f64());
                complete &= path.is_complete();
            }
            let row = BenchRow {
                n,
                points,
                median_wall_time: median(&wall_times),
                seeds,
                wall_times,
                complete,
            };
            println!("{:>6} {:>7} {:>12.4} {:>9}", row.n, row.points, row.median_wall_time, row.complete);
            rows.push(row);
        }
    }
    let medians_increasing = args
        .lengths
        .iter()
        .map(|&points| {
            let mut cells: Vec<&BenchRow> = rows.iter().filter(|r| r.points == points).collect();
            cells.sort_by_key(|r| r.n);
            MedianTrend {
                points,
                increasing: cells.windows(2).all(|w| w[1].median_wall_time > w[0].median_wall_time),
            }
        })
        .collect();
    let report = BenchReport {
        schema: BENCH_REPORT_SCHEMA_ID.into(),
        density: args.density,
        gap_target: args.gap_target,
        rows,
        medians_increasing,
    };
    if let Some(dir) = &args.output {
        io::create_dir(dir)?;
        write_json(&dir.join("bench.json"), &report)?;
    }
    Ok(report)
}

pub fn verify(args: &VerifyArgs) -> Result<VerifyReport, CliError> {
    let dir = &args.output;
    let summary: RunSummary = read_json(&dir.join("summary.json"))?;
    if summary.schema != RUN_SUMMARY_SCHEMA_ID {
        return Err(CliError::Usage(format!("unsupported summary schema `{}`", summary.schema)));
    }
    let sigma = io::load_covariance(&dir.join("sigma.csv"))?;
    let n = sigma.dim();
    let tol = summary.config.tol_residual;
    let mut max_residual: f64 = 0.0;
    let (mut weak, mut within, mut card_ok) = (true, true, true);
    for (k, rec) in summary.points.iter().enumerate() {
        let upath = matrix_file(dir, 'u', k);
        if !upath.exists() {
            return Err(CliError::Usage(format!(
                "{} is missing; rerun solve with --write-matrices",
                upath.display()
            )));
        }
        let u = io::load_covariance(&upath)?;
        let problem = Problem::new(sigma.clone(), rec.rho)?;
        let fresh = PdFactor::new(u)?;
        max_residual = max_residual.max(residual(&problem, &fresh, rec.t)?.norm());
        let dual = dual_objective(&fresh);
        let gap = dual - primal_objective(&problem, fresh.inverse())?;
        weak &= gap >= -1e-12 * dual.abs().max(1.0);
        within &= gap <= gap_bound(n, rec.t) + 10.0 * tol;
        card_ok &= cardinality(fresh.inverse(), summary.config.zero_tol) == rec.cardinality;
    }
    let report = VerifyReport {
        schema: VERIFY_REPORT_SCHEMA_ID.into(),
        points_checked: summary.points.len(),
        max_residual,
        tolerance: tol,
        weak_duality_holds: weak,
        gap_within_bound: within,
        cardinality_matches: card_ok,
        passed: max_residual <= tol && weak && within && card_ok,
    };
    write_json(&dir.join("verify.json"), &report)?;
    println!(
        "checked {} points: max residual {:e} (tolerance {:e}), weak duality {}, gap bound {}, cardinality {}",
        report.points_checked, report.max_residual, tol, weak, within, card_ok
    );
    if !report.passed {
        return Err(CliError::VerificationFailed("saved path does not re-validate; see verify.json".into()));
    }
    Ok(report)
}

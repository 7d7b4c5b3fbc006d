//! Regularization-path driver and online re-solve.
//!
//! The path runs over a descending penalty grid starting from the diagonal
//! sparse-end point. Each point is warm-started from the previous one
//! (scaling or tangent predictor) and corrected to the central path.

use std::time::Instant;

use crate::barrier::{
    cardinality, dual_objective, feasible, gap_bound, initial_point, multipliers, primal_objective, residual, rho_max,
    scaling_warm_start, CentralPathResidual, Problem,
};
use crate::corrector::{corrector_solve, CorrectorConfig, CorrectorOutcome};
use crate::error::{Error, Result};
use crate::predictor::{cg_solve, predictor_step, CgConfig, PredictorSystem};
use crate::symmat::{PdFactor, SymMatrix};

/// How each grid point is warm-started from the previous one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Scaling,
    Predictor,
}

/// `points` log-spaced penalties from `rho_max` down to `min_frac · rho_max`.
pub fn log_grid(rho_max: f64, points: usize, min_frac: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![rho_max],
        _ => {
            let (hi, lo) = (rho_max.ln(), (min_frac * rho_max).ln());
            let mut grid: Vec<f64> = (0..points)
                .map(|k| (hi + (lo - hi) * k as f64 / (points - 1) as f64).exp())
                .collect();
            // Pin the endpoints; exp(ln x) can land one ulp above ρ_max.
            grid[0] = rho_max;
            grid[points - 1] = min_frac * rho_max;
            grid
        }
    }
}

#[derive(Clone, Debug)]
pub struct PathConfig {
    /// Strictly descending penalties; the first must not exceed `ρ_max`.
    pub rho_grid: Vec<f64>,
    pub t: f64,
    pub mode: Mode,
    pub corrector: CorrectorConfig,
    pub cg: CgConfig,
    /// Margin of the diagonal start.
    pub eps: f64,
    /// Relative cutoff for counting nonzeros of `X`.
    pub zero_tol: f64,
}

impl PathConfig {
    /// Defaults: 50 log-spaced points down to `0.01 ρ_max`, `t = gap/(2n²)`
    /// with `gap = 1e-3`.
    pub fn for_sigma(sigma: &SymMatrix) -> Self {
        let n = sigma.dim();
        Self {
            rho_grid: log_grid(rho_max(sigma), 50, 0.01),
            t: crate::barrier::barrier_weight(n, 1e-3),
            mode: Mode::Scaling,
            corrector: CorrectorConfig::default(),
            cg: CgConfig::default(),
            eps: 0.01,
            zero_tol: 1e-4,
        }
    }

    fn validate(&self, sigma: &SymMatrix) -> Result<()> {
        if self.rho_grid.is_empty() {
            return Err(Error::InvalidArgument("empty penalty grid".into()));
        }
        if self.rho_grid.windows(2).any(|w| !(w[1] < w[0])) || self.rho_grid.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidArgument("penalty grid must be positive and strictly descending".into()));
        }
        let rmax = rho_max(sigma);
        if self.rho_grid[0] > rmax {
            return Err(Error::InvalidArgument(format!(
                "first penalty {} exceeds rho_max {rmax}",
                self.rho_grid[0]
            )));
        }
        if !(self.t > 0.0) {
            return Err(Error::InvalidArgument(format!("barrier weight must be positive, got {}", self.t)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PathPoint {
    pub rho: f64,
    pub u: SymMatrix,
    /// Primal estimate `U⁻¹`.
    pub x: SymMatrix,
    pub cardinality: usize,
    pub dual_obj: f64,
    pub primal_obj: f64,
    pub gap_bound: f64,
    pub residual: f64,
    pub cg_iterations: usize,
    pub sweeps: usize,
    pub max_inverse_drift: f64,
    /// Seconds spent on this point (warm start plus correction).
    pub wall_time: f64,
}

#[derive(Debug)]
pub struct PathFailure {
    /// Grid index that could not be solved.
    pub index: usize,
    pub rho: f64,
    pub error: Error,
}

#[derive(Debug)]
pub struct RegularizationPath {
    pub points: Vec<PathPoint>,
    /// Set when the path was truncated.
    pub failure: Option<PathFailure>,
}

impl RegularizationPath {
    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

fn make_point(p: &Problem, out: &CorrectorOutcome, t: f64, cfg: &PathConfig, cg_iterations: usize, started: Instant) -> Result<PathPoint> {
    let f = &out.factor;
    let x = f.inverse().clone();
    Ok(PathPoint {
        rho: p.rho(),
        u: f.matrix().clone(),
        cardinality: cardinality(&x, cfg.zero_tol),
        dual_obj: dual_objective(f),
        primal_obj: primal_objective(p, &x)?,
        gap_bound: gap_bound(p.dim(), t),
        residual: out.stats.residual,
        cg_iterations,
        sweeps: out.stats.sweeps,
        max_inverse_drift: out.stats.max_inverse_drift,
        wall_time: started.elapsed().as_secs_f64(),
        x,
    })
}

/// Warm start for `rho_next` from the corrected point `prev` at `p.rho()`.
fn warm_start(p: &Problem, prev: &PdFactor, rho_next: f64, cfg: &PathConfig) -> Result<(SymMatrix, usize)> {
    match cfg.mode {
        Mode::Scaling => Ok((scaling_warm_start(p.sigma(), prev.matrix(), p.rho(), rho_next), 0)),
        Mode::Predictor => {
            let out = predictor_step(p, prev, cfg.t, rho_next - p.rho(), &cfg.cg)?;
            Ok((out.u, out.cg_iterations))
        }
    }
}

/// Traces the central path over `cfg.rho_grid`.
///
/// A grid point whose correction fails is retried once through the
/// midpoint penalty (scaling warm start into the midpoint, correct, then
/// on to the grid point). If that also fails the path is truncated and the
/// failure recorded; points already computed are kept.
pub fn run_path(sigma: &SymMatrix, cfg: &PathConfig) -> Result<RegularizationPath> {
    cfg.validate(sigma)?;
    let rmax = rho_max(sigma);
    let start = initial_point(sigma, cfg.eps)?;
    let mut points = Vec::with_capacity(cfg.rho_grid.len());

    // The diagonal start is central-ish for ρ_max; carry it to the first grid value.
    let base = Problem::new(sigma.clone(), rmax)?;
    let mut prev_problem = base.clone();
    let mut prev_factor = PdFactor::new(start)?;

    for (index, &rho) in cfg.rho_grid.iter().enumerate() {
        let started = Instant::now();
        let p = base.with_rho(rho)?;
        let attempt = (|| -> Result<(CorrectorOutcome, usize)> {
            let (u0, cg_iters) = if index == 0 {
                (scaling_warm_start(sigma, prev_factor.matrix(), rmax, rho), 0)
            } else {
                warm_start(&prev_problem, &prev_factor, rho, cfg)?
            };
            Ok((corrector_solve(&p, &u0, cfg.t, &cfg.corrector)?, cg_iters))
        })();
        let (outcome, cg_iters) = match attempt {
            Ok(v) => v,
            Err(first) => match retry_via_midpoint(&prev_problem, &prev_factor, &p, cfg) {
                Ok(out) => (out, 0),
                Err(_) => {
                    return Ok(RegularizationPath {
                        points,
                        failure: Some(PathFailure { index, rho, error: first }),
                    })
                }
            },
        };
        let point = make_point(&p, &outcome, cfg.t, cfg, cg_iters, started)?;
        points.push(point);
        prev_factor = outcome.factor;
        prev_problem = p;
    }
    Ok(RegularizationPath { points, failure: None })
}

fn retry_via_midpoint(prev: &Problem, prev_factor: &PdFactor, target: &Problem, cfg: &PathConfig) -> Result<CorrectorOutcome> {
    let mid_rho = 0.5 * (prev.rho() + target.rho());
    let mid = prev.with_rho(mid_rho)?;
    let u_mid = scaling_warm_start(prev.sigma(), prev_factor.matrix(), prev.rho(), mid_rho);
    let mid_out = corrector_solve(&mid, &u_mid, cfg.t, &cfg.corrector)?;
    let u0 = scaling_warm_start(prev.sigma(), mid_out.factor.matrix(), mid_rho, target.rho());
    corrector_solve(target, &u0, cfg.t, &cfg.corrector)
}

/// Central-path residual of the problem with covariance `Σ + μC`.
pub fn online_residual(p: &Problem, c: &SymMatrix, mu: f64, u: &PdFactor, t: f64) -> Result<CentralPathResidual> {
    residual(&shifted(p, c, mu)?, u, t)
}

fn shifted(p: &Problem, c: &SymMatrix, mu: f64) -> Result<Problem> {
    if c.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: c.dim(),
        });
    }
    Problem::new(p.sigma().axpy(mu, c), p.rho())
}

/// Tangent system in `μ` at a point central for `Σ + μC`: the Jacobian is
/// the same as for the penalty tangent, and `-∂Ĥ/∂μ = ((L̂² + M̂²)/t) ∘ C`.
pub fn online_system(p: &Problem, c: &SymMatrix, mu: f64, u: &PdFactor, t: f64) -> Result<PredictorSystem> {
    let state = multipliers(&shifted(p, c, mu)?, u.matrix(), t)?;
    let d = PredictorSystem::barrier_diagonal(&state);
    let rhs = d.hadamard(c);
    Ok(PredictorSystem::with_rhs(u.inverse().clone(), d, rhs))
}

#[derive(Clone, Debug)]
pub struct OnlineConfig {
    /// Number of nominal continuation steps in `μ`.
    pub k: usize,
    /// Smallest admissible `μ` step before giving up.
    pub min_step: f64,
    pub corrector: CorrectorConfig,
    pub cg: CgConfig,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            k: 1,
            min_step: 2f64.powi(-10),
            corrector: CorrectorConfig::default(),
            cg: CgConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OnlineOutcome {
    pub factor: PdFactor,
    /// Accepted `μ` steps.
    pub steps: usize,
    pub step_halvings: usize,
    pub sweeps: usize,
    pub cg_iterations: usize,
}

/// Moves a central point `U*` for `(Σ, ρ, t)` to the central point for
/// `(Σ + C, ρ, t)` by predictor–corrector continuation in `μ ∈ [0, 1]`.
///
/// Each step of nominal length `1/k` predicts `P = U + h ∂U/∂μ`. The shifted
/// point `S = U + hC` keeps every box slack unchanged, so when `P` leaves the
/// box the start is pulled back along `S + θ(P - S)` with `θ` halved as in
/// [`predictor_step`]. Only when `S` itself is not positive definite is the
/// `μ` step halved, down to `cfg.min_step`. A zero `C` returns `U*` as is.
pub fn run_online(p: &Problem, u_star: &SymMatrix, c: &SymMatrix, t: f64, cfg: &OnlineConfig) -> Result<OnlineOutcome> {
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if c.dim() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: c.dim(),
        });
    }
    let mut factor = PdFactor::new(u_star.clone())?;
    if !feasible(p, u_star) {
        return Err(Error::Infeasible("starting point is outside the box".into()));
    }
    let mut outcome = OnlineOutcome {
        factor: factor.clone(),
        steps: 0,
        step_halvings: 0,
        sweeps: 0,
        cg_iterations: 0,
    };
    if c.max_abs() == 0.0 {
        return Ok(outcome);
    }
    let nominal = 1.0 / cfg.k as f64;
    let mut mu = 0.0;
    while mu < 1.0 {
        let sys = online_system(p, c, mu, &factor, t)?;
        let cg = cg_solve(&sys, &cfg.cg);
        outcome.cg_iterations += cg.iterations;
        let mut h = nominal.min(1.0 - mu);
        let (target, u0, next_mu) = loop {
            let next_mu = if h >= 1.0 - mu { 1.0 } else { mu + h };
            let step = next_mu - mu;
            let target = shifted(p, c, next_mu)?;
            if let Some(u0) = blend_toward_shift(&target, factor.matrix(), &cg.direction, c, step) {
                break (target, u0, next_mu);
            }
            h *= 0.5;
            outcome.step_halvings += 1;
            if h < cfg.min_step {
                return Err(Error::Infeasible(format!(
                    "online continuation left the feasible region at mu = {mu}; \
                     split the perturbation into smaller pieces (larger k)"
                )));
            }
        };
        let out = corrector_solve(&target, &u0, t, &cfg.corrector)?;
        outcome.sweeps += out.stats.sweeps;
        factor = out.factor;
        mu = next_mu;
        outcome.steps += 1;
    }
    outcome.factor = factor;
    Ok(outcome)
}

/// First feasible point on `S + θ(P - S)`, `θ = 1, 1/2, …, 2⁻³⁰, 0`, with
/// `P = U + h·dir` and `S = U + h·C`.
fn blend_toward_shift(target: &Problem, u: &SymMatrix, dir: &SymMatrix, c: &SymMatrix, h: f64) -> Option<SymMatrix> {
    let predicted = u.axpy(h, dir);
    let anchor = u.axpy(h, c);
    let mut theta = 1.0;
    for _ in 0..=crate::predictor::MAX_HALVINGS {
        let cand = anchor.axpy(theta, &predicted.axpy(-1.0, &anchor));
        if feasible(target, &cand) {
            return Some(cand);
        }
        theta *= 0.5;
    }
    feasible(target, &anchor).then_some(anchor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::barrier_weight;
    use crate::symmat::tests::random_pd;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn log_grid_endpoints_and_order() {
        let g = log_grid(2.0, 5, 0.01);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 2.0).abs() < 1e-15);
        assert!((g[4] - 0.02).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        let ratios: Vec<f64> = g.windows(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-12));
        assert_eq!(log_grid(2.0, 1, 0.01), vec![2.0]);
    }

    #[test]
    fn invalid_grids_rejected() {
        let sigma = SymMatrix::from_diagonal(&[1.0, 2.0]);
        let mut cfg = PathConfig::for_sigma(&sigma);
        cfg.rho_grid = vec![1.0, 1.5];
        assert!(matches!(run_path(&sigma, &cfg), Err(Error::InvalidArgument(_))));
        cfg.rho_grid = vec![2.5];
        assert!(matches!(run_path(&sigma, &cfg), Err(Error::InvalidArgument(_))));
        cfg.rho_grid = vec![];
        assert!(matches!(run_path(&sigma, &cfg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn diagonal_sigma_gives_closed_form_path() {
        let sigma = SymMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let mut cfg = PathConfig::for_sigma(&sigma);
        cfg.rho_grid = log_grid(3.0, 5, 0.01);
        cfg.t = barrier_weight(3, 1e-6);
        let path = run_path(&sigma, &cfg).unwrap();
        assert!(path.is_complete());
        assert_eq!(path.points.len(), 5);
        for pt in &path.points {
            assert_eq!(pt.cardinality, 3);
            for i in 0..3 {
                let want = 1.0 / (sigma.get(i, i) + pt.rho);
                assert!((pt.x.get(i, i) - want).abs() <= 1e-4, "rho={} i={i}", pt.rho);
            }
        }
    }

    #[test]
    fn sparse_end_is_diagonal() {
        let mut rng = StdRng::seed_from_u64(307);
        let sigma = random_pd(6, &mut rng);
        let rmax = rho_max(&sigma);
        let mut cfg = PathConfig::for_sigma(&sigma);
        cfg.rho_grid = vec![0.999 * rmax];
        let path = run_path(&sigma, &cfg).unwrap();
        assert_eq!(path.points[0].cardinality, 6);
    }

    #[test]
    fn path_points_are_central_and_weakly_dual() {
        let mut rng = StdRng::seed_from_u64(311);
        let sigma = random_pd(8, &mut rng);
        let mut cfg = PathConfig::for_sigma(&sigma);
        cfg.rho_grid = log_grid(rho_max(&sigma), 10, 0.05);
        let path = run_path(&sigma, &cfg).unwrap();
        assert!(path.is_complete());
        let tol = cfg.corrector.residual_tolerance(8);
        let mut last_card = 0;
        for pt in &path.points {
            assert!(pt.residual <= tol);
            let gap = pt.dual_obj - pt.primal_obj;
            assert!(gap >= 0.0 && gap <= pt.gap_bound + 10.0 * tol, "gap {gap}");
            assert!(pt.cardinality >= last_card);
            last_card = pt.cardinality;
        }
    }

    #[test]
    fn predictor_and_scaling_modes_agree() {
        let mut rng = StdRng::seed_from_u64(313);
        let sigma = random_pd(6, &mut rng);
        let mut cfg = PathConfig::for_sigma(&sigma);
        cfg.rho_grid = log_grid(rho_max(&sigma), 8, 0.05);
        cfg.corrector = cfg.corrector.with_tolerance(1e-10);
        let a = run_path(&sigma, &cfg).unwrap();
        cfg.mode = Mode::Predictor;
        let b = run_path(&sigma, &cfg).unwrap();
        assert!(b.points.iter().skip(1).all(|p| p.cg_iterations > 0));
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert!(pa.x.frobenius_dist(&pb.x) <= 1e-6);
        }
    }

    #[test]
    fn path_is_deterministic() {
        let mut rng = StdRng::seed_from_u64(317);
        let sigma = random_pd(5, &mut rng);
        let mut cfg = PathConfig::for_sigma(&sigma);
        cfg.rho_grid = log_grid(rho_max(&sigma), 6, 0.05);
        let a = run_path(&sigma, &cfg).unwrap();
        let b = run_path(&sigma, &cfg).unwrap();
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert_eq!(pa.u, pb.u);
            assert_eq!(pa.sweeps, pb.sweeps);
        }
    }

    #[test]
    fn sweep_cap_truncates_path() {
        let mut rng = StdRng::seed_from_u64(331);
        let sigma = random_pd(6, &mut rng);
        let mut cfg = PathConfig::for_sigma(&sigma);
        cfg.rho_grid = log_grid(rho_max(&sigma), 6, 0.05);
        cfg.corrector.max_sweeps = 1;
        cfg.corrector = cfg.corrector.with_tolerance(1e-14);
        let path = run_path(&sigma, &cfg).unwrap();
        let failure = path.failure.expect("path should truncate");
        assert_eq!(failure.index, path.points.len());
        assert!(matches!(failure.error, Error::MaxSweepsExceeded { .. }));
    }

    fn central(sigma: &SymMatrix, frac: f64, t: f64, tol: f64) -> (Problem, PdFactor) {
        let p = Problem::new(sigma.clone(), frac * rho_max(sigma)).unwrap();
        let out = corrector_solve(&p, sigma, t, &CorrectorConfig::default().with_tolerance(tol)).unwrap();
        (p, out.factor)
    }

    #[test]
    fn online_residual_reductions() {
        let mut rng = StdRng::seed_from_u64(337);
        let sigma = random_pd(4, &mut rng);
        let t = 1e-3;
        let (p, u) = central(&sigma, 0.5, t, 1e-10);
        let c = SymMatrix::from_fn(4, |_, _| rng.random_range(-1e-3..1e-3));
        let base = residual(&p, &u, t).unwrap().h;
        assert_eq!(online_residual(&p, &SymMatrix::zeros(4), 0.7, &u, t).unwrap().h, base);
        assert_eq!(online_residual(&p, &c, 0.0, &u, t).unwrap().h, base);
        let shifted_p = Problem::new(sigma.axpy(1.0, &c), p.rho()).unwrap();
        let direct = residual(&shifted_p, &u, t).unwrap().h;
        assert_eq!(online_residual(&p, &c, 1.0, &u, t).unwrap().h, direct);
    }

    #[test]
    fn online_rhs_matches_finite_differences_in_mu() {
        let mut rng = StdRng::seed_from_u64(347);
        let sigma = random_pd(5, &mut rng);
        let t = 1e-2;
        let (p, u) = central(&sigma, 0.5, t, 1e-10);
        let c = SymMatrix::from_fn(5, |_, _| rng.random_range(-0.05..0.05));
        let mu = 0.3;
        let sys = online_system(&p, &c, mu, &u, t).unwrap();
        let delta = 1e-5;
        let up = online_residual(&p, &c, mu + delta, &u, t).unwrap().h;
        let dn = online_residual(&p, &c, mu - delta, &u, t).unwrap().h;
        let dh = up.axpy(-1.0, &dn).scale(0.5 / delta);
        assert!(dh.axpy(1.0, &sys.rhs).max_abs() <= 1e-6 * sys.rhs.max_abs().max(1.0));
    }

    #[test]
    fn online_zero_perturbation_is_identity() {
        let mut rng = StdRng::seed_from_u64(349);
        let sigma = random_pd(6, &mut rng);
        let t = 1e-4;
        let (p, u) = central(&sigma, 0.4, t, 1e-8);
        let out = run_online(&p, u.matrix(), &SymMatrix::zeros(6), t, &OnlineConfig::default()).unwrap();
        assert_eq!(out.factor.matrix(), u.matrix());
        assert_eq!(out.sweeps, 0);
    }

    #[test]
    fn online_matches_from_scratch() {
        let mut rng = StdRng::seed_from_u64(353);
        let n = 10;
        let sigma = random_pd(n, &mut rng);
        let t = barrier_weight(n, 1e-3);
        let tol = 1e-10;
        let (p, u) = central(&sigma, 0.3, t, tol);
        let c = SymMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let c = c.scale(1e-3 * sigma.frobenius_norm() / c.frobenius_norm());
        let mut cfg = OnlineConfig::default();
        cfg.corrector = cfg.corrector.with_tolerance(tol);
        let online = run_online(&p, u.matrix(), &c, t, &cfg).unwrap();
        let target = Problem::new(sigma.axpy(1.0, &c), p.rho()).unwrap();
        let scratch = corrector_solve(&target, target.sigma(), t, &cfg.corrector).unwrap();
        let diff = online.factor.matrix().frobenius_dist(scratch.factor.matrix());
        assert!(diff <= 1e-6, "diff {diff}");
        assert_eq!(online.steps, 1);
    }

    #[test]
    fn online_rejects_zero_k() {
        let sigma = SymMatrix::from_diagonal(&[1.0, 2.0]);
        let p = Problem::new(sigma.clone(), 0.5).unwrap();
        let cfg = OnlineConfig { k: 0, ..OnlineConfig::default() };
        assert!(run_online(&p, &sigma, &SymMatrix::zeros(2), 1e-3, &cfg).is_err());
    }
}

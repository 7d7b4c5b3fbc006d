//! The covariance selection instance and its central-path quantities.
//!
//! The dual problem minimizes `-log det U - n` over symmetric `U` in the box
//! `|U(i,j) - Σ(i,j)| ≤ ρ`. The barrier version replaces the box by a
//! weighted log barrier summed over all `n²` ordered pairs; its minimizer
//! satisfies `L - M = U⁻¹` where `L, M` are the scaled reciprocal slacks.

use crate::error::{Error, Result};
use crate::symmat::{cholesky_logdet, PdFactor, SymMatrix};

/// Sample covariance `Σ` together with the penalty `ρ`.
#[derive(Clone, Debug)]
pub struct Problem {
    sigma: SymMatrix,
    rho: f64,
}

impl Problem {
    pub fn new(sigma: SymMatrix, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!("rho must be > 0, got {rho}")));
        }
        if let Some(i) = sigma.diagonal().iter().position(|&d| !(d > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "sigma({i},{i}) must be positive"
            )));
        }
        Ok(Self { sigma, rho })
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new(self.sigma.clone(), rho)
    }

    /// Upper box edge minus `U`: `ρ + Σ - U`.
    #[inline]
    pub fn upper_slack(&self, u: &SymMatrix, i: usize, j: usize) -> f64 {
        self.rho + self.sigma.get(i, j) - u.get(i, j)
    }

    /// `U` minus lower box edge: `ρ - Σ + U`.
    #[inline]
    pub fn lower_slack(&self, u: &SymMatrix, i: usize, j: usize) -> f64 {
        self.rho - self.sigma.get(i, j) + u.get(i, j)
    }

    fn check_dim(&self, u: &SymMatrix) -> Result<()> {
        if u.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: u.dim(),
            });
        }
        Ok(())
    }

    /// First entry that violates the open box, if any.
    fn box_violation(&self, u: &SymMatrix) -> Option<(usize, usize)> {
        let n = self.dim();
        for j in 0..n {
            for i in 0..=j {
                let up = self.upper_slack(u, i, j);
                let lo = self.lower_slack(u, i, j);
                if !(up > 0.0 && lo > 0.0) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn in_box(&self, u: &SymMatrix) -> bool {
        u.dim() == self.dim() && self.box_violation(u).is_none()
    }
}

/// `ρ_max = max_i Σ(i,i)`: above this penalty the solution is diagonal.
pub fn rho_max(sigma: &SymMatrix) -> f64 {
    sigma.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Barrier weight for a target surrogate duality gap: `gap / (2n²)`.
pub fn barrier_weight(n: usize, gap_target: f64) -> f64 {
    gap_target / (2.0 * (n * n) as f64)
}

/// Barrier weight with the multiplier matrices of one iterate.
#[derive(Clone, Debug)]
pub struct BarrierState {
    pub t: f64,
    pub l: SymMatrix,
    pub m: SymMatrix,
}

/// `H = L - M - U⁻¹`; zero exactly on the central path.
#[derive(Clone, Debug)]
pub struct CentralPathResidual {
    pub h: SymMatrix,
}

impl CentralPathResidual {
    pub fn norm(&self) -> f64 {
        self.h.frobenius_norm()
    }
}

/// Strict dual feasibility: inside the open box and positive definite.
pub fn feasible(p: &Problem, u: &SymMatrix) -> bool {
    p.in_box(u) && cholesky_logdet(u).is_ok()
}

pub fn multipliers(p: &Problem, u: &SymMatrix, t: f64) -> Result<BarrierState> {
    p.check_dim(u)?;
    if let Some((i, j)) = p.box_violation(u) {
        return Err(Error::Infeasible(format!("box constraint violated at ({i},{j})")));
    }
    let n = p.dim();
    let l = SymMatrix::from_fn(n, |i, j| t / p.upper_slack(u, i, j));
    let m = SymMatrix::from_fn(n, |i, j| t / p.lower_slack(u, i, j));
    Ok(BarrierState { t, l, m })
}

pub fn residual(p: &Problem, u: &PdFactor, t: f64) -> Result<CentralPathResidual> {
    let state = multipliers(p, u.matrix(), t)?;
    let inv = u.inverse();
    let n = p.dim();
    let h = SymMatrix::from_fn(n, |i, j| state.l.get(i, j) - state.m.get(i, j) - inv.get(i, j));
    Ok(CentralPathResidual { h })
}

/// Dual objective `-log det U - n`.
pub fn dual_objective(u: &PdFactor) -> f64 {
    -u.logdet() - u.dim() as f64
}

/// Primal objective `log det X - Tr(ΣX) - ρ‖X‖₁`.
pub fn primal_objective(p: &Problem, x: &SymMatrix) -> Result<f64> {
    p.check_dim(x)?;
    let (_, logdet) = cholesky_logdet(x)?;
    let trace = p.sigma().dot(x);
    let l1: f64 = x.as_matrix().iter().map(|v| v.abs()).sum();
    Ok(logdet - trace - p.rho() * l1)
}

/// Barrier objective summed over all ordered pairs `(i, j)`.
pub fn barrier_objective(p: &Problem, u: &PdFactor, t: f64) -> Result<f64> {
    Ok(-u.logdet() - t * log_slack_sum(p, u.matrix())?)
}

/// `Σ_{i,j} [log(ρ+Σ-U) + log(ρ-Σ+U)]` over all ordered pairs.
pub(crate) fn log_slack_sum(p: &Problem, u: &SymMatrix) -> Result<f64> {
    p.check_dim(u)?;
    let n = p.dim();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..=j {
            let up = p.upper_slack(u, i, j);
            let lo = p.lower_slack(u, i, j);
            if !(up > 0.0 && lo > 0.0) {
                return Err(Error::Infeasible(format!("box constraint violated at ({i},{j})")));
            }
            let w = if i == j { 1.0 } else { 2.0 };
            acc += w * (up.ln() + lo.ln());
        }
    }
    Ok(acc)
}

/// Bound `2n²t` on the dual suboptimality of a central point.
pub fn gap_bound(n: usize, t: f64) -> f64 {
    2.0 * (n * n) as f64 * t
}

/// The sparsest start: diagonal `U(i,i) = Σ(i,i) + (1 - eps) ρ_max`,
/// strictly feasible for `ρ = ρ_max` unless some off-diagonal `|Σ(i,j)|`
/// reaches `ρ_max`.
pub fn initial_point(sigma: &SymMatrix, eps: f64) -> Result<SymMatrix> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let n = sigma.dim();
    let rmax = rho_max(sigma);
    for j in 0..n {
        for i in 0..j {
            let v = sigma.get(i, j);
            if v.abs() >= rmax {
                return Err(Error::DegenerateInstance {
                    i,
                    j,
                    value: v.abs(),
                    rho_max: rmax,
                });
            }
        }
    }
    let diag: Vec<f64> = sigma
        .diagonal()
        .iter()
        .map(|&s| s + (1.0 - eps) * rmax)
        .collect();
    Ok(SymMatrix::from_diagonal(&diag))
}

/// Carries a solution at `rho_k` to the smaller penalty `rho_next` by the
/// convex combination `(1 - r) Σ + r U_k`, `r = rho_next / rho_k`.
pub fn scaling_warm_start(sigma: &SymMatrix, u_k: &SymMatrix, rho_k: f64, rho_next: f64) -> SymMatrix {
    let r = rho_next / rho_k;
    if r == 1.0 {
        return u_k.clone();
    }
    sigma.scale(1.0 - r).axpy(r, u_k)
}

/// Entries with `|X(i,j)| > zero_tol · max|X|`, counted over all ordered pairs.
pub fn cardinality(x: &SymMatrix, zero_tol: f64) -> usize {
    let cut = zero_tol * x.max_abs();
    x.as_matrix().iter().filter(|v| v.abs() > cut).count()
}

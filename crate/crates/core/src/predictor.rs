//! Tangent directions along the central path.
//!
//! Differentiating `H(U, ρ) = L - M - U⁻¹` gives the Jacobian action
//! `J[P] = U⁻¹ P U⁻¹ + D ∘ P` with `D = (L² + M²)/t` elementwise, and
//! `∂H/∂ρ = -(L² - M²)/t`. The tangent `∂U/∂ρ` solves `J[P] = (L² - M²)/t`.
//! CG runs directly on symmetric matrices with the Frobenius inner
//! product, so the `n² × n²` operator is never formed.

use crate::barrier::{feasible, multipliers, BarrierState, Problem};
use crate::error::{Error, Result};
use crate::symmat::{PdFactor, SymMatrix};

#[derive(Clone, Debug)]
pub struct PredictorSystem {
    pub u_inv: SymMatrix,
    /// Barrier part of the Jacobian, `(L² + M²)/t`.
    pub d: SymMatrix,
    pub rhs: SymMatrix,
}

impl PredictorSystem {
    /// `D = (L² + M²)/t` from a multiplier state.
    pub fn barrier_diagonal(state: &BarrierState) -> SymMatrix {
        let t = state.t;
        state.l.zip_map(&state.m, |l, m| (l * l + m * m) / t)
    }

    pub fn with_rhs(u_inv: SymMatrix, d: SymMatrix, rhs: SymMatrix) -> Self {
        Self { u_inv, d, rhs }
    }
}

pub fn build_system(p: &Problem, u: &PdFactor, t: f64) -> Result<PredictorSystem> {
    let state = multipliers(p, u.matrix(), t)?;
    let d = PredictorSystem::barrier_diagonal(&state);
    let rhs = state.l.zip_map(&state.m, |l, m| (l * l - m * m) / t);
    Ok(PredictorSystem {
        u_inv: u.inverse().clone(),
        d,
        rhs,
    })
}

/// `U⁻¹ P U⁻¹ + D ∘ P`.
pub fn matvec(sys: &PredictorSystem, p: &SymMatrix) -> SymMatrix {
    let mut out = sys.u_inv.congruence(p);
    out.add_scaled_inplace(1.0, &sys.d.hadamard(p));
    out
}

#[derive(Clone, Debug)]
pub struct CgConfig {
    /// Stop when the residual norm drops below this fraction of its start.
    pub rel_drop: f64,
    /// Iteration cap; `None` means `n²`.
    pub max_iters: Option<usize>,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            rel_drop: 1e-2,
            max_iters: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub direction: SymMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Final residual norm over initial residual norm.
    pub residual_ratio: f64,
}

/// Plain (unpreconditioned) conjugate gradients from a zero start.
pub fn cg_solve(sys: &PredictorSystem, cfg: &CgConfig) -> CgOutcome {
    let n = sys.rhs.dim();
    let max_iters = cfg.max_iters.unwrap_or(n * n);
    let mut x = SymMatrix::zeros(n);
    let r0 = sys.rhs.frobenius_norm();
    if r0 == 0.0 {
        return CgOutcome {
            direction: x,
            iterations: 0,
            converged: true,
            residual_ratio: 0.0,
        };
    }
    let target = cfg.rel_drop * r0;
    let mut r = sys.rhs.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    let mut iterations = 0;
    while iterations < max_iters {
        let ap = matvec(sys, &p);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        x.add_scaled_inplace(alpha, &p);
        r.add_scaled_inplace(-alpha, &ap);
        iterations += 1;
        let rr_next = r.dot(&r);
        if rr_next.sqrt() <= target {
            return CgOutcome {
                direction: x,
                iterations,
                converged: true,
                residual_ratio: rr_next.sqrt() / r0,
            };
        }
        let beta = rr_next / rr;
        p = r.axpy(beta, &p);
        rr = rr_next;
    }
    CgOutcome {
        direction: x,
        iterations,
        converged: false,
        residual_ratio: rr.sqrt() / r0,
    }
}

#[derive(Clone, Debug)]
pub struct PredictorOutcome {
    pub u: SymMatrix,
    pub cg_iterations: usize,
    pub cg_converged: bool,
    /// Weight on the tangent step in the returned point (1 = full step).
    pub step_weight: f64,
    pub halvings: usize,
}

/// Maximum number of step halvings before giving up.
pub const MAX_HALVINGS: usize = 30;

/// Moves a near-central `U` at penalty `ρ` to a start for `ρ + h`.
///
/// The full tangent step `U + h ∂U/∂ρ` is tried first. When it leaves the
/// box for `ρ + h`, the step is pulled back toward the scaling warm start
/// `S = (1 - r)Σ + rU` (`r = (ρ+h)/ρ`), which is strictly feasible for
/// `ρ + h`: the candidate `S + θ (U + h ∂U/∂ρ - S)` is tried with `θ`
/// halved up to [`MAX_HALVINGS`] times. For `h > 0` (increasing `ρ`), `U`
/// itself is feasible and plays the role of `S`.
pub fn predictor_step(p: &Problem, u: &PdFactor, t: f64, h: f64, cfg: &CgConfig) -> Result<PredictorOutcome> {
    if h == 0.0 {
        return Ok(PredictorOutcome {
            u: u.matrix().clone(),
            cg_iterations: 0,
            cg_converged: true,
            step_weight: 1.0,
            halvings: 0,
        });
    }
    let rho = p.rho();
    let target = p.with_rho(rho + h)?;
    let sys = build_system(p, u, t)?;
    let cg = cg_solve(&sys, cfg);
    let full = u.matrix().axpy(h, &cg.direction);
    let anchor = if h < 0.0 {
        crate::barrier::scaling_warm_start(p.sigma(), u.matrix(), rho, rho + h)
    } else {
        u.matrix().clone()
    };
    let mut theta = 1.0;
    for halvings in 0..=MAX_HALVINGS {
        let cand = if halvings == 0 {
            full.clone()
        } else {
            anchor.axpy(theta, &full.axpy(-1.0, &anchor))
        };
        if feasible(&target, &cand) {
            return Ok(PredictorOutcome {
                u: cand,
                cg_iterations: cg.iterations,
                cg_converged: cg.converged,
                step_weight: theta,
                halvings,
            });
        }
        theta *= 0.5;
    }
    Err(Error::StepCollapse {
        halvings: MAX_HALVINGS,
    })
}

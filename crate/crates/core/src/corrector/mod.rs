//! Block coordinate-descent corrector for the barrier problem at fixed
//! `(ρ, t)`.
//!
//! Each row update solves the row/column block problem by cyclic closed-form
//! coordinate minimization, then refreshes the cached `U⁻¹` with a rank-2
//! inverse update. Sweeps repeat until the central-path residual
//! `‖L - M - U⁻¹‖_F` reaches the tolerance.

mod block;
mod scalar;

pub use block::{
    block_dual_point, block_objective, coord_coefficients, make_partition, row_scores, BlockDualValue,
    BlockPartition, RowScores,
};
pub use scalar::{
    coordinate_objective, cubic_coefficients, diagonal_objective, real_cubic_roots, solve_coordinate,
    solve_diagonal, CoordCoefficients, CubicCoefficients, BOUNDARY_GUARD,
};

use crate::barrier::{log_slack_sum, multipliers, Problem};
use crate::error::{Error, Result};
use crate::symmat::{swm_update_inverse, PdFactor, SymMatrix};

#[derive(Clone, Debug)]
pub struct CorrectorConfig {
    /// Stop once `‖H‖_F` falls to this value; `None` means `1e-6 · n`.
    pub tol_residual: Option<f64>,
    /// Inner passes over a block stop when no coordinate moves more than this.
    pub tol_block: f64,
    pub max_inner_passes: usize,
    pub max_sweeps: usize,
    /// Fraction of rows (ranked by δ) visited per sweep; 1.0 visits all rows.
    pub sweep_fraction: f64,
    /// Row updates between fresh inversions of `U`.
    pub refresh_interval: usize,
    /// Secondary stop: every block duality gap in a full sweep at or below this.
    pub block_gap_tol: f64,
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        Self {
            tol_residual: None,
            tol_block: 1e-9,
            max_inner_passes: 20,
            max_sweeps: 500,
            sweep_fraction: 1.0,
            refresh_interval: 50,
            block_gap_tol: 1e-13,
        }
    }
}

impl CorrectorConfig {
    pub fn residual_tolerance(&self, n: usize) -> f64 {
        self.tol_residual.unwrap_or(1e-6 * n as f64)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol_residual = Some(tol);
        self
    }
}

/// Partial sweeps still do a full pass this often, so rows with small δ but
/// large off-diagonal residual are not starved.
const FULL_SWEEP_EVERY: usize = 5;

#[derive(Clone, Debug, Default)]
pub struct CorrectorStats {
    pub sweeps: usize,
    pub row_updates: usize,
    /// `‖H‖_F` at return.
    pub residual: f64,
    /// Barrier objective at the start and after every sweep.
    pub objective_trace: Vec<f64>,
    /// Largest Frobenius gap between the maintained and a fresh inverse.
    pub max_inverse_drift: f64,
    pub refreshes: usize,
    /// Largest on-entry block duality gap in the last sweep.
    pub last_sweep_block_gap: f64,
    pub stopped_on_block_gap: bool,
}

#[derive(Clone, Debug)]
pub struct CorrectorOutcome {
    pub factor: PdFactor,
    pub stats: CorrectorStats,
}

struct Workspace<'a> {
    p: &'a Problem,
    t: f64,
    u: SymMatrix,
    inv: SymMatrix,
    logdet: f64,
    since_refresh: usize,
}

impl Workspace<'_> {
    fn factor(&self) -> PdFactor {
        PdFactor::from_parts(self.u.clone(), self.inv.clone(), self.logdet)
    }

    fn residual_norm(&self) -> Result<f64> {
        let state = multipliers(self.p, &self.u, self.t)?;
        let n = self.u.dim();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                let h = state.l.get(i, j) - state.m.get(i, j) - self.inv.get(i, j);
                acc += h * h;
            }
        }
        Ok(acc.sqrt())
    }

    fn objective(&self) -> Result<f64> {
        Ok(-self.logdet - self.t * log_slack_sum(self.p, &self.u)?)
    }

    fn refresh(&mut self, stats: &mut CorrectorStats) -> Result<()> {
        let fresh = PdFactor::new(self.u.clone())
            .map_err(|e| Error::Infeasible(format!("iterate lost definiteness: {e}")))?;
        stats.max_inverse_drift = stats.max_inverse_drift.max(self.inv.frobenius_dist(fresh.inverse()));
        stats.refreshes += 1;
        self.logdet = fresh.logdet();
        self.inv = fresh.inverse().clone();
        self.since_refresh = 0;
        Ok(())
    }

    /// Solves the block problem for row `i` and commits the new row.
    /// Returns the block duality gap measured on entry, before the update.
    fn update_row(&mut self, i: usize, cfg: &CorrectorConfig, stats: &mut CorrectorStats) -> Result<f64> {
        let n = self.u.dim();
        let rho = self.p.rho();
        let sigma = self.p.sigma();
        if n == 1 {
            let w = solve_diagonal(0.0, sigma.get(0, 0), rho, self.t)?;
            self.u.set(0, 0, w);
            self.inv.set(0, 0, 1.0 / w);
            self.logdet = w.ln();
            stats.row_updates += 1;
            return Ok(0.0);
        }

        let factor = PdFactor::from_parts(self.u.clone(), self.inv.clone(), self.logdet);
        let mut bp = make_partition(self.p, &factor, i);
        let old_u = bp.u.clone();
        let old_w = bp.w;
        let m = n - 1;
        let gap = block_dual_point(&bp, self.p, &self.u, self.t).map(|d| d.gap).unwrap_or(f64::INFINITY);

        for _ in 0..cfg.max_inner_passes.max(1) {
            let mut z = bp.v_inv_u();
            let mut s: f64 = z.iter().zip(&bp.u).map(|(a, b)| a * b).sum();
            let mut max_change: f64 = 0.0;
            for j in 0..m {
                let vjj = bp.v_inv.get(j, j);
                let uj = bp.u[j];
                let alpha = -vjj;
                let beta = -2.0 * (z[j] - vjj * uj);
                let gamma = (bp.w - s) - alpha * uj * uj - beta * uj;
                let cc = CoordCoefficients { alpha, beta, gamma };
                let x = solve_coordinate(&cc, bp.b[j], rho, self.t, uj)?;
                let dx = x - uj;
                if dx != 0.0 {
                    s = bp.w - cc.schur_at(x);
                    for (zk, vk) in z.iter_mut().zip(bp.v_inv.column(j)) {
                        *zk += vk * dx;
                    }
                    bp.u[j] = x;
                    max_change = max_change.max(dx.abs());
                }
            }
            let w = solve_diagonal(s, bp.c, rho, self.t)?;
            max_change = max_change.max((w - bp.w).abs());
            bp.w = w;
            if max_change <= cfg.tol_block {
                break;
            }
        }

        let mut delta = vec![0.0; n];
        for j in 0..m {
            delta[bp.full_index(j)] = bp.u[j] - old_u[j];
        }
        delta[i] = bp.w - old_w;
        if delta.iter().all(|&d| d == 0.0) {
            return Ok(gap);
        }

        let old_schur = 1.0 / self.inv.get(i, i);
        for j in 0..m {
            self.u.set(i, bp.full_index(j), bp.u[j]);
        }
        self.u.set(i, i, bp.w);
        match swm_update_inverse(&self.inv, i, &delta) {
            Ok(inv) => {
                self.inv = inv;
                let new_schur = bp.w - bp.quad_form();
                self.logdet += new_schur.ln() - old_schur.ln();
                self.since_refresh += 1;
            }
            Err(Error::SingularUpdate { .. }) => self.refresh(stats)?,
            Err(e) => return Err(e),
        }
        stats.row_updates += 1;
        if self.since_refresh >= cfg.refresh_interval {
            self.refresh(stats)?;
        }
        Ok(gap)
    }
}

/// Minimizes the barrier objective at `(p.rho(), t)` from the strictly
/// feasible start `u0`.
pub fn corrector_solve(p: &Problem, u0: &SymMatrix, t: f64, cfg: &CorrectorConfig) -> Result<CorrectorOutcome> {
    if !p.in_box(u0) {
        return Err(Error::Infeasible("corrector start lies outside the box".into()));
    }
    let start = PdFactor::new(u0.clone())
        .map_err(|e| Error::Infeasible(format!("corrector start is not positive definite: {e}")))?;
    let n = p.dim();
    let tol = cfg.residual_tolerance(n);
    let mut ws = Workspace {
        p,
        t,
        u: u0.clone(),
        inv: start.inverse().clone(),
        logdet: start.logdet(),
        since_refresh: 0,
    };
    let mut stats = CorrectorStats::default();
    stats.objective_trace.push(ws.objective()?);
    stats.residual = ws.residual_norm()?;
    if stats.residual <= tol {
        return Ok(CorrectorOutcome {
            factor: start,
            stats,
        });
    }

    while stats.sweeps < cfg.max_sweeps {
        let full = cfg.sweep_fraction >= 1.0 || (stats.sweeps + 1) % FULL_SWEEP_EVERY == 0;
        let rows: Vec<usize> = if full {
            (0..n).collect()
        } else {
            row_scores(p, &ws.factor()).top_fraction(cfg.sweep_fraction)
        };
        let mut sweep_gap: f64 = 0.0;
        for &i in &rows {
            sweep_gap = sweep_gap.max(ws.update_row(i, cfg, &mut stats)?);
        }
        stats.sweeps += 1;
        stats.last_sweep_block_gap = sweep_gap;
        stats.objective_trace.push(ws.objective()?);
        stats.residual = ws.residual_norm()?;

        let gap_stop = full && sweep_gap <= cfg.block_gap_tol;
        if stats.residual <= tol || gap_stop {
            // Confirm against a fresh inverse before accepting.
            ws.refresh(&mut stats)?;
            stats.residual = ws.residual_norm()?;
            if stats.residual <= tol || gap_stop {
                stats.stopped_on_block_gap = stats.residual > tol;
                return Ok(CorrectorOutcome {
                    factor: ws.factor(),
                    stats,
                });
            }
        }
    }
    ws.refresh(&mut stats)?;
    stats.residual = ws.residual_norm()?;
    Err(Error::MaxSweepsExceeded {
        best: Box::new(CorrectorOutcome {
            factor: ws.factor(),
            stats,
        }),
    })
}

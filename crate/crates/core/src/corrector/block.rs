//! Row/column view of the barrier problem.
//!
//! With row `i` moved last, `U = [V u; uᵀ w]` and `Σ = [A b; bᵀ c]`. Holding
//! `V` fixed, the barrier objective restricted to `(u, w)` is
//!
//! ```text
//! -log(w - uᵀV⁻¹u) - t[log(ρ+c-w) + log(ρ-c+w)] - 2t Σ_j [log(ρ+b_j-u_j) + log(ρ-b_j+u_j)]
//! ```
//!
//! up to a constant. `A` never enters this objective and is not stored.

use crate::barrier::Problem;
use crate::error::{Error, Result};
use crate::symmat::{sub_inverse, PdFactor, SymMatrix};

use super::scalar::CoordCoefficients;

#[derive(Clone, Debug)]
pub struct BlockPartition {
    pub i: usize,
    /// Inverse of `U` with row/column `i` deleted.
    pub v_inv: SymMatrix,
    /// Off-diagonal entries of row `i` of `U`, in index order without `i`.
    pub u: Vec<f64>,
    pub w: f64,
    pub b: Vec<f64>,
    pub c: f64,
}

impl BlockPartition {
    /// Full-matrix index of block coordinate `j`.
    #[inline]
    pub fn full_index(&self, j: usize) -> usize {
        if j < self.i {
            j
        } else {
            j + 1
        }
    }

    /// `V⁻¹u`.
    pub fn v_inv_u(&self) -> Vec<f64> {
        let m = self.u.len();
        let mut z = vec![0.0; m];
        for (k, &uk) in self.u.iter().enumerate() {
            if uk != 0.0 {
                for (zr, vr) in z.iter_mut().zip(self.v_inv.column(k)) {
                    *zr += vr * uk;
                }
            }
        }
        z
    }

    /// `uᵀV⁻¹u`.
    pub fn quad_form(&self) -> f64 {
        self.v_inv_u().iter().zip(&self.u).map(|(a, b)| a * b).sum()
    }

    /// Schur complement `w - uᵀV⁻¹u`; positive iff `U` is PD.
    pub fn schur(&self) -> f64 {
        self.w - self.quad_form()
    }
}

/// Extracts the row/column block for index `i`. Requires `n ≥ 2`.
pub fn make_partition(p: &Problem, u: &PdFactor, i: usize) -> BlockPartition {
    let n = u.dim();
    assert!(n >= 2 && i < n, "make_partition needs n >= 2 and i < n");
    let um = u.matrix();
    let sigma = p.sigma();
    let others = (0..n).filter(|&k| k != i);
    BlockPartition {
        i,
        v_inv: sub_inverse(u.inverse(), i),
        u: others.clone().map(|k| um.get(i, k)).collect(),
        w: um.get(i, i),
        b: others.map(|k| sigma.get(i, k)).collect(),
        c: sigma.get(i, i),
    }
}

pub fn block_objective(bp: &BlockPartition, p: &Problem, t: f64) -> Result<f64> {
    let rho = p.rho();
    let schur = bp.schur();
    let up = rho + bp.c - bp.w;
    let lo = rho - bp.c + bp.w;
    if !(schur > 0.0 && up > 0.0 && lo > 0.0) {
        return Err(Error::Infeasible(format!("block {} diagonal infeasible", bp.i)));
    }
    let mut off = 0.0;
    for (j, (&uj, &bj)) in bp.u.iter().zip(&bp.b).enumerate() {
        let y = rho + bj - uj;
        let z = rho - bj + uj;
        if !(y > 0.0 && z > 0.0) {
            return Err(Error::Infeasible(format!("block {} coordinate {j} infeasible", bp.i)));
        }
        off += y.ln() + z.ln();
    }
    Ok(-schur.ln() - t * (up.ln() + lo.ln()) - 2.0 * t * off)
}

/// `α = -V⁻¹_jj`, `β = -2 Σ_{k≠j} V⁻¹_kj u_k`, and `γ` chosen so that
/// `αx² + βx + γ = w - uᵀV⁻¹u` with `u_j` replaced by `x`.
pub fn coord_coefficients(bp: &BlockPartition, j: usize) -> CoordCoefficients {
    let col = bp.v_inv.column(j);
    let vjj = col[j];
    let cross: f64 = col
        .iter()
        .zip(&bp.u)
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, (v, u))| v * u)
        .sum();
    let alpha = -vjj;
    let beta = -2.0 * cross;
    let uj = bp.u[j];
    let gamma = bp.schur() - alpha * uj * uj - beta * uj;
    CoordCoefficients { alpha, beta, gamma }
}

/// Primal value, dual value and their difference for one block.
#[derive(Clone, Copy, Debug)]
pub struct BlockDualValue {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Builds a dual-feasible point for the block problem from the current
/// primal block point and returns the resulting duality gap.
///
/// The dual multipliers are `β_j = 2t/(ρ+b_j-u_j)`, `η_j = 2t/(ρ-b_j+u_j)`,
/// `α₁ = 1/(w - uᵀV⁻¹u)`, and `(α₂, α₃)` maximize the dual over the line
/// `α₂ - α₃ = α₁`. Minimizing the Lagrangian over `u` leaves the term
/// `-(β-η)ᵀV(β-η)/(4α₁)`, which needs `V` itself; `u_full` is the full
/// matrix `U` whose row/column `bp.i` is ignored.
pub fn block_dual_point(bp: &BlockPartition, p: &Problem, u_full: &SymMatrix, t: f64) -> Result<BlockDualValue> {
    let primal = block_objective(bp, p, t)?;
    let rho = p.rho();
    let m = bp.u.len();

    let a1 = 1.0 / bp.schur();
    // 2ρ α₂(α₂ - α₁) = t(2α₂ - α₁), larger root so that α₃ = α₂ - α₁ > 0.
    let qb = 2.0 * rho * a1 + 2.0 * t;
    let a2 = (qb + (qb * qb - 8.0 * rho * t * a1).sqrt()) / (4.0 * rho);
    let a3 = a2 - a1;
    if !(a3 > 0.0) {
        return Err(Error::Infeasible(format!("block {} dual construction failed", bp.i)));
    }

    let mut diff = vec![0.0; m];
    let mut lin = 0.0;
    let mut logs = 0.0;
    for j in 0..m {
        let (uj, bj) = (bp.u[j], bp.b[j]);
        let beta = 2.0 * t / (rho + bj - uj);
        let eta = 2.0 * t / (rho - bj + uj);
        diff[j] = beta - eta;
        lin += beta * (rho + bj) + eta * (rho - bj);
        logs += (beta / (2.0 * t)).ln() + (eta / (2.0 * t)).ln();
    }
    let mut quad = 0.0;
    for a in 0..m {
        let ia = bp.full_index(a);
        let mut acc = 0.0;
        for b in 0..m {
            acc += u_full.get(ia, bp.full_index(b)) * diff[b];
        }
        quad += diff[a] * acc;
    }

    let dual = 1.0 + 2.0 * t + 4.0 * t * m as f64 + a1.ln() - a2 * (rho + bp.c) - a3 * (rho - bp.c)
        - lin
        + t * (a2 / t).ln()
        + t * (a3 / t).ln()
        + 2.0 * t * logs
        - quad / (4.0 * a1);
    Ok(BlockDualValue {
        primal,
        dual,
        gap: primal - dual,
    })
}

/// `δ_i = (ρ + Σ_ii - U_ii) · U⁻¹_ii`: the dual-objective decrease from
/// the best diagonal-only update of row `i`.
#[derive(Clone, Debug)]
pub struct RowScores {
    pub delta: Vec<f64>,
}

impl RowScores {
    /// Indices of the `ceil(fraction · n)` largest scores, largest first;
    /// ties broken by index.
    pub fn top_fraction(&self, fraction: f64) -> Vec<usize> {
        let n = self.delta.len();
        let k = ((fraction * n as f64).ceil() as usize).clamp(1, n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| self.delta[b].total_cmp(&self.delta[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }
}

pub fn row_scores(p: &Problem, u: &PdFactor) -> RowScores {
    let um = u.matrix();
    let inv = u.inverse();
    let delta = (0..u.dim())
        .map(|i| p.upper_slack(um, i, i) * inv.get(i, i))
        .collect();
    RowScores { delta }
}
